use clap::Parser;

fn main() -> anyhow::Result<()> {
    fermi6g_cli::init_logging()?;
    fermi6g_cli::execute(fermi6g_cli::Cli::parse())
}
