//! Task classes and task instances.

/// The three 6G service classes a task can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Ultra-reliable low-latency: 1 MB, 2 s deadline.
    Urllc,
    /// Enhanced mobile broadband: 3 MB, 5 s deadline.
    Embb,
    /// Massive machine-type: 0.5 MB, 10 s deadline.
    Mmtc,
}

pub const TASK_KINDS: [TaskKind; 3] = [TaskKind::Urllc, TaskKind::Embb, TaskKind::Mmtc];

const BITS_PER_MB: f64 = 8.0e6;

impl TaskKind {
    pub fn size_mb(self) -> f64 {
        match self {
            TaskKind::Urllc => 1.0,
            TaskKind::Embb => 3.0,
            TaskKind::Mmtc => 0.5,
        }
    }

    pub fn size_bits(self) -> u64 {
        (self.size_mb() * BITS_PER_MB) as u64
    }

    pub fn deadline_s(self) -> f64 {
        match self {
            TaskKind::Urllc => 2.0,
            TaskKind::Embb => 5.0,
            TaskKind::Mmtc => 10.0,
        }
    }

    pub fn one_hot(self) -> [f64; 3] {
        match self {
            TaskKind::Urllc => [1.0, 0.0, 0.0],
            TaskKind::Embb => [0.0, 1.0, 0.0],
            TaskKind::Mmtc => [0.0, 0.0, 1.0],
        }
    }

    pub fn from_index(ix: usize) -> Option<TaskKind> {
        TASK_KINDS.get(ix).copied()
    }
}

/// A unit of work moving through an agent's queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub kind: TaskKind,
    /// Simulated time at which the task arrived, seconds.
    pub created_s: f64,
    /// MAC attempts made for this task so far.
    pub attempts: u32,
    /// Time of the first MAC attempt, for offloading-delay accounting.
    pub first_attempt_s: Option<f64>,
}

impl Task {
    pub fn new(kind: TaskKind, created_s: f64) -> Self {
        Self {
            kind,
            created_s,
            attempts: 0,
            first_attempt_s: None,
        }
    }

    pub fn deadline_at(&self) -> f64 {
        self.created_s + self.kind.deadline_s()
    }
}
