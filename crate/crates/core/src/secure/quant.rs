//! Fixed-point quantization into the ring Z/2^32, where pairwise masks can
//! cancel exactly. Scale is 2^16, so any parameter with magnitude below
//! 2^15 survives a round trip to within 2^-16 per coordinate.

use super::SecureError;

pub const SCALE_BITS: u32 = 16;
pub const SCALE: f64 = (1u64 << SCALE_BITS) as f64;

/// Integer model update modulo 2^32.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedParams {
    pub values: Vec<u32>,
}

impl QuantizedParams {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Rounds each coordinate to the nearest multiple of 2^-16 and wraps into
/// the ring. Rejects non-finite inputs; values beyond +-2^15 would alias
/// under the wrap and are refused.
pub fn quantize(params: &[f64]) -> Result<QuantizedParams, SecureError> {
    let bound = SCALE * SCALE / 2.0; // 2^31 in fixed-point units
    let mut values = Vec::with_capacity(params.len());
    for (ix, &p) in params.iter().enumerate() {
        if !p.is_finite() {
            return Err(SecureError::NonFinite { index: ix });
        }
        let scaled = (p * SCALE).round();
        if scaled.abs() >= bound {
            return Err(SecureError::OutOfRange { index: ix, value: p });
        }
        values.push(scaled as i64 as u32);
    }
    Ok(QuantizedParams { values })
}

/// Centered lift of one ring element back to a signed magnitude.
pub fn lift(v: u32) -> i32 {
    v as i32
}

/// Inverse of [`quantize`] under the centered lift.
pub fn dequantize(q: &QuantizedParams) -> Vec<f64> {
    q.values.iter().map(|&v| lift(v) as f64 / SCALE).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_error_is_at_most_half_a_step() {
        let xs = [0.0, 1.0, -1.0, 0.123456, -0.998877, 3.25, -1000.5, 32767.0];
        let q = quantize(&xs).unwrap();
        for (orig, back) in xs.iter().zip(dequantize(&q)) {
            assert!(
                (orig - back).abs() <= 0.5 / SCALE + 1e-12,
                "{orig} -> {back}"
            );
        }
    }

    #[test]
    fn negative_values_wrap_into_the_upper_half() {
        let q = quantize(&[-1.0]).unwrap();
        assert_eq!(q.values[0], (-65536i64) as u32);
        assert_eq!(lift(q.values[0]), -65536);
    }

    #[test]
    fn exact_grid_points_round_trip_exactly() {
        let xs = [0.5, -0.25, 2.0, -7.75];
        assert_eq!(dequantize(&quantize(&xs).unwrap()), xs.to_vec());
    }

    #[test]
    fn rejects_non_finite_and_aliasing_magnitudes() {
        assert!(matches!(
            quantize(&[f64::NAN]),
            Err(SecureError::NonFinite { index: 0 })
        ));
        assert!(matches!(
            quantize(&[f64::INFINITY]),
            Err(SecureError::NonFinite { .. })
        ));
        assert!(matches!(
            quantize(&[40000.0]),
            Err(SecureError::OutOfRange { .. })
        ));
        assert!(quantize(&[32000.0]).is_ok());
    }
}
