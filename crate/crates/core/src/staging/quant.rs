use serde::{Deserialize, Serialize};

/// Largest supported fixed-point precision.
pub const MAX_PRECISION: u32 = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantizeError {
    #[error("precision must be in 1..={MAX_PRECISION} (got {0})")]
    InvalidPrecision(u32),
    #[error("fractional bits must be at most {MAX_PRECISION} (got {0})")]
    InvalidFracBits(u32),
    #[error("value {value} does not fit unsigned {precision}-bit fixed point with {frac_bits} fractional bits")]
    OutOfRange {
        value: f64,
        precision: u32,
        frac_bits: u32,
    },
}

/// Unsigned fixed-point encoding shared by thresholds and features.
///
/// `round(v * 2^frac_bits)` with halves rounded up; the result must lie in
/// `[0, 2^precision - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantizer {
    pub precision: u32,
    pub frac_bits: u32,
}

impl Quantizer {
    pub fn new(precision: u32, frac_bits: u32) -> Result<Self, QuantizeError> {
        if precision == 0 || precision > MAX_PRECISION {
            return Err(QuantizeError::InvalidPrecision(precision));
        }
        if frac_bits > MAX_PRECISION {
            return Err(QuantizeError::InvalidFracBits(frac_bits));
        }
        Ok(Quantizer {
            precision,
            frac_bits,
        })
    }

    pub fn max_value(&self) -> u64 {
        (1u64 << self.precision) - 1
    }

    pub fn quantize(&self, value: f64) -> Result<u64, QuantizeError> {
        let scaled = (value * (1u64 << self.frac_bits) as f64 + 0.5).floor();
        if !scaled.is_finite() || scaled < 0.0 || scaled > self.max_value() as f64 {
            return Err(QuantizeError::OutOfRange {
                value,
                precision: self.precision,
                frac_bits: self.frac_bits,
            });
        }
        Ok(scaled as u64)
    }

    pub fn dequantize(&self, q: u64) -> f64 {
        q as f64 / (1u64 << self.frac_bits) as f64
    }
}
