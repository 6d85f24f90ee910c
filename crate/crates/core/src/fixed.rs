//! W4A16 fixed-point contract.
//!
//! Weights are stored as 4-bit codebook indices and decoded to [`Fixed16`];
//! activations are [`Fixed16`] as well. Products are formed 16x16 -> 32 and
//! summed in an [`Acc32`] with wraparound, so the result does not depend on
//! the order in which the products arrive. Saturation only happens when the
//! accumulator is narrowed back to 16 bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of fraction bits of a Qm.n interpretation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QFormat(u8);

impl QFormat {
    pub const Q8_8: QFormat = QFormat(8);
    pub const MAX_FRAC_BITS: u8 = 15;

    pub fn new(frac_bits: u8) -> Result<Self> {
        if frac_bits > Self::MAX_FRAC_BITS {
            return Err(Error::invalid(format!(
                "fraction bits must be in [0, {}], got {frac_bits}",
                Self::MAX_FRAC_BITS
            )));
        }
        Ok(QFormat(frac_bits))
    }

    #[inline]
    pub fn frac_bits(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn scale(self) -> f64 {
        (1u32 << self.0) as f64
    }
}

impl Default for QFormat {
    fn default() -> Self {
        QFormat::Q8_8
    }
}

/// 16-bit two's-complement fixed-point value. The Q format travels separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fixed16(pub i16);

impl Fixed16 {
    pub const ZERO: Fixed16 = Fixed16(0);

    #[inline]
    pub fn raw(self) -> i16 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Full-precision product, Q(2n).
    #[inline]
    pub fn widening_mul(self, rhs: Fixed16) -> i32 {
        self.0 as i32 * rhs.0 as i32
    }
}

/// 32-bit wraparound accumulator holding a Q(2m).(2n) sum of products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Acc32(pub i32);

impl Acc32 {
    #[inline]
    pub fn mac(&mut self, weight: Fixed16, act: Fixed16) {
        self.0 = self.0.wrapping_add(weight.widening_mul(act));
    }

    /// Arithmetic shift right by the fraction bits (truncation toward
    /// negative infinity), then saturate into 16 bits.
    #[inline]
    pub fn narrow(self, q: QFormat) -> Fixed16 {
        let shifted = self.0 >> q.frac_bits();
        Fixed16(shifted.clamp(i16::MIN as i32, i16::MAX as i32) as i16)
    }
}

/// Round to nearest (ties away from zero) and saturate. NaN is rejected;
/// infinities saturate.
pub fn quantize_value(x: f32, q: QFormat) -> Result<Fixed16> {
    if x.is_nan() {
        return Err(Error::NotANumber);
    }
    // f32 * 2^n is exact in f64, and f64::round ties away from zero.
    let scaled = (x as f64 * q.scale()).round();
    Ok(Fixed16(scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16))
}

/// Exact: every i16 / 2^n is representable in f32.
#[inline]
pub fn dequantize_value(v: Fixed16, q: QFormat) -> f32 {
    (v.0 as f64 / q.scale()) as f32
}
