//! Tensor element types and float conversions.
//!
//! All conversions round to nearest, ties to even. Values that would
//! overflow the target format saturate to the largest finite magnitude
//! instead of producing infinities, so converted factors always stay
//! loadable.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest finite f16 value.
pub const F16_MAX: f32 = 65504.0;

const F16_MAX_BITS: u16 = 0x7bff;
const BF16_MAX_BITS: u16 = 0x7f7f;

/// Element type of a stored tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DType {
    F16,
    BF16,
    F32,
}

impl DType {
    /// Size of one element in bytes.
    pub fn byte_width(self) -> usize {
        match self {
            DType::F16 | DType::BF16 => 2,
            DType::F32 => 4,
        }
    }

    /// Tag used in checkpoint headers.
    pub fn as_str(self) -> &'static str {
        match self {
            DType::F16 => "F16",
            DType::BF16 => "BF16",
            DType::F32 => "F32",
        }
    }

    /// Parses a header tag; returns `None` for unknown tags.
    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "F16" => Some(DType::F16),
            "BF16" => Some(DType::BF16),
            "F32" => Some(DType::F32),
            _ => None,
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Converts an f32 to f16 bits, rounding to nearest even and saturating
/// overflow to ±65504.
pub fn f32_to_f16_bits(x: f32) -> u16 {
    let bits = x.to_bits();
    let sign = ((bits >> 16) & 0x8000) as u16;
    let exp = ((bits >> 23) & 0xff) as i32;
    let mant = bits & 0x007f_ffff;

    if exp == 0xff {
        if mant != 0 {
            // NaN: canonical quiet NaN, sign preserved.
            return sign | 0x7e00;
        }
        // Infinite input saturates like any other overflow.
        return sign | F16_MAX_BITS;
    }

    let unbiased = exp - 127;
    if unbiased >= 16 {
        return sign | F16_MAX_BITS;
    }

    if unbiased >= -14 {
        // Normal f16 range; drop 13 mantissa bits with round-to-nearest-even.
        let mant16 = (mant >> 13) as u16;
        let rest = mant & 0x1fff;
        let mut h = sign | ((((unbiased + 15) as u16) << 10) | mant16);
        if rest > 0x1000 || (rest == 0x1000 && (mant16 & 1) == 1) {
            h = h.wrapping_add(1);
        }
        // Rounding may carry past the largest normal into the inf pattern.
        if (h & 0x7fff) >= 0x7c00 {
            h = sign | F16_MAX_BITS;
        }
        return h;
    }

    if unbiased < -25 {
        // Too small for the smallest subnormal; rounds to signed zero.
        return sign;
    }

    // Subnormal f16: shift the full significand into place and round.
    let full_mant = mant | 0x0080_0000;
    let shift = (13 - 14 - unbiased) as u32;
    let mant16 = (full_mant >> shift) as u16;
    let rest = full_mant & ((1u32 << shift) - 1);
    let halfway = 1u32 << (shift - 1);
    let mut h = sign | mant16;
    if rest > halfway || (rest == halfway && (mant16 & 1) == 1) {
        h = h.wrapping_add(1);
    }
    h
}

/// Converts f16 bits to the exactly representable f32 value.
pub fn f16_bits_to_f32(bits: u16) -> f32 {
    let sign = ((bits & 0x8000) as u32) << 16;
    let exp = ((bits >> 10) & 0x1f) as u32;
    let mant = (bits & 0x03ff) as u32;
    match exp {
        0 => {
            if mant == 0 {
                f32::from_bits(sign)
            } else {
                // Subnormal: mant × 2⁻²⁴, exact in f32.
                let v = mant as f32 * f32::from_bits(0x3380_0000); // 2^-24
                if sign != 0 {
                    -v
                } else {
                    v
                }
            }
        }
        31 => {
            if mant == 0 {
                f32::from_bits(sign | 0x7f80_0000)
            } else {
                f32::from_bits(sign | 0x7fc0_0000 | (mant << 13))
            }
        }
        _ => f32::from_bits(sign | ((exp + 112) << 23) | (mant << 13)),
    }
}

/// Converts an f32 to bf16 bits, rounding to nearest even and saturating
/// overflow to the largest finite bf16.
pub fn f32_to_bf16_bits(x: f32) -> u16 {
    let bits = x.to_bits();
    if x.is_nan() {
        return ((bits >> 16) as u16) | 0x0040;
    }
    let sign = ((bits >> 16) & 0x8000) as u16;
    let mut h = (bits >> 16) as u16;
    let rest = bits & 0xffff;
    if rest > 0x8000 || (rest == 0x8000 && (h & 1) == 1) {
        h = h.wrapping_add(1);
    }
    if (h & 0x7fff) >= 0x7f80 {
        h = sign | BF16_MAX_BITS;
    }
    h
}

/// Converts bf16 bits to the exactly representable f32 value.
pub fn bf16_bits_to_f32(bits: u16) -> f32 {
    f32::from_bits((bits as u32) << 16)
}

/// Decodes a little-endian byte buffer into f32 values.
pub fn decode_f32(data: &[u8], dtype: DType) -> Vec<f32> {
    match dtype {
        DType::F32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        DType::F16 => data
            .chunks_exact(2)
            .map(|c| f16_bits_to_f32(u16::from_le_bytes([c[0], c[1]])))
            .collect(),
        DType::BF16 => data
            .chunks_exact(2)
            .map(|c| bf16_bits_to_f32(u16::from_le_bytes([c[0], c[1]])))
            .collect(),
    }
}

/// Encodes f32 values into a little-endian byte buffer of the given dtype.
pub fn encode_f32(values: &[f32], dtype: DType) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * dtype.byte_width());
    match dtype {
        DType::F32 => {
            for &v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        DType::F16 => {
            for &v in values {
                out.extend_from_slice(&f32_to_f16_bits(v).to_le_bytes());
            }
        }
        DType::BF16 => {
            for &v in values {
                out.extend_from_slice(&f32_to_bf16_bits(v).to_le_bytes());
            }
        }
    }
    out
}
