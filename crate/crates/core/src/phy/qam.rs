//! Gray-mapped square QAM with unit average power.
//!
//! Bits are interleaved across the axes: even-indexed bits of a symbol drive
//! the in-phase level, odd-indexed bits the quadrature level. On each axis the
//! first bit picks the sign (0 is positive) and the remaining bits pick the
//! magnitude in Gray order starting from the outermost level, so the all-zero
//! word is the positive corner:
//!
//! | constellation | bits `0..0` maps to |
//! |---------------|---------------------|
//! | QPSK          | `(1 + i) / sqrt(2)` |
//! | 16QAM         | `(3 + 3i) / sqrt(10)` |
//! | 64QAM         | `(7 + 7i) / sqrt(42)` |

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Constellation {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[default]
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "64qam")]
    Qam64,
}

impl Constellation {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 6,
        }
    }

    fn bits_per_axis(&self) -> usize {
        self.bits_per_symbol() / 2
    }

    pub fn order(&self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// `1 / sqrt(2 (M - 1) / 3)` for odd-integer levels.
    fn scale(&self) -> f64 {
        (1.5 / (self.order() as f64 - 1.0)).sqrt()
    }

    /// Every point, indexed by the integer whose bits (MSB first) are the word.
    pub fn points(&self) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        (0..self.order())
            .map(|w| {
                let bits: Vec<u8> = (0..bps).map(|i| ((w >> (bps - 1 - i)) & 1) as u8).collect();
                self.map_word(&bits)
            })
            .collect()
    }

    fn map_word(&self, bits: &[u8]) -> Complex64 {
        let i_bits: Vec<u8> = bits.iter().step_by(2).copied().collect();
        let q_bits: Vec<u8> = bits.iter().skip(1).step_by(2).copied().collect();
        Complex64::new(axis_level(&i_bits), axis_level(&q_bits)) * self.scale()
    }

    fn axis_bits(&self, level: f64) -> Vec<u8> {
        let l = self.bits_per_axis();
        let max = (1 << l) as f64 - 1.0;
        // nearest odd integer in [-max, max]
        let snapped = (((level + max) / 2.0).round().clamp(0.0, max)) * 2.0 - max;
        (0..1u32 << l)
            .map(|w| (0..l).map(|i| ((w >> (l - 1 - i)) & 1) as u8).collect::<Vec<u8>>())
            .find(|b| axis_level(b) == snapped)
            .expect("every odd level has a gray word")
    }
}

/// Signed odd-integer level of one axis: `(1 - 2 b0) * mag(b1..)` with
/// `mag(b1..br) = 2^r + (1 - 2 b1) * mag(b2..br)` and `mag() = 1`.
fn axis_level(bits: &[u8]) -> f64 {
    fn mag(bits: &[u8]) -> f64 {
        match bits.split_first() {
            None => 1.0,
            Some((b, rest)) => (1u32 << (rest.len() + 1)) as f64 + (1.0 - 2.0 * *b as f64) * mag(rest),
        }
    }
    let (sign, rest) = bits.split_first().expect("at least one bit per axis");
    let m = if rest.is_empty() { 1.0 } else { mag(rest) };
    (1.0 - 2.0 * *sign as f64) * m
}

/// Maps bits (one `0`/`1` per byte) to symbols.
pub fn qam_map(bits: &[u8], c: Constellation) -> Result<Vec<Complex64>> {
    let bps = c.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::Length(format!("{} bits is not a multiple of {bps}", bits.len())));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::Parameter(format!("bit values must be 0 or 1, got {b}")));
    }
    Ok(bits.chunks(bps).map(|w| c.map_word(w)).collect())
}

/// Nearest-point hard decisions.
pub fn qam_demap(symbols: &[Complex64], c: Constellation) -> Vec<u8> {
    let s = c.scale();
    let mut out = Vec::with_capacity(symbols.len() * c.bits_per_symbol());
    for z in symbols {
        let i = c.axis_bits(z.re / s);
        let q = c.axis_bits(z.im / s);
        for (bi, bq) in i.iter().zip(&q) {
            out.push(*bi);
            out.push(*bq);
        }
    }
    out
}
