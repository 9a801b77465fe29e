//! Rational-factor resampling of frequency-domain channel estimates.
//!
//! Interpolation by `p` zero-stuffs and filters with a Hann-windowed sinc whose
//! zeros fall on multiples of `p`, so every `p`-th output reproduces an input
//! sample exactly. Decimation by `q` keeps every `q`-th sample with no
//! anti-alias prefilter. Sequence ends are mirrored (whole-sample symmetric)
//! rather than zero padded.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FILTER_LEN: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FilterKind {
    #[default]
    #[serde(rename = "hann-sinc")]
    HannSinc,
}

/// Factors `p/q` in lowest terms plus the interpolation kernel design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResampleSpec {
    up: usize,
    down: usize,
    filter_len: usize,
    kind: FilterKind,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl ResampleSpec {
    pub fn new(up: usize, down: usize, filter_len: usize) -> Result<Self> {
        if up < 1 {
            return Err(Error::Factor(up));
        }
        if down < 1 {
            return Err(Error::Factor(down));
        }
        if filter_len < 3 || filter_len.is_multiple_of(2) {
            return Err(Error::Resampler(format!("filter length must be odd and >= 3, got {filter_len}")));
        }
        let g = gcd(up, down);
        Ok(ResampleSpec { up: up / g, down: down / g, filter_len, kind: FilterKind::HannSinc })
    }

    /// Ratio `p/q` with the default 33-tap kernel.
    pub fn ratio(up: usize, down: usize) -> Result<Self> {
        Self::new(up, down, DEFAULT_FILTER_LEN)
    }

    pub fn up(&self) -> usize {
        self.up
    }

    pub fn down(&self) -> usize {
        self.down
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn with_filter_len(self, filter_len: usize) -> Result<Self> {
        Self::new(self.up, self.down, filter_len)
    }
}

/// Lowpass kernel for interpolation by `p` with cutoff `pi / r`, `r >= p`,
/// centred at index `(len - 1) / 2`. Each polyphase branch is scaled to unit
/// DC gain, so the whole kernel sums to `p`.
pub fn design_kernel(p: usize, r: usize, len: usize) -> Vec<f64> {
    let half = (len / 2) as isize;
    let mut h: Vec<f64> = (-half..=half)
        .map(|n| {
            let x = n as f64 / r as f64;
            let sinc = if n == 0 {
                1.0
            } else if n % r as isize == 0 {
                0.0
            } else {
                (PI * x).sin() / (PI * x)
            };
            let w = 0.5 * (1.0 + (2.0 * PI * n as f64 / (len + 1) as f64).cos());
            p as f64 / r as f64 * sinc * w
        })
        .collect();
    for phase in 0..p {
        // taps contributing to outputs at offset `phase` from an input sample
        let idx: Vec<usize> =
            (0..len).filter(|&i| (i as isize - half).rem_euclid(p as isize) as usize == phase).collect();
        let s: f64 = idx.iter().map(|&i| h[i]).sum();
        if s.abs() > 1e-300 {
            for i in idx {
                h[i] /= s;
            }
        }
    }
    h
}

/// Whole-sample symmetric reflection of index `i` into `0..len`.
fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let r = i.rem_euclid(period);
    (if r < n { r } else { period - r }) as usize
}

fn interpolate(seq: &[Complex64], p: usize, cutoff_ratio: usize, filter_len: usize) -> Vec<Complex64> {
    if p == 1 {
        return seq.to_vec();
    }
    let h = design_kernel(p, cutoff_ratio, filter_len);
    let half = (filter_len / 2) as isize;
    let (pi, len) = (p as isize, seq.len());
    (0..(p * len) as isize)
        .map(|n| {
            // inputs i with |n - i p| <= half
            let lo = (n - half).div_euclid(pi) + if (n - half).rem_euclid(pi) == 0 { 0 } else { 1 };
            let hi = (n + half).div_euclid(pi);
            (lo..=hi)
                .map(|i| {
                    let tap = h[(n - i * pi + half) as usize];
                    seq[reflect(i, len)] * tap
                })
                .sum()
        })
        .collect()
}

/// Zero-stuffs by `p` and lowpass filters; output length `p * len`.
pub fn upsample(seq: &[Complex64], p: usize, spec: &ResampleSpec) -> Result<Vec<Complex64>> {
    if p < 1 {
        return Err(Error::Factor(p));
    }
    if seq.len() < 2 {
        return Err(Error::Resampler(format!("need at least 2 samples to interpolate, got {}", seq.len())));
    }
    Ok(interpolate(seq, p, p.max(spec.down), spec.filter_len))
}

/// Keeps indices `0, q, 2q, ...`; output length `ceil(len / q)`.
pub fn downsample(seq: &[Complex64], q: usize) -> Result<Vec<Complex64>> {
    if q < 1 {
        return Err(Error::Factor(q));
    }
    Ok(seq.iter().step_by(q).copied().collect())
}

/// Interpolate by `p`, then keep every `q`-th sample. Factors are reduced first.
pub fn resample(seq: &[Complex64], p: usize, q: usize, spec: &ResampleSpec) -> Result<Vec<Complex64>> {
    let reduced = ResampleSpec::new(p, q, spec.filter_len)?;
    let (p, q) = (reduced.up, reduced.down);
    if p == 1 {
        return downsample(seq, q);
    }
    if seq.len() < 2 {
        return Err(Error::Resampler(format!("need at least 2 samples to interpolate, got {}", seq.len())));
    }
    downsample(&interpolate(seq, p, p.max(q), spec.filter_len), q)
}

/// Resamples every column of `(len x M)` channel responses by `spec`.
pub fn resample_columns(h: &DMatrix<Complex64>, spec: &ResampleSpec) -> Result<DMatrix<Complex64>> {
    let cols: Vec<Vec<Complex64>> = h
        .column_iter()
        .map(|c| {
            let v: Vec<Complex64> = c.iter().copied().collect();
            resample(&v, spec.up, spec.down, spec)
        })
        .collect::<Result<_>>()?;
    let rows = cols.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, h.ncols(), |r, c| cols[c][r]))
}
