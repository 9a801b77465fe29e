//! Multi-numerology CP-OFDM transmit and receive chain.
//!
//! Transforms are unitary (`1/sqrt(N)` both ways), so a subcarrier symbol of
//! energy `E` becomes `E` of time-domain energy per OFDM symbol and the noise
//! variance per sample equals the noise variance per demodulated subcarrier.

use std::sync::Arc;

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerology::{bin_index, Numerology, NumerologySet};
use crate::precoding::GroupPrecoders;

/// Where one group's used subcarriers land in its FFT.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLayout {
    pub numerology: Numerology,
    /// OFDM symbols per time unit.
    pub p: usize,
    /// Absolute frequency of each used subcarrier.
    pub grid: Vec<f64>,
    /// FFT bin of each used subcarrier.
    pub bins: Vec<usize>,
}

impl GroupLayout {
    pub fn new(set: &NumerologySet, group: usize, used: usize) -> Result<Self> {
        let numerology = *set.group(group);
        let grid = set.group_grid(group, used)?;
        let bins = grid.iter().map(|&f| bin_index(&numerology, f)).collect::<Result<Vec<_>>>()?;
        Ok(GroupLayout { numerology, p: set.p(group), grid, bins })
    }

    pub fn used(&self) -> usize {
        self.bins.len()
    }

    /// Samples this group emits per time unit, `p * (N + L)`.
    pub fn block_len(&self) -> usize {
        self.p * self.numerology.symbol_len()
    }
}

/// QAM symbols of one group, indexed `[user][ofdm_symbol][subcarrier]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPayload {
    pub symbols: Vec<Vec<Vec<Complex64>>>,
}

/// `M` per-antenna sample streams covering one time unit.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaFrame {
    pub streams: Vec<Vec<Complex64>>,
    pub sample_rate: f64,
}

impl AntennaFrame {
    pub fn antennas(&self) -> usize {
        self.streams.len()
    }

    pub fn len(&self) -> usize {
        self.streams.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn energy(&self) -> f64 {
        self.streams.iter().flatten().map(|z| z.norm_sqr()).sum()
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Precodes, inverse-transforms and prefixes the `p` symbols of one group,
/// returning `antennas` streams of `p * (N + L)` samples.
pub fn modulate_group(
    payload: &GroupPayload,
    precoders: &GroupPrecoders,
    layout: &GroupLayout,
    antennas: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let n = layout.numerology.fft_size;
    let cp = layout.numerology.cp_len;
    let k = payload.symbols.len();
    for sb in &precoders.subbands {
        if sb.matrix.ncols() != k || sb.matrix.nrows() != antennas {
            return Err(Error::Dimension(format!(
                "precoder is {}x{}, payload has {k} users on {antennas} antennas",
                sb.matrix.nrows(),
                sb.matrix.ncols()
            )));
        }
    }
    let covered = precoders.subbands.last().map_or(0, |sb| sb.range.end);
    if covered < layout.used() {
        return Err(Error::Dimension(format!("precoders cover {covered} of {} subcarriers", layout.used())));
    }
    for user in &payload.symbols {
        if user.len() != layout.p || user.iter().any(|s| s.len() != layout.used()) {
            return Err(Error::Dimension(format!(
                "payload must be {} symbols of {} subcarriers per user",
                layout.p,
                layout.used()
            )));
        }
    }

    let ifft = plan(n, true);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = vec![Vec::with_capacity(layout.block_len()); antennas];
    let mut bins = vec![vec![Complex64::new(0.0, 0.0); n]; antennas];
    let mut s = DVector::zeros(k);
    for m in 0..layout.p {
        for b in bins.iter_mut() {
            b.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        }
        for (j, &bin) in layout.bins.iter().enumerate() {
            for u in 0..k {
                s[u] = payload.symbols[u][m][j];
            }
            let x = precoders.at(j) * &s;
            for (a, b) in bins.iter_mut().enumerate() {
                b[bin] = x[a];
            }
        }
        for (a, b) in bins.iter_mut().enumerate() {
            ifft.process(b);
            b.iter_mut().for_each(|z| *z *= scale);
            out[a].extend_from_slice(&b[n - cp..]);
            out[a].extend_from_slice(b);
        }
    }
    Ok(out)
}

/// Adds group blocks sample by sample. All blocks must have identical shape.
pub fn superpose(blocks: &[Vec<Vec<Complex64>>], sample_rate: f64) -> Result<AntennaFrame> {
    let first = blocks.first().ok_or_else(|| Error::Empty("no group blocks to superpose".into()))?;
    let (m, len) = (first.len(), first.first().map_or(0, Vec::len));
    for (t, b) in blocks.iter().enumerate() {
        if b.len() != m || b.iter().any(|s| s.len() != len) {
            return Err(Error::Length(format!("group {} block does not match {m} streams of {len} samples", t + 1)));
        }
    }
    let mut streams = first.clone();
    for b in &blocks[1..] {
        for (acc, s) in streams.iter_mut().zip(b) {
            acc.iter_mut().zip(s).for_each(|(a, x)| *a += x);
        }
    }
    Ok(AntennaFrame { streams, sample_rate })
}

/// Noise variance per sample for an SNR in dB: the reference signal power is
/// unit total transmit power per subcarrier through a unit-gain-per-antenna
/// channel. `+inf` gives a noiseless link.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Passes `frame` through one user's MISO channel and adds complex white
/// Gaussian noise of variance `noise_variance(snr_db)` drawn from `seed`.
/// Samples before the frame are taken from `previous` (streaming) or are zero.
pub fn apply_channel(
    frame: &AntennaFrame,
    ch: &ChannelRealization,
    snr_db: f64,
    seed: u64,
    previous: Option<&AntennaFrame>,
) -> Result<Vec<Complex64>> {
    if ch.antennas() != frame.antennas() {
        return Err(Error::Dimension(format!("channel has {} antennas, frame {}", ch.antennas(), frame.antennas())));
    }
    if let Some(prev) = previous {
        if prev.antennas() != frame.antennas() || prev.len() != frame.len() {
            return Err(Error::Length("previous frame shape differs".into()));
        }
    }
    let len = frame.len();
    let mut y = vec![Complex64::new(0.0, 0.0); len];
    for (l, &d) in ch.delays().iter().enumerate() {
        if d >= len {
            warn!("tap delay {d} exceeds the frame length {len}");
        }
        for a in 0..frame.antennas() {
            let g = ch.gains()[(l, a)];
            let x = &frame.streams[a];
            for (n, out) in y.iter_mut().enumerate() {
                if n >= d {
                    *out += g * x[n - d];
                } else if let Some(prev) = previous {
                    if let Some(v) = prev.streams[a].get(len + n - d) {
                        *out += g * v;
                    }
                }
            }
        }
    }
    if snr_db.is_finite() {
        let sigma = (noise_variance(snr_db) / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for out in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *out += Complex64::new(re, im) * sigma;
        }
    }
    Ok(y)
}

/// Warns when a channel outlasts the shortest cyclic prefix of the set.
pub fn check_delay_spread(ch: &ChannelRealization, set: &NumerologySet) {
    let min_cp = set.groups().iter().map(|g| g.cp_len).min().unwrap_or(0);
    if ch.max_delay() >= min_cp {
        warn!("tap delay {} samples reaches the shortest cyclic prefix of {min_cp}", ch.max_delay());
    }
}

/// Strips the CP of each of the group's `p` symbols in the time unit and
/// returns the used bins, indexed `[ofdm_symbol][subcarrier]`.
pub fn demodulate_user(y: &[Complex64], layout: &GroupLayout) -> Result<Vec<Vec<Complex64>>> {
    if y.len() != layout.block_len() {
        return Err(Error::Length(format!("received {} samples, time unit is {}", y.len(), layout.block_len())));
    }
    let n = layout.numerology.fft_size;
    let cp = layout.numerology.cp_len;
    let fft = plan(n, false);
    let scale = 1.0 / (n as f64).sqrt();
    Ok(y
        .chunks(n + cp)
        .map(|sym| {
            let mut buf = sym[cp..].to_vec();
            fft.process(&mut buf);
            layout.bins.iter().map(|&b| buf[b] * scale).collect()
        })
        .collect())
}

/// Scalar MMSE estimate `conj(g) y / (|g|^2 + noise_var)`; zero when both vanish.
pub fn equalize(obs: Complex64, g: Complex64, noise_var: f64) -> Complex64 {
    let den = g.norm_sqr() + noise_var;
    if den == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    g.conj() * obs / den
}
