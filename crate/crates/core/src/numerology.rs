//! OFDM numerologies and the symbol-alignment rules that let several of them
//! share one time unit.
//!
//! A set of `T` numerologies is sorted by increasing subcarrier spacing. Group 1
//! (index 0 here) has the longest symbol, `N_1 + L_1` samples, which defines the
//! time unit. Every other group `t` fits exactly `p_t` symbols into it:
//! `p_t * (N_t + L_t) = N_1 + L_1`. In strict mode the FFT sizes must also nest,
//! `p_t * N_t = N_1`, so every coarse grid is a decimation of the finest one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One OFDM waveform variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerology {
    pub scs_hz: f64,
    pub fft_size: usize,
    pub cp_len: usize,
    pub symbols_per_subframe: usize,
}

impl Numerology {
    pub fn new(scs_hz: f64, fft_size: usize, cp_len: usize, symbols_per_subframe: usize) -> Result<Self> {
        let n = Numerology { scs_hz, fft_size, cp_len, symbols_per_subframe };
        n.check()?;
        Ok(n)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.scs_hz.is_finite() && self.scs_hz > 0.0) {
            return Err(Error::Numerology(format!("subcarrier spacing must be positive, got {}", self.scs_hz)));
        }
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(Error::Numerology(format!("fft size must be a power of two >= 2, got {}", self.fft_size)));
        }
        if self.cp_len >= self.fft_size {
            return Err(Error::Numerology(format!(
                "cp length {} must be shorter than the fft size {}",
                self.cp_len, self.fft_size
            )));
        }
        Ok(())
    }

    /// Samples in one OFDM symbol including its cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn sample_rate(&self) -> f64 {
        self.scs_hz * self.fft_size as f64
    }

    /// Subframe duration derived from the sample counts, not a nominal value.
    pub fn subframe_duration_s(&self) -> f64 {
        (self.symbols_per_subframe * self.symbol_len()) as f64 / self.sample_rate()
    }
}

/// A validated, sorted collection of numerologies sharing one sample clock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumerologySet {
    groups: Vec<Numerology>,
    p_factors: Vec<usize>,
    strict: bool,
    anchor_hz: f64,
}

fn rates_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Sorts `groups` by increasing subcarrier spacing and derives the integer
/// symbol-packing factors `p_t`.
pub fn validate_numerology_set(groups: &[Numerology], strict: bool) -> Result<NumerologySet> {
    if groups.is_empty() {
        return Err(Error::Empty("numerology set needs at least one group".into()));
    }
    for g in groups {
        g.check()?;
    }
    let mut sorted = groups.to_vec();
    // Ties on spacing are broken by size so any input permutation sorts identically.
    sorted.sort_by(|a, b| {
        a.scs_hz
            .total_cmp(&b.scs_hz)
            .then(b.fft_size.cmp(&a.fft_size))
            .then(b.cp_len.cmp(&a.cp_len))
            .then(a.symbols_per_subframe.cmp(&b.symbols_per_subframe))
    });

    let first = sorted[0];
    let unit = first.symbol_len();
    let rate = first.sample_rate();
    let mut p_factors = Vec::with_capacity(sorted.len());
    for (t, g) in sorted.iter().enumerate() {
        let len = g.symbol_len();
        if !unit.is_multiple_of(len) {
            return Err(Error::Alignment(format!(
                "group {} symbol of {} samples does not divide the time unit of {} samples",
                t + 1,
                len,
                unit
            )));
        }
        let p = unit / len;
        if !rates_match(g.sample_rate(), rate) {
            return Err(Error::Rate(format!(
                "group {} runs at {} Hz, group 1 at {} Hz",
                t + 1,
                g.sample_rate(),
                rate
            )));
        }
        if strict && p * g.fft_size != first.fft_size {
            return Err(Error::Alignment(format!(
                "strict mode: p_{} * N_{} = {} differs from N_1 = {}",
                t + 1,
                t + 1,
                p * g.fft_size,
                first.fft_size
            )));
        }
        p_factors.push(p);
    }
    Ok(NumerologySet { groups: sorted, p_factors, strict, anchor_hz: 0.0 })
}

impl NumerologySet {
    pub fn groups(&self) -> &[Numerology] {
        &self.groups
    }

    pub fn group(&self, t: usize) -> &Numerology {
        &self.groups[t]
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn p_factors(&self) -> &[usize] {
        &self.p_factors
    }

    pub fn p(&self, t: usize) -> usize {
        self.p_factors[t]
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// `N_1 + L_1`: the length of the longest symbol.
    pub fn time_unit_samples(&self) -> usize {
        self.groups[0].symbol_len()
    }

    /// The shared DAC rate, `scs_1 * N_1`.
    pub fn sample_rate(&self) -> f64 {
        self.groups[0].sample_rate()
    }

    pub fn anchor_hz(&self) -> f64 {
        self.anchor_hz
    }

    /// Places the lowest-indexed subcarrier of every group at `anchor_hz`.
    /// The anchor must sit on every group's FFT bin raster.
    pub fn with_anchor(mut self, anchor_hz: f64) -> Result<Self> {
        for (t, g) in self.groups.iter().enumerate() {
            let bins = anchor_hz / g.scs_hz;
            if !anchor_hz.is_finite() || (bins - bins.round()).abs() > 1e-9 {
                return Err(Error::Grid(format!(
                    "anchor {anchor_hz} Hz is not on the {} Hz raster of group {}",
                    g.scs_hz,
                    t + 1
                )));
            }
        }
        self.anchor_hz = anchor_hz;
        Ok(self)
    }

    /// Anchor that centres `used_first` group-1 subcarriers on DC.
    pub fn centered_anchor(&self, used_first: usize) -> f64 {
        -((used_first / 2) as f64) * self.groups[0].scs_hz
    }

    /// Absolute frequencies of the first `used` subcarriers of `n`, starting at
    /// the shared anchor.
    pub fn subcarrier_grid(&self, n: &Numerology, used: usize) -> Result<Vec<f64>> {
        subcarrier_grid(n, used, self.anchor_hz)
    }

    /// Grid of group `t`.
    pub fn group_grid(&self, t: usize, used: usize) -> Result<Vec<f64>> {
        self.subcarrier_grid(&self.groups[t], used)
    }
}

/// Frequencies `anchor + j * scs` for `j` in `0..used`.
pub fn subcarrier_grid(n: &Numerology, used: usize, anchor_hz: f64) -> Result<Vec<f64>> {
    if used > n.fft_size {
        return Err(Error::Count(format!("{used} used subcarriers exceed fft size {}", n.fft_size)));
    }
    Ok((0..used).map(|j| anchor_hz + j as f64 * n.scs_hz).collect())
}

/// FFT bin (in `0..fft_size`) carrying frequency `freq_hz` for numerology `n`.
pub fn bin_index(n: &Numerology, freq_hz: f64) -> Result<usize> {
    let k = (freq_hz / n.scs_hz).round();
    let half = (n.fft_size / 2) as f64;
    if k < -half || k >= half {
        return Err(Error::Band { freq_hz, nyquist_hz: n.sample_rate() / 2.0 });
    }
    Ok((k as i64).rem_euclid(n.fft_size as i64) as usize)
}

/// The two numerologies of the reference two-user setup: 15 kHz / 2048 / 424
/// and 30 kHz / 1024 / 212, 14 symbols per subframe each.
pub fn reference_pair() -> [Numerology; 2] {
    [
        Numerology { scs_hz: 15e3, fft_size: 2048, cp_len: 424, symbols_per_subframe: 14 },
        Numerology { scs_hz: 30e3, fft_size: 1024, cp_len: 212, symbols_per_subframe: 14 },
    ]
}
