//! MISO tap-delay-line channels from an `M`-element ULA to a single omni
//! receive antenna.
//!
//! Each tap carries an `M`-vector: the array response towards the tap's
//! departure angle, scaled by the tap amplitude and by an independent complex
//! Gaussian per polarization branch. Delays are rounded to the common sample
//! clock so the time-domain channel is an exact FIR filter and its frequency
//! response is exactly `sum_l g_l exp(-i 2 pi f d_l / fs)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform linear array, optionally dual-polarized.
///
/// With `dual_pol` the first `M/2` elements carry the first slant and the last
/// `M/2` the second; both halves sit on the same `M/2` positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub antennas: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_true")]
    pub dual_pol: bool,
    #[serde(default = "default_slants")]
    pub polarization_deg: [f64; 2],
    #[serde(default = "default_boresight")]
    pub boresight_deg: f64,
    /// Power of the second polarization branch relative to the first.
    #[serde(default)]
    pub cross_pol_ratio_db: f64,
}

fn default_spacing() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_slants() -> [f64; 2] {
    [45.0, -45.0]
}
fn default_boresight() -> f64 {
    90.0
}

impl ArrayGeometry {
    /// Dual-polarized ULA at half-wavelength spacing, slants +/-45 degrees.
    pub fn dual_pol(antennas: usize) -> Self {
        ArrayGeometry {
            antennas,
            spacing: 0.5,
            dual_pol: true,
            polarization_deg: default_slants(),
            boresight_deg: 90.0,
            cross_pol_ratio_db: 0.0,
        }
    }

    pub fn single_pol(antennas: usize) -> Self {
        ArrayGeometry { dual_pol: false, ..Self::dual_pol(antennas) }
    }

    pub fn check(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::Geometry("need at least one antenna".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::Geometry(format!("element spacing must be positive, got {}", self.spacing)));
        }
        if self.dual_pol && !self.antennas.is_multiple_of(2) {
            return Err(Error::Geometry(format!("dual-pol array needs an even element count, got {}", self.antennas)));
        }
        if self.dual_pol {
            let [a, b] = self.pol_gains_raw();
            if a.max(b) < 1e-12 {
                return Err(Error::Geometry("both polarization branches have zero gain".into()));
            }
        }
        Ok(())
    }

    /// Distinct element positions along the array axis.
    pub fn positions(&self) -> usize {
        if self.dual_pol {
            self.antennas / 2
        } else {
            self.antennas
        }
    }

    fn pol_gains_raw(&self) -> [f64; 2] {
        let [sa, sb] = self.polarization_deg;
        let xpr = 10f64.powf(-self.cross_pol_ratio_db / 20.0);
        [sa.to_radians().cos().abs(), sb.to_radians().cos().abs() * xpr]
    }

    /// Amplitude of each slant branch as seen by a vertically polarized omni
    /// receiver, scaled so the two branches average to unit power. Equal
    /// slants of +/-45 degrees give `[1, 1]`.
    pub fn pol_gains(&self) -> [f64; 2] {
        if !self.dual_pol {
            return [1.0, 0.0];
        }
        let [a, b] = self.pol_gains_raw();
        let s = (2.0 / (a * a + b * b)).sqrt();
        [a * s, b * s]
    }
}

/// Array response towards azimuth `angle_deg`: element at position `k` gets
/// phase `2 pi * spacing * k * cos(angle)` (angle measured so that the
/// boresight has zero phase progression), times its polarization gain.
pub fn steering_vector(geometry: &ArrayGeometry, angle_deg: f64) -> DVector<Complex64> {
    let rel = (angle_deg - geometry.boresight_deg + 90.0).to_radians();
    let step = 2.0 * PI * geometry.spacing * rel.cos();
    let npos = geometry.positions();
    let gains = geometry.pol_gains();
    DVector::from_fn(geometry.antennas, |m, _| {
        let (pol, k) = (m / npos, m % npos);
        Complex64::from_polar(gains[pol], step * k as f64)
    })
}

/// One path of a power-delay profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tap {
    pub delay_s: f64,
    pub power_db: f64,
    /// Fixed departure offset from the user angle; drawn per realization when absent.
    #[serde(default)]
    pub aod_offset_deg: Option<f64>,
}

/// A power-delay profile normalized to unit total power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TapProfile {
    taps: Vec<Tap>,
    linear: Vec<f64>,
}

impl TapProfile {
    pub fn new(taps: Vec<Tap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Profile("profile has no taps".into()));
        }
        let mut prev = 0.0;
        for (i, t) in taps.iter().enumerate() {
            if !(t.delay_s.is_finite() && t.delay_s >= 0.0) {
                return Err(Error::Profile(format!("tap {i}: negative or non-finite delay {}", t.delay_s)));
            }
            if t.delay_s < prev {
                return Err(Error::Profile(format!("tap {i}: delays must be non-decreasing")));
            }
            if !t.power_db.is_finite() {
                return Err(Error::Profile(format!("tap {i}: non-finite power")));
            }
            prev = t.delay_s;
        }
        let raw: Vec<f64> = taps.iter().map(|t| 10f64.powf(t.power_db / 10.0)).collect();
        let total: f64 = raw.iter().sum();
        let linear = raw.iter().map(|p| p / total).collect();
        Ok(TapProfile { taps, linear })
    }

    /// Exponentially decaying 12-tap profile, "CDL-A-like": 50 ns tap spacing
    /// and 100 ns decay constant. It is a stand-in with a comparable delay
    /// spread, not the standardized CDL-A table.
    pub fn cdl_a_like() -> Self {
        let taps = (0..12)
            .map(|k| {
                let delay_s = k as f64 * 50e-9;
                Tap { delay_s, power_db: -10.0 * std::f64::consts::LOG10_E * delay_s / 100e-9, aod_offset_deg: None }
            })
            .collect();
        Self::new(taps).expect("static profile")
    }

    /// Single tap at zero delay.
    pub fn flat() -> Self {
        Self::new(vec![Tap { delay_s: 0.0, power_db: 0.0, aod_offset_deg: None }]).expect("static profile")
    }

    /// Two equal-power taps, the second at `delay_s`.
    pub fn two_tap(delay_s: f64) -> Self {
        Self::new(vec![
            Tap { delay_s: 0.0, power_db: 0.0, aod_offset_deg: None },
            Tap { delay_s, power_db: 0.0, aod_offset_deg: None },
        ])
        .expect("static profile")
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    /// Linear tap powers, summing to one.
    pub fn linear_powers(&self) -> &[f64] {
        &self.linear
    }

    pub fn max_delay_samples(&self, sample_rate: f64) -> usize {
        self.taps.iter().map(|t| (t.delay_s * sample_rate).round() as usize).max().unwrap_or(0)
    }
}

/// Per-tap fading statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Fading {
    /// Circularly-symmetric unit-variance complex Gaussian per tap and branch.
    #[default]
    Rayleigh,
    /// Unit scalar per tap and no random angle offsets; seed-independent.
    Fixed,
}

/// Everything needed to draw user channels for one scenario.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub profile: TapProfile,
    pub geometry: ArrayGeometry,
    /// Half-width of the uniform AoD spread around the user angle.
    pub angular_spread_deg: f64,
    pub fading: Fading,
    pub sample_rate: f64,
}

/// Tap gains `(taps x M)` and integer sample delays of one user's channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    gains: DMatrix<Complex64>,
    delays: Vec<usize>,
    sample_rate: f64,
    seed: u64,
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

impl ChannelModel {
    pub fn new(profile: TapProfile, geometry: ArrayGeometry, sample_rate: f64) -> Result<Self> {
        geometry.check()?;
        Ok(ChannelModel { profile, geometry, angular_spread_deg: 5.0, fading: Fading::Rayleigh, sample_rate })
    }

    pub fn with_spread(mut self, deg: f64) -> Self {
        self.angular_spread_deg = deg;
        self
    }

    pub fn with_fading(mut self, fading: Fading) -> Self {
        self.fading = fading;
        self
    }

    /// Draws one user's channel. Deterministic in `(model, user_angle_deg, seed)`.
    pub fn realize(&self, user_angle_deg: f64, seed: u64) -> ChannelRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.geometry.antennas;
        let npos = self.geometry.positions();
        let taps = self.profile.taps();
        let mut gains = DMatrix::zeros(taps.len(), m);
        let mut delays = Vec::with_capacity(taps.len());
        for (l, (tap, power)) in taps.iter().zip(self.profile.linear_powers()).enumerate() {
            let offset = match (tap.aod_offset_deg, self.fading) {
                (Some(o), _) => o,
                (None, Fading::Fixed) => 0.0,
                (None, Fading::Rayleigh) if self.angular_spread_deg > 0.0 => {
                    rng.random_range(-self.angular_spread_deg..=self.angular_spread_deg)
                }
                (None, Fading::Rayleigh) => 0.0,
            };
            let a = steering_vector(&self.geometry, user_angle_deg + offset);
            let branches = if self.geometry.dual_pol { 2 } else { 1 };
            let scalars: Vec<Complex64> = (0..branches)
                .map(|_| match self.fading {
                    Fading::Rayleigh => complex_gaussian(&mut rng),
                    Fading::Fixed => Complex64::new(1.0, 0.0),
                })
                .collect();
            let amp = power.sqrt();
            for k in 0..m {
                gains[(l, k)] = a[k] * scalars[k / npos] * amp;
            }
            delays.push((tap.delay_s * self.sample_rate).round() as usize);
        }
        ChannelRealization { gains, delays, sample_rate: self.sample_rate, seed }
    }
}

impl ChannelRealization {
    /// Builds a realization from explicit taps.
    pub fn from_taps(gains: DMatrix<Complex64>, delays: Vec<usize>, sample_rate: f64) -> Result<Self> {
        if gains.nrows() != delays.len() {
            return Err(Error::Dimension(format!("{} tap rows but {} delays", gains.nrows(), delays.len())));
        }
        if gains.nrows() == 0 || gains.ncols() == 0 {
            return Err(Error::Profile("realization needs at least one tap and antenna".into()));
        }
        Ok(ChannelRealization { gains, delays, sample_rate, seed: 0 })
    }

    /// Zero-delay unit gain from every antenna: the received sample is the sum
    /// of the antenna samples.
    pub fn identity(antennas: usize, sample_rate: f64) -> Self {
        ChannelRealization {
            gains: DMatrix::from_element(1, antennas, Complex64::new(1.0, 0.0)),
            delays: vec![0],
            sample_rate,
            seed: 0,
        }
    }

    pub fn gains(&self) -> &DMatrix<Complex64> {
        &self.gains
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn antennas(&self) -> usize {
        self.gains.ncols()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_delay(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }

    /// Channel row vector at every frequency of `grid`: an `(len x M)` matrix
    /// whose row `j` is `sum_l g_l exp(-i 2 pi f_j d_l / fs)`.
    pub fn frequency_response(&self, grid: &[f64]) -> Result<DMatrix<Complex64>> {
        let nyq = self.sample_rate / 2.0;
        if let Some(&f) = grid.iter().find(|f| f.abs() > nyq || !f.is_finite()) {
            return Err(Error::Band { freq_hz: f, nyquist_hz: nyq });
        }
        let m = self.antennas();
        let mut out = DMatrix::zeros(grid.len(), m);
        for (j, &f) in grid.iter().enumerate() {
            for (l, &d) in self.delays.iter().enumerate() {
                let rot = Complex64::from_polar(1.0, -2.0 * PI * f * d as f64 / self.sample_rate);
                for k in 0..m {
                    out[(j, k)] += self.gains[(l, k)] * rot;
                }
            }
        }
        Ok(out)
    }
}
