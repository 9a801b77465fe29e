//! Cross-module oracle suite run by the `selfcheck` subcommand.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::channel::{ArrayGeometry, ChannelModel, ChannelRealization, TapProfile};
use crate::error::{Error, Result};
use crate::numerology::{reference_pair, validate_numerology_set};
use crate::phy::{
    apply_channel, demodulate_user, modulate_group, qam_map, superpose, AntennaFrame, Constellation, GroupLayout,
    GroupPayload,
};
use crate::precoding::{
    build_precoder_set, cb_precoder, slnr_precoder, GroupChannels, GroupPrecoders, Method, SubbandPrecoder,
};
use crate::resample::{resample_columns, ResampleSpec};

/// A named check returning whether it passed and a one-line detail.
#[derive(Clone, Copy)]
pub struct Check {
    pub name: &'static str,
    pub run: fn() -> Result<(bool, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfcheckReport {
    pub results: Vec<CheckResult>,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

fn single_group(used: usize) -> Result<(crate::numerology::NumerologySet, GroupLayout)> {
    let n = reference_pair()[1];
    let set = validate_numerology_set(&[n], true)?;
    let anchor = set.centered_anchor(used);
    let set = set.with_anchor(anchor)?;
    let layout = GroupLayout::new(&set, 0, used)?;
    Ok((set, layout))
}

fn loopback() -> Result<(bool, String)> {
    let used = 600;
    let (_, layout) = single_group(used)?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let syms = qam_map(&random_bits(&mut rng, used * 4), Constellation::Qam16)?;
    let prec = GroupPrecoders {
        subband_size: used,
        subbands: vec![SubbandPrecoder { range: 0..used, matrix: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)) }],
    };
    let tx = modulate_group(&GroupPayload { symbols: vec![vec![syms.clone()]] }, &prec, &layout, 1)?;
    let rx = demodulate_user(&tx[0], &layout)?;
    let err = rx[0].iter().zip(&syms).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok((err <= 1e-10, format!("max error {err:.3e}")))
}

fn frequency_domain_equivalence() -> Result<(bool, String)> {
    let (used, m) = (240, 4);
    let (set, layout) = single_group(used)?;
    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let mut delays: Vec<usize> = (0..5).map(|_| rng.random_range(0..=set.group(0).cp_len)).collect();
        delays.sort_unstable();
        let gains = DMatrix::from_fn(5, m, |_, _| cgauss(&mut rng));
        let ch = ChannelRealization::from_taps(gains, delays, set.sample_rate())?;
        let precoder = DMatrix::from_fn(m, 2, |_, _| cgauss(&mut rng));
        let prec = GroupPrecoders { subband_size: 48, subbands: (0..used).step_by(48).map(|s| SubbandPrecoder { range: s..s + 48, matrix: precoder.clone() }).collect() };
        let s: Vec<Vec<Complex64>> = (0..2).map(|_| (0..used).map(|_| cgauss(&mut rng)).collect()).collect();
        let payload = GroupPayload { symbols: s.iter().map(|u| vec![u.clone()]).collect() };
        let frame = superpose(&[modulate_group(&payload, &prec, &layout, m)?], set.sample_rate())?;
        let y = apply_channel(&frame, &ch, f64::INFINITY, 0, None)?;
        let obs = demodulate_user(&y, &layout)?;
        let h = ch.frequency_response(&layout.grid)?;
        for j in 0..used {
            let x = &precoder * DVector::from_vec(vec![s[0][j], s[1][j]]);
            let want = (h.row(j) * x)[0];
            worst = worst.max((obs[0][j] - want).norm());
        }
    }
    Ok((worst <= 1e-9, format!("max error {worst:.3e}")))
}

fn resampler_fidelity() -> Result<(bool, String)> {
    let [n1, n2] = reference_pair();
    let set = validate_numerology_set(&[n1, n2], true)?;
    let anchor = set.centered_anchor(1152);
    let set = set.with_anchor(anchor)?;
    let model = ChannelModel::new(TapProfile::cdl_a_like(), ArrayGeometry::dual_pol(8), set.sample_rate())?;
    let ch = model.realize(45.0, 7);
    let fine = ch.frequency_response(&set.group_grid(0, 1152)?)?;
    let coarse = ch.frequency_response(&set.group_grid(1, 576)?)?;
    let up = resample_columns(&coarse, &ResampleSpec::ratio(2, 1)?)?;
    let rms = |m: &DMatrix<Complex64>| (m.norm_squared() / m.len() as f64).sqrt();
    let rel = rms(&(up - &fine)) / rms(&fine);
    let down = resample_columns(&fine, &ResampleSpec::ratio(1, 2)?)?;
    let dec = (down - coarse).camax();
    Ok((rel <= 0.01 && dec <= 1e-12, format!("interpolation rms {:.3}%, decimation max {dec:.1e}", 100.0 * rel)))
}

fn slnr_reductions() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let h = DVector::from_fn(8, |_, _| cgauss(&mut rng));
    let stacked = DMatrix::from_fn(1, 8, |_, c| h[c]);
    let s = slnr_precoder(&h, &stacked, 0.3)?;
    let c = cb_precoder(&h)?;
    // atan2 of the residual stays accurate near zero, where acos does not
    let along = c.dotc(&s);
    let angle = (&s - &c * along).norm().atan2(along.norm());
    let h1 = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let h2 = DVector::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)]);
    let stacked = DMatrix::from_fn(2, 2, |r, c| if r == 0 { h1[c] } else { h2[c] });
    let p1 = slnr_precoder(&h1, &stacked, 1e-12)?;
    let leak = (h2.transpose() * &p1)[0].norm_sqr();
    Ok((angle <= 1e-9 && leak <= 1e-18, format!("K=1 angle {angle:.1e} rad, orthogonal leakage {leak:.1e}")))
}

fn cross_numerology_interference() -> Result<(bool, String)> {
    let [n1, n2] = reference_pair();
    let set = validate_numerology_set(&[n1, n2], true)?.with_anchor(-96.0 * 15e3)?;
    let layouts = [GroupLayout::new(&set, 0, 192)?, GroupLayout::new(&set, 1, 96)?];
    let m = 2;
    let model = ChannelModel::new(TapProfile::flat(), ArrayGeometry::dual_pol(m), set.sample_rate())?;
    let chans = [model.realize(135.0, 1), model.realize(45.0, 2)];
    let groups: Vec<GroupChannels> = (0..2)
        .map(|t| Ok(GroupChannels { scs_hz: set.group(t).scs_hz, users: vec![chans[t].frequency_response(&layouts[t].grid)?] }))
        .collect::<Result<_>>()?;
    let prec = build_precoder_set(&groups, Method::Cb, 1e-3, 48, 33)?;
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let zero = |l: &GroupLayout| vec![vec![Complex64::new(0.0, 0.0); l.used()]; l.p];
    let data = |l: &GroupLayout, rng: &mut ChaCha8Rng| -> Vec<Vec<Complex64>> {
        (0..l.p).map(|_| (0..l.used()).map(|_| cgauss(rng)).collect()).collect()
    };
    // user 1 hears only group 2's payload: anything it demodulates is interference
    let blocks = vec![
        modulate_group(&GroupPayload { symbols: vec![zero(&layouts[0])] }, &prec.groups[0], &layouts[0], m)?,
        modulate_group(&GroupPayload { symbols: vec![data(&layouts[1], &mut rng)] }, &prec.groups[1], &layouts[1], m)?,
    ];
    let frame: AntennaFrame = superpose(&blocks, set.sample_rate())?;
    let y = apply_channel(&frame, &chans[0], f64::INFINITY, 0, None)?;
    let obs = demodulate_user(&y, &layouts[0])?;
    let power = obs[0].iter().map(|z| z.norm_sqr()).sum::<f64>() / obs[0].len() as f64;
    Ok((power > 0.0, format!("interference power {power:.3e} per subcarrier")))
}

fn injected_failure() -> Result<(bool, String)> {
    Ok((false, "failure injected on request".into()))
}

pub fn default_checks() -> Vec<Check> {
    vec![
        Check { name: "loopback", run: loopback },
        Check { name: "frequency-domain-equivalence", run: frequency_domain_equivalence },
        Check { name: "resampler-fidelity", run: resampler_fidelity },
        Check { name: "slnr-reductions", run: slnr_reductions },
        Check { name: "cross-numerology-interference", run: cross_numerology_interference },
    ]
}

/// Runs `checks` in order. A check that errors counts as failed.
pub fn run_checks(checks: &[Check]) -> Result<SelfcheckReport> {
    if checks.is_empty() {
        return Err(Error::Empty("selfcheck suite has no checks".into()));
    }
    let results = checks
        .iter()
        .map(|c| {
            let (passed, detail) = (c.run)().unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckResult { name: c.name.to_string(), passed, detail }
        })
        .collect();
    Ok(SelfcheckReport { results })
}

/// The default suite, plus a deliberately failing check when `inject_failure`.
pub fn run_selfcheck(inject_failure: bool) -> Result<SelfcheckReport> {
    let mut checks = default_checks();
    if inject_failure {
        checks.push(Check { name: "injected-failure", run: injected_failure });
    }
    run_checks(&checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let r = run_selfcheck(false).unwrap();
        assert!(r.passed(), "{r:#?}");
        assert_eq!(r.results.len(), 5);
    }

    #[test]
    fn injected_failure_fails_the_suite() {
        let r = run_selfcheck(true).unwrap();
        assert!(!r.passed());
        assert!(!r.results.last().unwrap().passed);
    }

    #[test]
    fn empty_suite_is_an_error() {
        assert!(matches!(run_checks(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn erroring_check_counts_as_failure() {
        let r = run_checks(&[Check { name: "boom", run: || Err(Error::ZeroChannel) }]).unwrap();
        assert!(!r.passed());
        assert!(r.results[0].detail.starts_with("error"));
    }
}
