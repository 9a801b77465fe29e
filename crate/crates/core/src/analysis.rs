//! EVM, MU SINR and SU/MU capacity with dynamic switching.
//!
//! `snr` arguments are linear. Precoder columns are expected to carry the
//! unit-total-power normalization already (norm `1/sqrt(K)` each), while the
//! SU capacity assumes the whole unit power goes to one user.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Floor for the dB form of a zero EVM.
pub const EVM_FLOOR_DB: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evm {
    pub percent: f64,
    pub db: f64,
}

impl Evm {
    fn from_ratio(r: f64) -> Self {
        let db = if r > 0.0 { (20.0 * r.log10()).max(EVM_FLOOR_DB) } else { EVM_FLOOR_DB };
        Evm { percent: 100.0 * r, db }
    }
}

/// `RMS(received - ideal) / RMS(ideal)`.
pub fn evm(received: &[Complex64], ideal: &[Complex64]) -> Result<Evm> {
    if received.len() != ideal.len() {
        return Err(Error::Length(format!("{} received vs {} ideal symbols", received.len(), ideal.len())));
    }
    if ideal.is_empty() {
        return Err(Error::Empty("no symbols for EVM".into()));
    }
    let err: f64 = received.iter().zip(ideal).map(|(r, i)| (r - i).norm_sqr()).sum();
    let reference: f64 = ideal.iter().map(|z| z.norm_sqr()).sum();
    if reference == 0.0 {
        return Err(Error::Parameter("ideal symbols have zero power".into()));
    }
    Ok(Evm::from_ratio((err / reference).sqrt()))
}

/// `SINR_k = snr |h_k p_k|^2 / (1 + snr sum_{m != k} |h_k p_m|^2)` for channel
/// rows `h` (`K x M`) and precoder columns `p` (`M x K`).
pub fn mu_sinr(h: &DMatrix<Complex64>, p: &DMatrix<Complex64>, snr: f64) -> Result<Vec<f64>> {
    if h.ncols() != p.nrows() || h.nrows() != p.ncols() {
        return Err(Error::Dimension(format!(
            "channels {}x{} do not match precoders {}x{}",
            h.nrows(),
            h.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    let g = h * p;
    Ok(sinr_from_gains(&g.map(|z| z.norm_sqr()), snr))
}

/// SINRs from a `K x K` matrix of received powers, `power[(k, m)]` being the
/// power user `k` collects from stream `m`.
pub fn sinr_from_gains(power: &DMatrix<f64>, snr: f64) -> Vec<f64> {
    (0..power.nrows())
        .map(|k| {
            let interference: f64 = (0..power.ncols()).filter(|&m| m != k).map(|m| power[(k, m)]).sum();
            snr * power[(k, k)] / (1.0 + snr * interference)
        })
        .collect()
}

/// Subband-averaged received power matrix: entry `(k, m)` is the mean over
/// subcarriers `j` of `|h_k(j) p_m(j)|^2`. `channels[k]` is `(J x M)` and
/// `precoders[m][j]` the column stream `m` uses on subcarrier `j`.
pub fn subband_gains(channels: &[DMatrix<Complex64>], precoders: &[Vec<DVector<Complex64>>]) -> Result<DMatrix<f64>> {
    let k = channels.len();
    if precoders.len() != k {
        return Err(Error::Dimension(format!("{k} users but {} precoder streams", precoders.len())));
    }
    let j = channels.first().map_or(0, DMatrix::nrows);
    if j == 0 {
        return Err(Error::Empty("subband has no subcarriers".into()));
    }
    if channels.iter().any(|h| h.nrows() != j) || precoders.iter().any(|p| p.len() != j) {
        return Err(Error::Length("channels and precoders must cover the same subcarriers".into()));
    }
    let mut out = DMatrix::zeros(k, k);
    for (a, h) in channels.iter().enumerate() {
        for (b, p) in precoders.iter().enumerate() {
            let s: f64 = (0..j).map(|i| (h.row(i) * &p[i])[0].norm_sqr()).sum();
            out[(a, b)] = s / j as f64;
        }
    }
    Ok(out)
}

/// `max_k log2(1 + snr |h_k|^2)`; zero for no users.
pub fn capacity_su(h: &[DVector<Complex64>], snr: f64) -> f64 {
    h.iter().map(|v| (1.0 + snr * v.norm_squared()).log2()).fold(0.0, f64::max)
}

/// `sum_k log2(1 + SINR_k)`.
pub fn capacity_mu(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|s| (1.0 + s.max(0.0)).log2()).sum()
}

/// Mean over subbands of `max(C_SU, C_MU)`.
pub fn capacity_switched(per_subband: &[(f64, f64)]) -> Result<f64> {
    if per_subband.is_empty() {
        return Err(Error::Empty("no subbands to average".into()));
    }
    Ok(per_subband.iter().map(|&(su, mu)| su.max(mu)).sum::<f64>() / per_subband.len() as f64)
}

/// EVM of one user's symbols at one position within the time unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserEvm {
    pub user: usize,
    pub group: usize,
    pub symbol: usize,
    pub evm: Evm,
}

/// Everything measured for one drop, method, antenna count and SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub scenario: String,
    pub drop: usize,
    pub seed: u64,
    pub antennas: usize,
    pub method: String,
    pub snr_db: f64,
    pub evm: Vec<UserEvm>,
    /// EVM over every user and symbol of the drop.
    pub evm_total: Option<Evm>,
    /// `[subband][user]`, dB.
    pub sb_sinr_db: Vec<Vec<f64>>,
    pub c_su: Option<f64>,
    pub c_mu: Option<f64>,
    pub c: Option<f64>,
}

impl MetricRecord {
    pub fn new(scenario: &str, drop: usize, seed: u64, antennas: usize, method: &str, snr_db: f64) -> Self {
        MetricRecord {
            scenario: scenario.to_string(),
            drop,
            seed,
            antennas,
            method: method.to_string(),
            snr_db,
            evm: Vec::new(),
            evm_total: None,
            sb_sinr_db: Vec::new(),
            c_su: None,
            c_mu: None,
            c: None,
        }
    }
}

/// Scalar extracted from a record for aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    EvmPercent,
    EvmDb,
    CapacitySu,
    CapacityMu,
    Capacity,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::EvmPercent => "evm_pct",
            Metric::EvmDb => "evm_db",
            Metric::CapacitySu => "c_su",
            Metric::CapacityMu => "c_mu",
            Metric::Capacity => "c",
        }
    }

    fn get(&self, r: &MetricRecord) -> Option<f64> {
        match self {
            Metric::EvmPercent => r.evm_total.map(|e| e.percent),
            Metric::EvmDb => r.evm_total.map(|e| e.db),
            Metric::CapacitySu => r.c_su,
            Metric::CapacityMu => r.c_mu,
            Metric::Capacity => r.c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub antennas: usize,
    pub method: String,
    pub snr_db: f64,
    pub metric: &'static str,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
}

pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("no values to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("no values for a median".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Mean, std and median of `metric` over drops, one row per
/// `(scenario, antennas, method, snr)` in that sort order. Records lacking the
/// metric are skipped.
pub fn aggregate(records: &[MetricRecord], metric: Metric) -> Result<Vec<SummaryRow>> {
    type Key = (String, usize, String, u64);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if let Some(v) = metric.get(r) {
            // order-preserving bit pattern so negative SNRs sort first
            let bits = r.snr_db.to_bits();
            let ord = if r.snr_db.is_sign_negative() { !bits } else { bits | (1 << 63) };
            groups
                .entry((r.scenario.clone(), r.antennas, r.method.clone(), ord))
                .or_insert_with(|| (r.snr_db, Vec::new()))
                .1
                .push(v);
        }
    }
    if groups.is_empty() {
        return Err(Error::Empty(format!("no records carry {}", metric.name())));
    }
    groups
        .into_iter()
        .map(|((scenario, antennas, method, _), (snr_db, values))| {
            let (mean, std) = mean_std(&values)?;
            Ok(SummaryRow {
                scenario,
                antennas,
                method,
                snr_db,
                metric: metric.name(),
                count: values.len(),
                mean,
                std,
                median: median(&values)?,
            })
        })
        .collect()
}

/// SNR (dB) at which a capacity curve first reaches `target`, by linear
/// interpolation between sweep points. `None` when the curve never gets there.
pub fn snr_at_capacity(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    if let Some(&(s, c)) = curve.first() {
        if c >= target {
            return (c == target).then_some(s);
        }
    }
    curve.windows(2).find_map(|w| {
        let ((s0, c0), (s1, c1)) = (w[0], w[1]);
        (c0 < target && c1 >= target).then(|| s0 + (target - c0) / (c1 - c0) * (s1 - s0))
    })
}

/// SNR saved by `curve` relative to `reference` at capacity `target`, in dB.
pub fn snr_gain_db(reference: &[(f64, f64)], curve: &[(f64, f64)], target: f64) -> Option<f64> {
    Some(snr_at_capacity(reference, target)? - snr_at_capacity(curve, target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evm_definitions() {
        let ideal = vec![c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0)];
        let e = evm(&ideal, &ideal).unwrap();
        assert_eq!(e.percent, 0.0);
        assert_eq!(e.db, EVM_FLOOR_DB);
        let shifted: Vec<_> = ideal.iter().map(|z| z + c(0.0, 0.1)).collect();
        let e = evm(&shifted, &ideal).unwrap();
        assert_abs_diff_eq!(e.percent, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.db, -20.0, epsilon = 1e-12);
        assert!(matches!(evm(&ideal[..2], &ideal), Err(Error::Length(_))));
        assert!(matches!(evm(&[], &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn sinr_equal_channels_saturate_at_unity() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.5), c(1.0, 0.0), c(0.5, 0.5)]);
        let row = h.row(0).transpose();
        let p = row.conjugate() / Complex64::new(row.norm() * 2f64.sqrt(), 0.0);
        let pm = DMatrix::from_columns(&[p.clone(), p]);
        let s = mu_sinr(&h, &pm, 1e12).unwrap();
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn sinr_orthogonal_channels_have_no_interference() {
        let h = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)]);
        let p = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)]);
        assert_eq!(mu_sinr(&h, &p, 10.0).unwrap(), vec![40.0, 10.0]);
        assert!(mu_sinr(&h, &p.columns(0, 1).into_owned(), 1.0).is_err());
    }

    #[test]
    fn subband_gains_reduce_to_products_for_constant_precoders() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.0), c(1.0, 0.0)]);
        let p = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let q = DVector::from_vec(vec![c(0.0, 1.0), c(1.0, 0.0)]);
        let g = subband_gains(std::slice::from_ref(&h), &[vec![p.clone(), p.clone()]]).unwrap();
        let want = ((h.row(0) * &p)[0].norm_sqr() + (h.row(1) * &p)[0].norm_sqr()) / 2.0;
        assert_abs_diff_eq!(g[(0, 0)], want, epsilon = 1e-15);
        assert!(subband_gains(std::slice::from_ref(&h), &[vec![p, q]]).is_ok());
        assert!(subband_gains(&[h], &[]).is_err());
    }

    #[test]
    fn capacities() {
        assert_eq!(capacity_su(&[DVector::zeros(3)], 10.0), 0.0);
        let e1 = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_abs_diff_eq!(capacity_su(std::slice::from_ref(&e1), 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(capacity_su(&[e1.clone() * c(0.5, 0.0), e1], 3.0), 2.0, epsilon = 1e-15);
        assert_eq!(capacity_mu(&[1.0, 1.0]), 2.0);
        assert_eq!(capacity_mu(&[0.0, 0.0]), 0.0);
        assert_eq!(capacity_mu(&[3.0, 1.0]), 3.0);
        assert_eq!(capacity_switched(&[(2.0, 1.0), (1.0, 3.0)]).unwrap(), 2.5);
        assert_eq!(capacity_switched(&[(2.0, 1.0), (3.0, 1.0)]).unwrap(), 2.5);
        assert!(capacity_switched(&[]).is_err());
    }

    fn record(method: &str, snr: f64, c: f64) -> MetricRecord {
        let mut r = MetricRecord::new("s", 0, 0, 2, method, snr);
        r.c = Some(c);
        r
    }

    #[test]
    fn aggregate_statistics_and_order() {
        let recs = vec![record("SLNR", 5.0, 1.0), record("CB", 5.0, 4.0), record("CB", -5.0, 3.0), record("CB", 5.0, 2.0)];
        let rows = aggregate(&recs, Metric::Capacity).unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.method.as_str(), r.snr_db)).collect();
        assert_eq!(keys, vec![("CB", -5.0), ("CB", 5.0), ("SLNR", 5.0)]);
        assert_eq!((rows[1].mean, rows[1].std, rows[1].count), (3.0, 1.0, 2));
        assert_eq!((rows[0].mean, rows[0].std), (3.0, 0.0));
        assert!(matches!(aggregate(&recs, Metric::EvmDb), Err(Error::Empty(_))));
        assert!(aggregate(&[], Metric::Capacity).is_err());
    }

    #[test]
    fn median_and_mean_identities() {
        assert_eq!(mean_std(&[2.0; 5]).unwrap(), (2.0, 0.0));
        assert_eq!(mean_std(&[1.0, 3.0]).unwrap(), (2.0, 1.0));
        assert!(mean_std(&[]).is_err());
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
    }

    #[test]
    fn snr_interpolation() {
        let su = vec![(0.0, 1.0), (10.0, 3.0), (20.0, 5.0)];
        let mu = vec![(0.0, 2.0), (10.0, 5.0), (20.0, 8.0)];
        assert_eq!(snr_at_capacity(&su, 4.0), Some(15.0));
        assert_eq!(snr_at_capacity(&su, 9.0), None);
        assert_eq!(snr_at_capacity(&su, 1.0), Some(0.0));
        assert_eq!(snr_at_capacity(&su, 0.5), None);
        assert_eq!(snr_gain_db(&su, &mu, 5.0), Some(10.0));
    }
}
