//! Per-drop experiment kernels and the drop-parallel drivers around them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    capacity_mu, capacity_su, capacity_switched, evm, mean_std, median, sinr_from_gains, snr_gain_db, subband_gains,
    MetricRecord, UserEvm,
};
use crate::channel::{ChannelModel, ChannelRealization};
use crate::error::{Error, Result};
use crate::phy::{
    apply_channel, demodulate_user, equalize, modulate_group, noise_variance, qam_map, superpose, AntennaFrame,
    GroupPayload,
};
use crate::precoding::{
    effective_channels, precoders_from_effective, sb_effective_channel, subband_ranges, EffectiveChannels,
    GroupChannels, Method, PrecoderSet,
};
use crate::sim::config::Scenario;
use crate::sim::seed::{split, stream_seed, Stream};

/// Channels of every user for one drop and array size.
#[derive(Debug, Clone)]
pub struct DropChannels {
    pub seed: u64,
    /// Stacking order: group, then user.
    pub realizations: Vec<ChannelRealization>,
    /// Responses on each group's own grid.
    pub groups: Vec<GroupChannels>,
}

pub fn drop_seed(sc: &Scenario, drop: usize) -> u64 {
    split(sc.config.seed, drop as u64)
}

pub fn channel_model(sc: &Scenario, antennas: usize) -> Result<ChannelModel> {
    Ok(ChannelModel::new(sc.profile.clone(), sc.config.array.geometry(antennas), sc.set.sample_rate())?
        .with_spread(sc.config.channel.angular_spread_deg)
        .with_fading(sc.config.channel.fading))
}

pub fn drop_channels(sc: &Scenario, antennas: usize, drop: usize) -> Result<DropChannels> {
    let seed = drop_seed(sc, drop);
    let model = channel_model(sc, antennas)?;
    let realizations: Vec<ChannelRealization> = sc
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| model.realize(u.angle_deg, stream_seed(seed, Stream::Channel, i as u64)))
        .collect();
    let mut groups: Vec<GroupChannels> =
        sc.set.groups().iter().map(|g| GroupChannels { scs_hz: g.scs_hz, users: Vec::new() }).collect();
    for (u, ch) in sc.users.iter().zip(&realizations) {
        groups[u.group].users.push(ch.frequency_response(&sc.layouts[u.group].grid)?);
    }
    Ok(DropChannels { seed, realizations, groups })
}

/// Random QAM payload of every user, `[user][symbol][subcarrier]`.
fn payload(sc: &Scenario, seed: u64, stream: Stream) -> Result<Vec<Vec<Vec<Complex64>>>> {
    let bps = sc.config.modulation.bits_per_symbol();
    sc.users
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let layout = &sc.layouts[u.group];
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, stream, i as u64));
            (0..layout.p)
                .map(|_| {
                    let bits: Vec<u8> = (0..layout.used() * bps).map(|_| rng.random_range(0..2u8)).collect();
                    qam_map(&bits, sc.config.modulation)
                })
                .collect()
        })
        .collect()
}

fn transmit(sc: &Scenario, prec: &PrecoderSet, symbols: &[Vec<Vec<Complex64>>], antennas: usize) -> Result<AntennaFrame> {
    let blocks = (0..sc.set.len())
        .map(|t| {
            let payload = GroupPayload {
                symbols: sc.users.iter().zip(symbols).filter(|(u, _)| u.group == t).map(|(_, s)| s.clone()).collect(),
            };
            modulate_group(&payload, &prec.groups[t], &sc.layouts[t], antennas)
        })
        .collect::<Result<Vec<_>>>()?;
    superpose(&blocks, sc.set.sample_rate())
}

/// One equalized symbol with its reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstellationPoint {
    pub re: f64,
    pub im: f64,
    pub ideal_re: f64,
    pub ideal_im: f64,
    pub user: usize,
    pub symbol_idx: usize,
    pub antennas: usize,
    pub method: Method,
    pub drop: usize,
    pub subcarrier: usize,
}

/// Result of the full transmit/receive chain for one drop and method.
#[derive(Debug, Clone)]
pub struct EvmDrop {
    pub record: MetricRecord,
    pub points: Vec<ConstellationPoint>,
    pub frame: AntennaFrame,
}

/// Runs every method of `methods` through the time-domain chain on the same
/// channels, payload and noise.
pub fn evm_drop(sc: &Scenario, antennas: usize, drop: usize, methods: &[Method], snr_db: f64, keep_points: bool) -> Result<Vec<EvmDrop>> {
    if !snr_db.is_finite() {
        return Err(Error::Parameter(format!("EVM runs need a finite SNR, got {snr_db}")));
    }
    let dc = drop_channels(sc, antennas, drop)?;
    let eff = effective_channels(&dc.groups, sc.config.subband_size, sc.config.filter_len)?;
    let symbols = payload(sc, dc.seed, Stream::Payload)?;
    let previous = if sc.config.evm.streaming { Some(payload(sc, dc.seed, Stream::PreviousPayload)?) } else { None };
    let noise_var = noise_variance(snr_db);
    methods
        .iter()
        .map(|&method| {
            let prec = precoders_from_effective(&eff, method, noise_var)?;
            let frame = transmit(sc, &prec, &symbols, antennas)?;
            let prev_frame = previous.as_ref().map(|p| transmit(sc, &prec, p, antennas)).transpose()?;
            let mut record = MetricRecord::new(&sc.config.name, drop, dc.seed, antennas, method.tag(), snr_db);
            let mut points = Vec::new();
            let (mut all_rx, mut all_ideal) = (Vec::new(), Vec::new());
            for (i, u) in sc.users.iter().enumerate() {
                let layout = &sc.layouts[u.group];
                let y = apply_channel(&frame, &dc.realizations[i], snr_db, stream_seed(dc.seed, Stream::Noise, i as u64), prev_frame.as_ref())?;
                let obs = demodulate_user(&y, layout)?;
                let h = &dc.groups[u.group].users[u.local];
                let gp = &prec.groups[u.group];
                let gains: Vec<Complex64> =
                    (0..layout.used()).map(|j| (h.row(j) * gp.at(j).column(u.local))[0]).collect();
                for (m, row) in obs.iter().enumerate() {
                    let est: Vec<Complex64> = row.iter().zip(&gains).map(|(&o, &g)| equalize(o, g, noise_var)).collect();
                    let ideal = &symbols[i][m];
                    record.evm.push(UserEvm { user: i, group: u.group, symbol: m, evm: evm(&est, ideal)? });
                    if keep_points {
                        points.extend(est.iter().zip(ideal).enumerate().map(|(j, (e, s))| ConstellationPoint {
                            re: e.re,
                            im: e.im,
                            ideal_re: s.re,
                            ideal_im: s.im,
                            user: i,
                            symbol_idx: m,
                            antennas,
                            method,
                            drop,
                            subcarrier: j,
                        }));
                    }
                    all_rx.extend(est);
                    all_ideal.extend_from_slice(ideal);
                }
            }
            record.evm_total = Some(evm(&all_rx, &all_ideal)?);
            Ok(EvmDrop { record, points, frame })
        })
        .collect()
}

/// Fine-grid (group 1) view of one drop used for capacity.
struct FineGrid {
    ranges: Vec<std::ops::Range<usize>>,
    /// `[subband][user]`, `(J x M)`.
    blocks: Vec<Vec<DMatrix<Complex64>>>,
    /// `[subband][user]` effective channels for SU capacity.
    su: Vec<Vec<DVector<Complex64>>>,
}

fn fine_grid(sc: &Scenario, dc: &DropChannels) -> Result<FineGrid> {
    let grid = &sc.layouts[0].grid;
    let responses = dc.realizations.iter().map(|ch| ch.frequency_response(grid)).collect::<Result<Vec<_>>>()?;
    let ranges = subband_ranges(grid.len(), sc.config.subband_size);
    let blocks: Vec<Vec<DMatrix<Complex64>>> = ranges
        .iter()
        .map(|r| responses.iter().map(|h| h.rows(r.start, r.len()).into_owned()).collect())
        .collect();
    let su = blocks.iter().map(|sb| sb.iter().map(sb_effective_channel).collect()).collect();
    Ok(FineGrid { ranges, blocks, su })
}

/// Received-power matrices per fine subband for one precoder set. A user of
/// group `t` on fine subcarrier `j` uses its precoder for grid index `j / r_t`.
fn gain_matrices(sc: &Scenario, fine: &FineGrid, prec: &PrecoderSet) -> Result<Vec<DMatrix<f64>>> {
    fine.ranges
        .iter()
        .zip(&fine.blocks)
        .map(|(range, blocks)| {
            let cols: Vec<Vec<DVector<Complex64>>> = sc
                .users
                .iter()
                .map(|u| {
                    let (r, used) = (sc.spacing_ratio(u.group), sc.used[u.group]);
                    range
                        .clone()
                        .map(|j| prec.groups[u.group].at((j / r).min(used - 1)).column(u.local).into_owned())
                        .collect()
                })
                .collect();
            subband_gains(blocks, &cols)
        })
        .collect()
}

fn capacity_record(fine: &FineGrid, gains: &[DMatrix<f64>], base: MetricRecord) -> Result<MetricRecord> {
    let snr = 10f64.powf(base.snr_db / 10.0);
    let mut record = base;
    let mut pairs = Vec::with_capacity(gains.len());
    for (g, su) in gains.iter().zip(&fine.su) {
        let sinr = sinr_from_gains(g, snr);
        record.sb_sinr_db.push(sinr.iter().map(|s| 10.0 * s.max(1e-30).log10()).collect());
        pairs.push((capacity_su(su, snr), capacity_mu(&sinr)));
    }
    let n = pairs.len() as f64;
    record.c_su = Some(pairs.iter().map(|p| p.0).sum::<f64>() / n);
    record.c_mu = Some(pairs.iter().map(|p| p.1).sum::<f64>() / n);
    record.c = Some(capacity_switched(&pairs)?);
    Ok(record)
}

/// Capacity records of one drop: every method at every SNR, in that order.
pub fn capacity_drop(sc: &Scenario, antennas: usize, drop: usize, methods: &[Method], snrs_db: &[f64]) -> Result<Vec<MetricRecord>> {
    let dc = drop_channels(sc, antennas, drop)?;
    let eff: EffectiveChannels = effective_channels(&dc.groups, sc.config.subband_size, sc.config.filter_len)?;
    let fine = fine_grid(sc, &dc)?;
    let mut out = Vec::with_capacity(methods.len() * snrs_db.len());
    for &method in methods {
        let fixed = match method {
            Method::Cb => Some(gain_matrices(sc, &fine, &precoders_from_effective(&eff, method, 1.0)?)?),
            Method::Slnr => None,
        };
        for &snr_db in snrs_db {
            let base = MetricRecord::new(&sc.config.name, drop, dc.seed, antennas, method.tag(), snr_db);
            let record = match &fixed {
                Some(g) => capacity_record(&fine, g, base)?,
                None => {
                    let prec = precoders_from_effective(&eff, method, noise_variance(snr_db))?;
                    capacity_record(&fine, &gain_matrices(sc, &fine, &prec)?, base)?
                }
            };
            out.push(record);
        }
    }
    Ok(out)
}

/// Output of the `constellation` experiment.
#[derive(Debug, Clone)]
pub struct ConstellationRun {
    pub records: Vec<MetricRecord>,
    pub points: Vec<ConstellationPoint>,
    /// Transmitted frame of drop 0 per `(antennas, method)` when sample dumps are on.
    pub frames: Vec<(usize, Method, AntennaFrame)>,
    pub summary: Vec<EvmSummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvmSummaryRow {
    pub antennas: usize,
    pub method: String,
    /// `None` for the all-user aggregate.
    pub user: Option<usize>,
    pub symbol: Option<usize>,
    pub count: usize,
    pub median_pct: f64,
    pub mean_pct: f64,
    pub std_pct: f64,
    pub median_db: f64,
}

fn evm_row(antennas: usize, method: &str, user: Option<usize>, symbol: Option<usize>, pct: &[f64]) -> Result<EvmSummaryRow> {
    let (mean_pct, std_pct) = mean_std(pct)?;
    let median_pct = median(pct)?;
    Ok(EvmSummaryRow {
        antennas,
        method: method.to_string(),
        user,
        symbol,
        count: pct.len(),
        median_pct,
        mean_pct,
        std_pct,
        median_db: 20.0 * (median_pct / 100.0).max(1e-10).log10(),
    })
}

/// Per `(antennas, method)`: the all-user aggregate then each user and symbol.
pub fn summarize_evm(sc: &Scenario, records: &[MetricRecord]) -> Result<Vec<EvmSummaryRow>> {
    let mut rows = Vec::new();
    for &m in &sc.config.antennas {
        for method in &sc.config.methods {
            let sel: Vec<&MetricRecord> = records.iter().filter(|r| r.antennas == m && r.method == method.tag()).collect();
            if sel.is_empty() {
                continue;
            }
            let total: Vec<f64> = sel.iter().filter_map(|r| r.evm_total.map(|e| e.percent)).collect();
            rows.push(evm_row(m, method.tag(), None, None, &total)?);
            for (i, u) in sc.users.iter().enumerate() {
                for s in 0..sc.layouts[u.group].p {
                    let v: Vec<f64> = sel
                        .iter()
                        .flat_map(|r| r.evm.iter().filter(|e| e.user == i && e.symbol == s).map(|e| e.evm.percent))
                        .collect();
                    rows.push(evm_row(m, method.tag(), Some(i), Some(s), &v)?);
                }
            }
        }
    }
    Ok(rows)
}

pub fn run_constellation(sc: &Scenario) -> Result<ConstellationRun> {
    let cfg = &sc.config;
    let mut records = Vec::new();
    let mut points = Vec::new();
    let mut frames = Vec::new();
    for &m in &cfg.antennas {
        let drops: Vec<Vec<EvmDrop>> = (0..cfg.drops)
            .into_par_iter()
            .map(|d| evm_drop(sc, m, d, &cfg.methods, cfg.evm.snr_db, d < cfg.evm.dump_drops))
            .collect::<Result<_>>()?;
        for (d, per_method) in drops.into_iter().enumerate() {
            for (method, r) in cfg.methods.iter().zip(per_method) {
                records.push(r.record);
                points.extend(r.points);
                if d == 0 && cfg.evm.dump_samples {
                    frames.push((m, *method, r.frame));
                }
            }
        }
    }
    let summary = summarize_evm(sc, &records)?;
    Ok(ConstellationRun { records, points, frames, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityRow {
    pub antennas: usize,
    /// `SU`, `CB` or `SLNR`.
    pub method: String,
    pub snr_db: f64,
    pub count: usize,
    /// Switched capacity for MU methods, SU capacity for `SU`.
    pub c_mean: f64,
    pub c_std: f64,
    pub c_mu_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainRow {
    pub antennas: usize,
    pub method: String,
    pub target_bps_hz: f64,
    pub snr_su_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub gain_db: Option<f64>,
}

/// Output of the `capacity` experiment.
#[derive(Debug, Clone)]
pub struct CapacityRun {
    pub records: Vec<MetricRecord>,
    pub curves: Vec<CapacityRow>,
    pub gains: Vec<GainRow>,
}

impl CapacityRun {
    pub fn gain(&self, antennas: usize, method: Method) -> Option<f64> {
        self.gains.iter().find(|g| g.antennas == antennas && g.method == method.tag()).and_then(|g| g.gain_db)
    }

    pub fn curve(&self, antennas: usize, method: &str) -> Vec<(f64, f64)> {
        self.curves.iter().filter(|r| r.antennas == antennas && r.method == method).map(|r| (r.snr_db, r.c_mean)).collect()
    }
}

pub fn run_capacity(sc: &Scenario) -> Result<CapacityRun> {
    let cfg = &sc.config;
    let snrs = &cfg.capacity.snr_db;
    let mut records = Vec::new();
    let mut curves = Vec::new();
    let mut gains = Vec::new();
    for &m in &cfg.antennas {
        let drops: Vec<Vec<MetricRecord>> = (0..cfg.drops)
            .into_par_iter()
            .map(|d| capacity_drop(sc, m, d, &cfg.methods, snrs))
            .collect::<Result<_>>()?;
        let block: Vec<MetricRecord> = drops.into_iter().flatten().collect();
        let stats = |method: &str, snr: f64, f: fn(&MetricRecord) -> Option<f64>| -> Result<(usize, f64, f64)> {
            let v: Vec<f64> = block.iter().filter(|r| r.method == method && r.snr_db == snr).filter_map(f).collect();
            let (mean, std) = mean_std(&v)?;
            Ok((v.len(), mean, std))
        };
        let first = cfg.methods[0].tag();
        let mut su_curve = Vec::new();
        for &snr in snrs {
            let (count, mean, std) = stats(first, snr, |r| r.c_su)?;
            su_curve.push((snr, mean));
            curves.push(CapacityRow { antennas: m, method: "SU".into(), snr_db: snr, count, c_mean: mean, c_std: std, c_mu_mean: 0.0 });
        }
        for method in &cfg.methods {
            let mut curve = Vec::new();
            for &snr in snrs {
                let (count, mean, std) = stats(method.tag(), snr, |r| r.c)?;
                let (_, mu, _) = stats(method.tag(), snr, |r| r.c_mu)?;
                curve.push((snr, mean));
                curves.push(CapacityRow { antennas: m, method: method.tag().into(), snr_db: snr, count, c_mean: mean, c_std: std, c_mu_mean: mu });
            }
            let target = sc.target_capacity();
            gains.push(GainRow {
                antennas: m,
                method: method.tag().into(),
                target_bps_hz: target,
                snr_su_db: crate::analysis::snr_at_capacity(&su_curve, target),
                snr_db: crate::analysis::snr_at_capacity(&curve, target),
                gain_db: snr_gain_db(&su_curve, &curve, target),
            });
        }
        records.extend(block);
    }
    Ok(CapacityRun { records, curves, gains })
}
