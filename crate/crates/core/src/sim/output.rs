//! CSV/JSON result files and the run manifest.
//!
//! Column orders:
//!
//! | file                    | columns |
//! |-------------------------|---------|
//! | `constellation.csv`     | re, im, ideal_re, ideal_im, user, symbol_idx, antennas, method, drop, subcarrier |
//! | `evm.csv`               | scenario, antennas, method, snr_db, drop, seed, user, group, symbol, evm_pct, evm_db |
//! | `evm_summary.csv`       | antennas, method, user, symbol, count, median_pct, mean_pct, std_pct, median_db |
//! | `capacity_drops.csv`    | scenario, antennas, method, snr_db, drop, seed, c_su, c_mu, c |
//! | `capacity_summary.csv`  | antennas, method, snr_db, count, c_mean, c_std, c_mu_mean |
//! | `snr_gain.csv`          | antennas, method, target_bps_hz, snr_su_db, snr_db, gain_db |
//!
//! `user`/`symbol` are empty in aggregate rows, missing gains are empty.
//! Every CSV is a pure function of the effective config; only `manifest.json`
//! carries a timestamp.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::phy::dump;
use crate::sim::config::Scenario;
use crate::sim::runner::{drop_seed, CapacityRun, ConstellationRun};

/// Statement of the SNR axis recorded in every manifest.
pub const SNR_CONVENTION: &str = "snr_db is the per-subcarrier ratio of unit total transmit power, \
through a channel of unit average gain per antenna, to the noise variance per subcarrier";

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_f(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

pub fn constellation_csv(run: &ConstellationRun) -> String {
    let mut s = String::from("re,im,ideal_re,ideal_im,user,symbol_idx,antennas,method,drop,subcarrier\n");
    for p in &run.points {
        let _ = writeln!(
            s,
            "{:.9},{:.9},{:.9},{:.9},{},{},{},{},{},{}",
            p.re,
            p.im,
            p.ideal_re,
            p.ideal_im,
            p.user,
            p.symbol_idx,
            p.antennas,
            p.method.tag(),
            p.drop,
            p.subcarrier
        );
    }
    s
}

pub fn evm_csv(run: &ConstellationRun) -> String {
    let mut s = String::from("scenario,antennas,method,snr_db,drop,seed,user,group,symbol,evm_pct,evm_db\n");
    for r in &run.records {
        for e in &r.evm {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.antennas,
                r.method,
                f(r.snr_db),
                r.drop,
                r.seed,
                e.user,
                e.group,
                e.symbol,
                f(e.evm.percent),
                f(e.evm.db)
            );
        }
    }
    s
}

pub fn evm_summary_csv(run: &ConstellationRun) -> String {
    let mut s = String::from("antennas,method,user,symbol,count,median_pct,mean_pct,std_pct,median_db\n");
    for r in &run.summary {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.antennas,
            r.method,
            opt(r.user),
            opt(r.symbol),
            r.count,
            f(r.median_pct),
            f(r.mean_pct),
            f(r.std_pct),
            f(r.median_db)
        );
    }
    s
}

pub fn capacity_drops_csv(run: &CapacityRun) -> String {
    let mut s = String::from("scenario,antennas,method,snr_db,drop,seed,c_su,c_mu,c\n");
    for r in &run.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.antennas,
            r.method,
            f(r.snr_db),
            r.drop,
            r.seed,
            opt_f(r.c_su),
            opt_f(r.c_mu),
            opt_f(r.c)
        );
    }
    s
}

pub fn capacity_summary_csv(run: &CapacityRun) -> String {
    let mut s = String::from("antennas,method,snr_db,count,c_mean,c_std,c_mu_mean\n");
    for r in &run.curves {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.antennas,
            r.method,
            f(r.snr_db),
            r.count,
            f(r.c_mean),
            f(r.c_std),
            f(r.c_mu_mean)
        );
    }
    s
}

pub fn snr_gain_csv(run: &CapacityRun) -> String {
    let mut s = String::from("antennas,method,target_bps_hz,snr_su_db,snr_db,gain_db\n");
    for g in &run.gains {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            g.antennas,
            g.method,
            f(g.target_bps_hz),
            opt_f(g.snr_su_db),
            opt_f(g.snr_db),
            opt_f(g.gain_db)
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub tool_version: String,
    /// SHA-256 of the effective config serialized as TOML.
    pub config_hash: String,
    pub master_seed: u64,
    pub drop_seeds: Vec<u64>,
    pub timestamp_unix: u64,
    pub snr_convention: String,
    pub files: Vec<FileDigest>,
    pub config: toml::Value,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(sc: &Scenario) -> String {
    sha256_hex(sc.config.to_toml().as_bytes())
}

fn manifest(sc: &Scenario, experiment: &str, files: Vec<FileDigest>) -> RunManifest {
    RunManifest {
        experiment: experiment.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(sc),
        master_seed: sc.config.seed,
        drop_seeds: (0..sc.config.drops).map(|d| drop_seed(sc, d)).collect(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        snr_convention: SNR_CONVENTION.to_string(),
        files,
        config: toml::Value::try_from(&sc.config).expect("config converts to a TOML value"),
    }
}

fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<Vec<FileDigest>> {
    fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(name, body)| {
            fs::write(dir.join(name), body)?;
            Ok(FileDigest { name: name.to_string(), sha256: sha256_hex(body.as_bytes()) })
        })
        .collect()
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(m).expect("manifest serializes"))?;
    Ok(path)
}

/// Writes every `constellation` output under `dir` and returns the paths.
pub fn write_constellation(dir: &Path, sc: &Scenario, run: &ConstellationRun) -> Result<Vec<PathBuf>> {
    let files = [
        ("constellation.csv", constellation_csv(run)),
        ("evm.csv", evm_csv(run)),
        ("evm_summary.csv", evm_summary_csv(run)),
        ("evm_summary.json", serde_json::to_string_pretty(&run.summary).expect("summary serializes")),
    ];
    let mut digests = write_all(dir, &files)?;
    let mut paths: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(n)).collect();
    for (m, method, frame) in &run.frames {
        let prefix = format!("samples_m{m}_{}", method.tag().to_ascii_lowercase());
        for p in dump::write_frame(dir, &prefix, frame)? {
            let name = p.file_name().expect("file path").to_string_lossy().into_owned();
            digests.push(FileDigest { name, sha256: sha256_hex(&fs::read(&p)?) });
            paths.push(p);
        }
    }
    paths.push(write_manifest(dir, &manifest(sc, "constellation", digests))?);
    Ok(paths)
}

/// Writes every `capacity` output under `dir` and returns the paths.
pub fn write_capacity(dir: &Path, sc: &Scenario, run: &CapacityRun) -> Result<Vec<PathBuf>> {
    let files = [
        ("capacity_drops.csv", capacity_drops_csv(run)),
        ("capacity_summary.csv", capacity_summary_csv(run)),
        ("snr_gain.csv", snr_gain_csv(run)),
        ("capacity_summary.json", serde_json::to_string_pretty(&(&run.curves, &run.gains)).expect("summary serializes")),
    ];
    let digests = write_all(dir, &files)?;
    let mut paths: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(n)).collect();
    paths.push(write_manifest(dir, &manifest(sc, "capacity", digests))?);
    Ok(paths)
}
