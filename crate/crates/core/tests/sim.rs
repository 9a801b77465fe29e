use std::fs;
use std::path::Path;
use std::process::Command;

use mixmimo::precoding::Method;
use mixmimo::sim::output::{capacity_drops_csv, constellation_csv, evm_csv, write_capacity, write_constellation};
use mixmimo::sim::runner::{drop_seed, evm_drop};
use mixmimo::sim::seed::{split, stream_seed, Stream};
use mixmimo::sim::{run_capacity, run_constellation, with_jobs, Scenario, ScenarioConfig, REFERENCE_SCENARIO};

fn small(drops: usize, antennas: Vec<usize>) -> Scenario {
    let mut cfg = ScenarioConfig::from_toml(REFERENCE_SCENARIO).unwrap();
    cfg.drops = drops;
    cfg.antennas = antennas;
    cfg.capacity.snr_db = vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0];
    Scenario::new(cfg).unwrap()
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mixmimo"));
    c.env("RUST_LOG", "error");
    c
}

#[test]
fn capacity_is_independent_of_thread_count() {
    let sc = small(6, vec![2, 8]);
    let one = with_jobs(Some(1), || run_capacity(&sc)).unwrap().unwrap();
    let four = with_jobs(Some(4), || run_capacity(&sc)).unwrap().unwrap();
    assert_eq!(capacity_drops_csv(&one), capacity_drops_csv(&four));
}

#[test]
fn constellation_is_independent_of_thread_count() {
    let sc = small(3, vec![8]);
    let one = with_jobs(Some(1), || run_constellation(&sc)).unwrap().unwrap();
    let three = with_jobs(Some(3), || run_constellation(&sc)).unwrap().unwrap();
    assert_eq!(evm_csv(&one), evm_csv(&three));
    assert_eq!(constellation_csv(&one), constellation_csv(&three));
}

#[test]
fn capacity_vanishes_at_very_low_snr() {
    let mut cfg = ScenarioConfig::from_toml(REFERENCE_SCENARIO).unwrap();
    cfg.drops = 2;
    cfg.capacity.snr_db = vec![-120.0, -100.0];
    let run = run_capacity(&Scenario::new(cfg).unwrap()).unwrap();
    for row in &run.curves {
        assert!(row.c_mean < 1e-8, "{row:?}");
    }
}

#[test]
fn drop_seeds_follow_the_split_stream() {
    let sc = small(4, vec![2]);
    for d in 0..4 {
        assert_eq!(drop_seed(&sc, d), split(sc.config.seed, d as u64));
    }
    let s = drop_seed(&sc, 0);
    let streams = [Stream::Channel, Stream::Payload, Stream::Noise, Stream::PreviousPayload];
    let seeds: std::collections::BTreeSet<u64> = streams.iter().map(|&k| stream_seed(s, k, 0)).collect();
    assert_eq!(seeds.len(), 4);
}

#[test]
fn methods_see_identical_drops() {
    let sc = small(1, vec![8]);
    let runs = evm_drop(&sc, 8, 0, &[Method::Cb, Method::Slnr], 50.0, true).unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0].record.seed, runs[1].record.seed);
    // same payload: the ideal points line up one to one
    let ideal = |r: &mixmimo::sim::runner::EvmDrop| -> Vec<(u64, u64)> {
        r.points.iter().map(|p| (p.ideal_re.to_bits(), p.ideal_im.to_bits())).collect()
    };
    assert_eq!(ideal(&runs[0]), ideal(&runs[1]));
}

#[test]
fn high_snr_single_user_scenario_has_tiny_evm() {
    let mut cfg = ScenarioConfig::from_toml(REFERENCE_SCENARIO).unwrap();
    cfg.groups.truncate(1);
    cfg.drops = 3;
    cfg.antennas = vec![8];
    cfg.methods = vec![Method::Cb];
    let sc = Scenario::new(cfg).unwrap();
    let run = run_constellation(&sc).unwrap();
    for row in &run.summary {
        assert!(row.median_db <= -45.0, "{row:?}");
    }
}

#[test]
fn written_outputs_carry_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::from_toml(REFERENCE_SCENARIO).unwrap();
    cfg.drops = 2;
    cfg.antennas = vec![2];
    cfg.evm.dump_samples = true;
    let sc = Scenario::new(cfg).unwrap();
    let paths = write_constellation(dir.path(), &sc, &run_constellation(&sc).unwrap()).unwrap();
    for p in &paths {
        assert!(p.exists(), "{}", p.display());
    }
    assert!(paths.iter().any(|p| p.to_string_lossy().ends_with("_ant0.bin")));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["drop_seeds"].as_array().unwrap().len(), 2);
    assert!(manifest["snr_convention"].as_str().unwrap().contains("per-subcarrier"));

    let cap = write_capacity(&dir.path().join("cap"), &sc, &run_capacity(&sc).unwrap()).unwrap();
    let header = fs::read_to_string(&cap[2]).unwrap();
    assert!(header.starts_with("antennas,method,target_bps_hz,snr_su_db,snr_db,gain_db\n"));
}

#[test]
fn invalid_scenarios_are_config_errors() {
    let base = ScenarioConfig::from_toml(REFERENCE_SCENARIO).unwrap();
    let mut bad = base.clone();
    bad.groups[1].used_subcarriers = 500;
    assert!(Scenario::new(bad).is_err());
    let mut bad = base.clone();
    bad.capacity.snr_db = vec![0.0, 0.0];
    assert!(Scenario::new(bad).is_err());
    let mut bad = base;
    bad.groups[0].user_angles_deg = vec![f64::NAN];
    assert!(Scenario::new(bad).is_err());
    assert!(ScenarioConfig::from_toml(&format!("{REFERENCE_SCENARIO}\nbogus = 1\n")).is_err());
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "name = \"x\"\ndrops = 1\n");
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();

    assert_eq!(code(&["capacity", "--config", bad.to_str().unwrap()]), Some(1));
    assert_eq!(code(&["capacity", "--config", "/nonexistent/scenario.toml"]), Some(1));
    assert_eq!(code(&["constellation", "--snr", "10,20"]), Some(1));
    assert_eq!(code(&["selfcheck"]), Some(0));
    assert_eq!(code(&["selfcheck", "--inject-failure"]), Some(3));

    // an output path under a regular file cannot be created
    let blocker = write(dir.path(), "file", "");
    let out = blocker.join("sub");
    assert_eq!(code(&["capacity", "--drops", "1", "--snr", "0,10", "--out", out.to_str().unwrap()]), Some(2));
}

#[test]
fn cli_capacity_reports_gains() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["capacity", "--drops", "2", "--method", "slnr", "--seed", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("SLNR")).count(), 3);
    assert!(!text.contains("CB"));
    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 3"));
}
