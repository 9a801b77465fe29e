use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use mixmimo::precoding::Method;
use mixmimo::sim::{self, output, Scenario, ScenarioConfig, REFERENCE_SCENARIO};
use mixmimo::Error;

#[derive(Parser, Debug)]
#[command(name = "mixmimo", version, about = "Mixed-numerology MU-MIMO downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full transmit/receive chain: equalized constellations and EVM.
    Constellation(RunArgs),
    /// Analytic SU/MU capacity versus SNR and SNR gains.
    Capacity(RunArgs),
    /// Cross-module oracle checks; exit code 3 on any failure.
    Selfcheck {
        /// Add a check that always fails (exercises the failure path).
        #[arg(long, hide = true)]
        inject_failure: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Cb,
    Slnr,
    Both,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Scenario file; the bundled reference scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Comma-separated SNR list in dB (overrides the config).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Number of drops (overrides the config).
    #[arg(long)]
    drops: Option<usize>,
}

enum Failure {
    Config(Error),
    Runtime(Error),
    Selfcheck,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Selfcheck => 3,
        }
    }
}

fn load(args: &RunArgs, constellation: bool) -> Result<Scenario, Failure> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p),
        None => ScenarioConfig::from_toml(REFERENCE_SCENARIO),
    }
    .map_err(Failure::Config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.out {
        cfg.output.dir = d.clone();
    }
    if let Some(n) = args.drops {
        cfg.drops = n;
    }
    match args.method {
        Some(MethodArg::Cb) => cfg.methods = vec![Method::Cb],
        Some(MethodArg::Slnr) => cfg.methods = vec![Method::Slnr],
        Some(MethodArg::Both) => cfg.methods = vec![Method::Cb, Method::Slnr],
        None => {}
    }
    if let Some(snr) = &args.snr {
        if constellation {
            match snr.as_slice() {
                [one] => cfg.evm.snr_db = *one,
                _ => return Err(Failure::Config(Error::Config("constellation takes exactly one --snr value".into()))),
            }
        } else {
            cfg.capacity.snr_db = snr.clone();
        }
    }
    Scenario::new(cfg).map_err(Failure::Config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Constellation(args) => {
            let sc = load(&args, true)?;
            let run = sim::with_jobs(args.jobs, || sim::run_constellation(&sc))
                .and_then(|r| r)
                .map_err(Failure::Runtime)?;
            let paths = output::write_constellation(&sc.config.output.dir, &sc, &run).map_err(Failure::Runtime)?;
            for row in run.summary.iter().filter(|r| r.user.is_none()) {
                println!("M={:<3} {:<5} median EVM {:7.3}% ({:7.2} dB)", row.antennas, row.method, row.median_pct, row.median_db);
            }
            info!("wrote {} files to {}", paths.len(), sc.config.output.dir.display());
        }
        Command::Capacity(args) => {
            let sc = load(&args, false)?;
            let run = sim::with_jobs(args.jobs, || sim::run_capacity(&sc)).and_then(|r| r).map_err(Failure::Runtime)?;
            let paths = output::write_capacity(&sc.config.output.dir, &sc, &run).map_err(Failure::Runtime)?;
            for g in &run.gains {
                let gain = g.gain_db.map_or("n/a".to_string(), |v| format!("{v:.2} dB"));
                println!("M={:<3} {:<5} SNR gain over SU at {} bit/s/Hz: {gain}", g.antennas, g.method, g.target_bps_hz);
            }
            info!("wrote {} files to {}", paths.len(), sc.config.output.dir.display());
        }
        Command::Selfcheck { inject_failure } => {
            let report = sim::run_selfcheck(inject_failure).map_err(Failure::Runtime)?;
            for r in &report.results {
                println!("{} {:<32} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if !report.passed() {
                return Err(Failure::Selfcheck);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(e) => eprintln!("config error: {e}"),
                Failure::Runtime(e) => eprintln!("error: {e}"),
                Failure::Selfcheck => eprintln!("selfcheck failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
