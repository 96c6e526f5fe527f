//! Command-line driver for the experiment harness.
//!
//! Exit codes: 0 success, 1 experiment failure, 2 usage or config error.
//! Failures print a one-line JSON error record on stderr.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbadc::harness::{self, ExperimentConfig, Manifest};
use cbadc::Error;

#[derive(Parser)]
#[command(name = "cbadc", version, about = "Control-bounded A/D conversion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's output_dir, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Nominal SNR at every notch position plus the low-pass baseline.
    Nominal,
    /// Component-mismatch Monte Carlo.
    Montecarlo,
    /// Calibrated SNR over an op-amp DC-gain × GBWP grid.
    GbwpSweep,
    /// LMS calibration of the ideal quadrature frontend.
    Calibrate,
    /// PSD of a stored control trace filtered by a stored filter bank.
    Psd {
        /// Bit-packed control trace (`ControlTrace::save`)
        #[arg(long)]
        trace: PathBuf,
        /// Filter bank (`FirFilterBank::save`)
        #[arg(long)]
        bank: PathBuf,
    },
    /// Control-condition and rotation-identity checks.
    Verify,
}

enum Failure {
    Usage(Error),
    Experiment(Error),
    Checks(String),
}

fn record(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            eprintln!("{}", record("usage", &e.kind().to_string()));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("{}", record(e.kind(), &e.to_string()));
            ExitCode::from(2)
        }
        Err(Failure::Experiment(e)) => {
            eprintln!("{}", record(e.kind(), &e.to_string()));
            ExitCode::from(1)
        }
        Err(Failure::Checks(msg)) => {
            eprintln!("{}", record("verification_failed", &msg));
            ExitCode::from(1)
        }
    }
}

fn load(cli: &Cli, required: bool) -> Result<Option<ExperimentConfig>, Failure> {
    let cfg = match &cli.config {
        Some(p) => Some(ExperimentConfig::load(p).map_err(Failure::Usage)?),
        None if required => {
            return Err(Failure::Usage(Error::Config("this subcommand needs --config".into())));
        }
        None => None,
    };
    Ok(cfg.map(|mut c| {
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        c
    }))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(Error::InvalidArgument(e.to_string())))?;
    }
    let needs_config = !matches!(cli.command, Command::Verify | Command::Psd { .. });
    let cfg = load(cli, needs_config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let fail = Failure::Experiment;

    let (name, outputs) = match &cli.command {
        Command::Nominal => {
            let r = harness::run_nominal(cfg.as_ref().unwrap(), &out).map_err(fail)?;
            for row in &r.rows {
                println!("{:<8} f_n={:<12} SNR={:.2} dB", row.position, fmt_opt(row.f_n), row.measurement.snr_db);
            }
            ("nominal", r.outputs)
        }
        Command::Montecarlo => {
            let r = harness::run_montecarlo(cfg.as_ref().unwrap(), &out).map_err(fail)?;
            for (k, snr) in &r.nominal_snr {
                println!("{k:?}: nominal {snr:.2} dB, {} of {} trials unstable", r.unstable(*k), r.of(*k).count());
            }
            ("montecarlo", r.outputs)
        }
        Command::GbwpSweep => {
            let r = harness::run_gbwp_sweep(cfg.as_ref().unwrap(), &out).map_err(fail)?;
            for p in &r.points {
                println!(
                    "dc={:<8} gbwp={:<8} {:?} SNR={}",
                    fmt_opt(p.dc_gain),
                    fmt_opt(p.gbwp_ratio),
                    p.status,
                    fmt_opt(p.snr_db)
                );
            }
            ("gbwp-sweep", r.outputs)
        }
        Command::Calibrate => {
            let r = harness::run_calibrate(cfg.as_ref().unwrap(), &out).map_err(fail)?;
            println!(
                "calibrated SNR {:.2} dB (Wiener {:.2} dB), mse {:.3e}",
                r.calibrated.snr_db, r.wiener.snr_db, r.mse
            );
            ("calibrate", r.outputs)
        }
        Command::Psd { trace, bank } => {
            let c = cfg.clone().unwrap_or_else(|| ExperimentConfig::new(1, 1));
            let (s, outputs) = harness::run_psd(&c, trace, bank, &out).map_err(fail)?;
            println!("{} bins, {} segments", s.freqs.len(), s.segments);
            ("psd", outputs)
        }
        Command::Verify => {
            let r = harness::run_verify(cfg.as_ref(), seed, Some(&out)).map_err(fail)?;
            for c in &r.checks {
                println!("{:<22} max {:.3e} (tol {:.0e}) {}", c.name, c.max_residual, c.tolerance, if c.pass { "ok" } else { "FAIL" });
            }
            write_manifest("verify", cfg.as_ref(), seed, &out, &r.outputs)?;
            if !r.passed() {
                return Err(Failure::Checks("one or more checks exceeded tolerance".into()));
            }
            return Ok(());
        }
    };
    write_manifest(name, cfg.as_ref(), seed, &out, &outputs)
}

fn write_manifest(
    name: &str,
    cfg: Option<&ExperimentConfig>,
    seed: u64,
    out: &Path,
    outputs: &[PathBuf],
) -> Result<(), Failure> {
    Manifest::new(name, cfg, seed, outputs)
        .and_then(|m| m.write(out))
        .map(|_| ())
        .map_err(Failure::Experiment)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}
