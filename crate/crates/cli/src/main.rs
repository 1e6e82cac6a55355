use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vrfsim::codes::{code_spectrum, generate_codes};
use vrfsim::metrics::{self, power, Arch};
use vrfsim::runner::validate;
use vrfsim::runner::{run_sweep, ArchKind, ExperimentConfig, SweepSummary};
use vrfsim::Error;

#[derive(Parser)]
#[command(name = "vrfsim", version, about = "Virtual RF chain receiver simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; omitted keys take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path (manifest goes next to it)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed, overrides the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Trials of a single (arch, antennas, snr) point
    Simulate(RunArgs),
    /// Full arch x antennas x snr x trial grid
    Sweep(RunArgs),
    /// Harmonic table of the K switching codes as CSV
    Codes {
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Spectrum length; must be a multiple of K
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Power breakdown of every architecture
    Power {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance checks; exit 2 if any fails
    Validate {
        #[arg(long)]
        workers: Option<usize>,
        /// Also write the report here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.workers == Some(0) {
        return Err(Failure::Config("--workers must be at least 1".into()));
    }
    Ok(cfg)
}

fn out_path(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results.csv"))
}

/// Text to stdout, or to a file when `out` is given.
fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn summarize(cfg: &ExperimentConfig, s: &SweepSummary) {
    println!("{} rows -> {}", s.manifest.rows, s.csv_path.display());
    println!("manifest -> {}", s.manifest_path.display());
    for p in cfg.points() {
        let recs: Vec<_> = s.records.iter().filter(|r| r.point == p).collect();
        if recs.is_empty() {
            continue;
        }
        let sinr: Vec<f64> = recs.iter().map(|r| r.outcome.metrics.mean_sinr_db).collect();
        let ber: Vec<f64> = recs.iter().map(|r| r.outcome.metrics.ber).collect();
        let mut line = format!(
            "{:<12} M={:<3} snr={:>6} dB  median SINR {:>7.2} dB  mean BER {:.2e}",
            p.arch.name(),
            p.antennas,
            p.snr_db,
            metrics::median(&sinr),
            metrics::mean(&ber)
        );
        if let Some(s) = recs.iter().find_map(|r| r.outcome.switches.as_ref()) {
            line.push_str(&format!("  S[0]={s}"));
        }
        println!("{line}");
    }
    if !s.manifest.flagged.is_empty() {
        eprintln!("{} flagged trials (see manifest)", s.manifest.flagged.len());
    }
}

fn codes_csv(k: usize, samples: usize) -> Result<String, Failure> {
    let mut text = String::from("code_index,bin,magnitude,phase_rad\n");
    for (i, code) in generate_codes(k)?.iter().enumerate() {
        for (bin, v) in code_spectrum::<f64>(code, samples)?.iter().enumerate() {
            // exact zeros have no phase
            let (mag, phase) = if v.norm() < 1e-9 { (0.0, 0.0) } else { (v.norm(), v.arg()) };
            text.push_str(&format!("{i},{bin},{mag:.9},{phase:.9}\n"));
        }
    }
    Ok(text)
}

fn power_table(cfg: &ExperimentConfig) -> Result<String, Failure> {
    let model = cfg.power_model();
    let bw = cfg.ofdm.user_bandwidth_hz;
    let mut text = String::from("arch,antennas,chains,rfe_mw,switch_mw,adc_mw,total_mw\n");
    for &m in &cfg.antennas {
        let mut rows: Vec<(ArchKind, usize)> = Vec::new();
        for arch in [ArchKind::Greenmo, ArchKind::Dbf, ArchKind::HbfFull, ArchKind::HbfPartial, ArchKind::Fdma] {
            if arch == ArchKind::HbfPartial {
                continue; // same budget as hbf_full
            }
            rows.push((arch, cfg.chains(arch, m)));
        }
        // a digital array with only as many chains as users, for comparison
        if cfg.users != m {
            rows.push((ArchKind::Dbf, cfg.users));
        }
        for (arch, chains) in rows {
            let antennas = if arch.power_arch() == Arch::Fdma { 1 } else { m };
            let r = power(&model, arch.power_arch(), antennas, chains, bw)?;
            text.push_str(&format!(
                "{},{antennas},{chains},{},{},{},{}\n",
                arch.power_arch(),
                r.rfe_mw,
                r.switch_mw,
                r.adc_mw,
                r.total_mw
            ));
        }
    }
    Ok(text)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            if cfg.points().len() != 1 {
                return Err(Failure::Config(format!(
                    "simulate runs one (arch, antennas, snr) point but the config has {}; use sweep",
                    cfg.points().len()
                )));
            }
            let s = run_sweep(&cfg, &out_path(&args, &cfg), args.workers)?;
            summarize(&cfg, &s);
        }
        Command::Sweep(args) => {
            let cfg = load(&args)?;
            let s = run_sweep(&cfg, &out_path(&args, &cfg), args.workers)?;
            summarize(&cfg, &s);
        }
        Command::Codes { k, samples, out } => emit(&codes_csv(k, samples)?, out.as_deref())?,
        Command::Power { config, out } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            emit(&power_table(&cfg)?, out.as_deref())?;
        }
        Command::Validate { workers, out } => {
            let report = validate::run_all(workers);
            println!("{report}");
            if let Some(p) = out {
                fs::write(p, format!("{report}\n"))?;
            }
            if !report.passed() {
                return Err(Failure::Validation);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors count as configuration errors; --help and --version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Validation) => ExitCode::from(2),
    }
}
