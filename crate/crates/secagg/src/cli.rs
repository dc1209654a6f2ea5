//! Command-line interface behind the `secagg` binary.
//!
//! `secagg run` executes one or more seeds of a scenario and writes per-seed
//! metrics plus an aggregate summary; `secagg compare` runs the paired
//! secure-versus-baseline experiment and reports the security overhead.
//! Exit codes: 0 success, 2 configuration error, 3 output I/O error.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigError, ScenarioConfig};
use crate::metrics::{overhead_report, Metrics, OverheadError, OverheadReport};
use crate::report::{self, format_sig9, ReportError};
use crate::sim;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "secagg",
    version,
    about = "Secure distributed max-aggregation simulator for wireless sensor networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario over one or more seeds and write metrics files.
    Run(RunArgs),
    /// Run the paired experiment (security off, then on, same seeds) and
    /// report the overhead of the security module.
    Compare(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario config file (`key = value` lines); reference defaults apply
    /// when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// First seed of the sweep; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of consecutive seeds to run (seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    pub runs: u32,

    /// Explicit comma-separated seed list; overrides --seed/--runs.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,

    /// Security module override.
    #[arg(long, value_enum)]
    pub security: Option<OnOff>,

    /// Compromised-node fraction override, in [0, 1].
    #[arg(long)]
    pub compromised_fraction: Option<f64>,

    /// Output directory.
    #[arg(long, env = "SECAGG_OUT", default_value = "secagg-out")]
    pub out: PathBuf,

    /// Also write the full event trace of each run.
    #[arg(long)]
    pub trace: bool,

    /// Suppress per-run progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Report(ReportError),
    Pairing(OverheadError),
    Io { path: String, source: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Report(e) => write!(f, "{e}"),
            CliError::Pairing(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "cannot write {path}: {source}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Pairing(_) => EXIT_CONFIG,
            CliError::Report(_) | CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Report(e)
    }
}

impl From<OverheadError> for CliError {
    fn from(e: OverheadError) -> Self {
        CliError::Pairing(e)
    }
}

/// Parses arguments from the process environment and runs the command.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

pub fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

/// Config file plus CLI overrides; overrides win over file values.
fn effective_config(args: &RunArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    if let Some(security) = args.security {
        cfg.protocol.security_enabled = security == OnOff::On;
    }
    if let Some(fraction) = args.compromised_fraction {
        cfg.attack.compromised_fraction = fraction;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep_seeds(args: &RunArgs, base: &ScenarioConfig) -> Vec<u64> {
    if !args.seeds.is_empty() {
        return args.seeds.clone();
    }
    let first = base.rng_seed;
    (0..args.runs.max(1) as u64).map(|i| first.wrapping_add(i)).collect()
}

fn make_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Executes one seed, writing metrics, the effective config, and optionally
/// the trace into `dir`.
fn run_one(cfg: &ScenarioConfig, dir: &Path, with_trace: bool) -> Result<Metrics, CliError> {
    make_dir(dir)?;
    let metrics = if with_trace {
        let (metrics, trace) = sim::run_traced(cfg)?;
        report::write_trace(&trace, dir.join("trace.log"))?;
        metrics
    } else {
        sim::run(cfg)?
    };
    report::write_all(&metrics, dir)?;
    write_text(&dir.join("effective.cfg"), &cfg.to_config_string())?;
    Ok(metrics)
}

/// Mean and sample standard deviation per scalar metric across runs.
fn aggregate_lines(all: &[Metrics]) -> String {
    let mut out = String::new();
    if all.is_empty() {
        return out;
    }
    let keys: Vec<&'static str> = all[0].scalar_fields().iter().map(|(k, _)| *k).collect();
    for (idx, key) in keys.iter().enumerate() {
        let values: Vec<f64> = all
            .iter()
            .map(|m| m.scalar_fields()[idx].1)
            .filter(|v| v.is_finite())
            .collect();
        let (mean, std) = mean_std(&values);
        out.push_str(&format!("{key}_mean = {}\n", format_sig9(mean)));
        out.push_str(&format!("{key}_std = {}\n", format_sig9(std)));
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let base = effective_config(args)?;
    let seeds = sweep_seeds(args, &base);
    make_dir(&args.out)?;
    let mut all = Vec::with_capacity(seeds.len());
    for seed in &seeds {
        let mut cfg = base.clone();
        cfg.rng_seed = *seed;
        let dir = args.out.join(format!("seed_{seed}"));
        let metrics = run_one(&cfg, &dir, args.trace)?;
        if !args.quiet {
            println!(
                "seed {seed}: detection_rate={:.3} fp_rate={:.3} delivery_ratio={:.3} mean_energy_j={:.4} -> {}",
                metrics.detection.detection_rate,
                metrics.detection.fp_rate,
                metrics.delivery_ratio,
                metrics.mean_energy_j,
                dir.display(),
            );
        }
        all.push(metrics);
    }
    // Aggregate last, after every per-run tree is complete.
    write_text(&args.out.join("aggregate.txt"), &aggregate_lines(&all))?;
    if !args.quiet {
        println!("{} run(s) -> {}", all.len(), args.out.display());
    }
    Ok(())
}

fn overhead_lines(report: &OverheadReport) -> String {
    format!(
        "energy_overhead_pct = {}\n\
         delivery_ratio_delta = {}\n\
         secure_mean_energy_j = {}\n\
         baseline_mean_energy_j = {}\n\
         secure_messages = {}\n\
         baseline_messages = {}\n",
        format_sig9(report.energy_overhead_pct),
        format_sig9(report.delivery_ratio_delta),
        format_sig9(report.secure_mean_energy_j),
        format_sig9(report.baseline_mean_energy_j),
        report.secure_messages,
        report.baseline_messages,
    )
}

pub fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let base = effective_config(args)?;
    let seeds = sweep_seeds(args, &base);
    make_dir(&args.out)?;
    let mut reports = Vec::with_capacity(seeds.len());
    for seed in &seeds {
        // Baseline: plain aggregation, no security module and no attackers.
        // Secure: security module on, attackers per the scenario.
        let mut baseline_cfg = base.clone();
        baseline_cfg.rng_seed = *seed;
        baseline_cfg.protocol.security_enabled = false;
        baseline_cfg.attack.compromised_fraction = 0.0;
        let mut secure_cfg = base.clone();
        secure_cfg.rng_seed = *seed;
        secure_cfg.protocol.security_enabled = true;

        let seed_dir = args.out.join(format!("seed_{seed}"));
        let baseline = run_one(&baseline_cfg, &seed_dir.join("baseline"), args.trace)?;
        let secure = run_one(&secure_cfg, &seed_dir.join("secure"), args.trace)?;
        let report = overhead_report(&secure, &baseline)?;
        write_text(&seed_dir.join("overhead.txt"), &overhead_lines(&report))?;
        if !args.quiet {
            println!(
                "seed {seed}: energy overhead {:+.1}% delivery delta {:+.4}",
                report.energy_overhead_pct, report.delivery_ratio_delta,
            );
        }
        reports.push(report);
    }
    let pcts: Vec<f64> = reports.iter().map(|r| r.energy_overhead_pct).collect();
    let deltas: Vec<f64> = reports.iter().map(|r| r.delivery_ratio_delta).collect();
    let (pct_mean, pct_std) = mean_std(&pcts);
    let (delta_mean, delta_std) = mean_std(&deltas);
    write_text(
        &args.out.join("aggregate.txt"),
        &format!(
            "energy_overhead_pct_mean = {}\n\
             energy_overhead_pct_std = {}\n\
             delivery_ratio_delta_mean = {}\n\
             delivery_ratio_delta_std = {}\n",
            format_sig9(pct_mean),
            format_sig9(pct_std),
            format_sig9(delta_mean),
            format_sig9(delta_std),
        ),
    )?;
    if !args.quiet {
        println!(
            "{} paired run(s): mean energy overhead {pct_mean:+.1}% -> {}",
            reports.len(),
            args.out.display(),
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(out: PathBuf) -> RunArgs {
        RunArgs {
            config: None,
            seed: Some(1),
            runs: 1,
            seeds: Vec::new(),
            security: None,
            compromised_fraction: None,
            out,
            trace: false,
            quiet: true,
        }
    }

    fn write_cfg(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("scenario.cfg");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn run_writes_per_seed_tree_and_aggregate() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args(dir.path().join("out"));
        a.config = Some(write_cfg(dir.path(), "n_nodes = 10\nsim_time_s = 2\n"));
        a.runs = 2;
        a.trace = true;
        cmd_run(&a).unwrap();
        for seed in [1, 2] {
            let d = dir.path().join("out").join(format!("seed_{seed}"));
            for f in ["nodes.csv", "accuracy.csv", "summary.txt", "effective.cfg", "trace.log"] {
                assert!(d.join(f).exists(), "missing {f} for seed {seed}");
            }
        }
        let agg = std::fs::read_to_string(dir.path().join("out/aggregate.txt")).unwrap();
        assert!(agg.contains("delivery_ratio_mean = "));
        assert!(agg.contains("delivery_ratio_std = "));
    }

    #[test]
    fn cli_overrides_win_over_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args(dir.path().join("out"));
        a.config = Some(write_cfg(
            dir.path(),
            "n_nodes = 10\nsim_time_s = 2\nrng_seed = 99\ncompromised_fraction = 0.0\n",
        ));
        a.seed = Some(5);
        a.compromised_fraction = Some(0.2);
        a.security = Some(OnOff::Off);
        cmd_run(&a).unwrap();
        let echoed = std::fs::read_to_string(dir.path().join("out/seed_5/effective.cfg")).unwrap();
        assert!(echoed.contains("rng_seed = 5"));
        assert!(echoed.contains("compromised_fraction = 0.2"));
        assert!(echoed.contains("security_enabled = false"));
    }

    #[test]
    fn explicit_seed_list_overrides_the_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args(dir.path().join("out"));
        a.config = Some(write_cfg(dir.path(), "n_nodes = 8\nsim_time_s = 1\n"));
        a.seeds = vec![3, 8];
        a.runs = 5; // ignored
        cmd_run(&a).unwrap();
        assert!(dir.path().join("out/seed_3").exists());
        assert!(dir.path().join("out/seed_8").exists());
        assert!(!dir.path().join("out/seed_1").exists());
    }

    #[test]
    fn bad_config_maps_to_config_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args(dir.path().join("out"));
        a.config = Some(write_cfg(dir.path(), "n_nodes = 0\n"));
        let err = cmd_run(&a).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        let mut a2 = args(dir.path().join("out2"));
        a2.config = Some(dir.path().join("missing.cfg"));
        let err = cmd_run(&a2).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn compare_reports_zero_delta_on_the_ideal_channel() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args(dir.path().join("out"));
        // Gentle scenario: nobody dies, buffers never overflow, loss 0, so
        // both runs deliver everything and the delta is exactly zero.
        a.config = Some(write_cfg(
            dir.path(),
            "n_nodes = 10\nsim_time_s = 2\nbuffer_capacity = 64\ncompromised_fraction = 0.2\n",
        ));
        cmd_compare(&a).unwrap();
        let overhead =
            std::fs::read_to_string(dir.path().join("out/seed_1/overhead.txt")).unwrap();
        let parsed = crate::report::parse_summary(&overhead);
        assert_eq!(parsed["delivery_ratio_delta"], 0.0);
        assert!(dir.path().join("out/seed_1/baseline/summary.txt").exists());
        assert!(dir.path().join("out/seed_1/secure/summary.txt").exists());
        assert!(dir.path().join("out/aggregate.txt").exists());
    }

    #[test]
    fn same_args_produce_byte_identical_output_trees() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(dir.path(), "n_nodes = 10\nsim_time_s = 2\n");
        for out in ["a", "b"] {
            let mut a = args(dir.path().join(out));
            a.config = Some(cfg.clone());
            a.trace = true;
            cmd_run(&a).unwrap();
        }
        for f in ["seed_1/nodes.csv", "seed_1/accuracy.csv", "seed_1/summary.txt", "seed_1/trace.log", "aggregate.txt"] {
            let fa = std::fs::read(dir.path().join("a").join(f)).unwrap();
            let fb = std::fs::read(dir.path().join("b").join(f)).unwrap();
            assert_eq!(fa, fb, "{f} differs");
        }
    }
}
