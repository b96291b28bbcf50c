//! Batch experiment runner behind the `bosonlight` binary.

pub mod config;
pub mod experiments;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bounds::{self, compute_constants, ConstantsInputs};
use crate::error::Error;
use crate::hhkl::HhklConfig;
pub use config::{Experiment, ExperimentConfig};
use experiments::{Context, Outcome, Row};

/// Version tag written into every CSV header and JSON sidecar.
pub const SCHEMA: &str = "bosonlight-results/1";
pub const COLUMNS: [&str; 7] = [
    "experiment",
    "param_name",
    "param_value",
    "lhs",
    "rhs",
    "satisfied",
    "config_hash",
];

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUND_FAILURE: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_RESOURCE_LIMIT: i32 = 3;
pub const EXIT_NUMERICAL_FAILURE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "bosonlight",
    version,
    about = "Run boson transport, light-cone and gate-protocol experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the bound constants for given γ, J̄, τ, ℓ, t.
    Constants(RunArgs),
    /// Moment bounds on boson transport out of a region.
    Transport(RunArgs),
    /// Light-cone approximation error of a local observable.
    Lr(RunArgs),
    /// Block-decomposition simulation error, truncation error and gate counts.
    Hhkl(RunArgs),
    /// Transfer and CNOT gate protocols.
    Protocol(RunArgs),
    /// Dry-run checks of a config without running it.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir` (default `results`).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for sweep points (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// RNG seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Experiment to validate for; defaults to the config's `experiment`.
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
}

/// Failure of a run, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numeric(Error::InvalidArgument(_) | Error::Unsupported(_))
            | Self::Read { .. } => EXIT_INVALID_CONFIG,
            Self::Numeric(Error::ResourceLimit(_)) => EXIT_RESOURCE_LIMIT,
            Self::Numeric(Error::NumericalFailure(_)) | Self::Write { .. } | Self::Pool(_) => {
                EXIT_NUMERICAL_FAILURE
            }
        }
    }
}

/// Where a finished run put its results.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub config_hash: String,
    pub rows: usize,
    pub violations: usize,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.violations == 0 {
            EXIT_OK
        } else {
            EXIT_BOUND_FAILURE
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID_CONFIG
            } else {
                EXIT_OK
            };
        }
    };
    let (experiment, args) = match cli.command {
        Command::Validate(args) => {
            print!("{}", validate(&args.config, args.experiment));
            return EXIT_OK;
        }
        Command::Constants(a) => (Experiment::Constants, a),
        Command::Transport(a) => (Experiment::Transport, a),
        Command::Lr(a) => (Experiment::Lr, a),
        Command::Hhkl(a) => (Experiment::Hhkl, a),
        Command::Protocol(a) => (Experiment::Protocol, a),
    };
    match run(experiment, &args) {
        Ok(summary) => {
            println!(
                "{}: {} rows, {} violations -> {}",
                experiment.name(),
                summary.rows,
                summary.violations,
                summary.csv.display()
            );
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_config(path: &Path) -> Result<(String, ExperimentConfig), RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let config = ExperimentConfig::parse(&text)?;
    Ok((text, config))
}

/// SHA-256 over the config text and the effective seed.
pub fn config_hash(text: &str, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.update(format!("\nseed={seed}").as_bytes());
    hex::encode(hasher.finalize())
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.12e}")
    }
}

fn format_optional(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

/// The CSV text for `rows`, header comment first.
pub fn render_csv(experiment: Experiment, rows: &[Row], hash: &str) -> Result<String, RunError> {
    let mut out = format!("# {SCHEMA} experiment={}\n", experiment.name());
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| RunError::Write {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e),
    };
    writer.write_record(COLUMNS).map_err(io)?;
    for row in rows {
        let names: Vec<&str> = row.params.iter().map(|(n, _)| n.as_str()).collect();
        let values: Vec<String> = row.params.iter().map(|(_, v)| format_number(*v)).collect();
        writer
            .write_record([
                row.experiment.as_str(),
                &names.join(";"),
                &values.join(";"),
                &format_optional(row.lhs),
                &format_optional(row.rhs),
                if row.satisfied { "true" } else { "false" },
                hash,
            ])
            .map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| io(e.into_error().into()))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

fn print_table(rows: &[Row]) {
    for row in rows {
        let params: Vec<String> = row
            .params
            .iter()
            .map(|(n, v)| format!("{n}={}", format_number(*v)))
            .collect();
        let verdict = match (row.rhs, row.satisfied) {
            (None, _) => String::new(),
            (Some(rhs), ok) => format!("  rhs={rhs:.6e}  {}", if ok { "ok" } else { "VIOLATED" }),
        };
        println!(
            "{:<20} {:<36} lhs={}{}",
            row.experiment,
            params.join(" "),
            row.lhs.map(|v| format!("{v:.6e}")).unwrap_or_default(),
            verdict
        );
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(|source| RunError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs one experiment and writes `<stem>.csv` and `<stem>.json`.
pub fn run(experiment: Experiment, args: &RunArgs) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    let (text, config) = read_config(&args.config)?;
    config.check_for(experiment)?;
    let seed = args.seed.unwrap_or(config.seed);
    let hash = config_hash(&text, seed);
    let dim_limit = config::dimension_limit()?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Error::InvalidArgument("--workers must be at least 1".into()).into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;

    let ctx = Context {
        config: &config,
        seed,
        dim_limit,
    };
    let outcome: Outcome = pool.install(|| match experiment {
        Experiment::Constants => experiments::constants(&ctx),
        Experiment::Transport => experiments::transport(&ctx),
        Experiment::Lr => experiments::lr(&ctx),
        Experiment::Hhkl => experiments::hhkl(&ctx),
        Experiment::Protocol => experiments::protocol(&ctx),
    })?;
    let elapsed = start.elapsed().as_secs_f64();

    let output = config.output.as_ref();
    let dir = args
        .out_dir
        .clone()
        .or_else(|| output.and_then(|o| o.dir.as_ref()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let stem = output
        .and_then(|o| o.stem.clone())
        .unwrap_or_else(|| experiment.name().to_string());
    std::fs::create_dir_all(&dir).map_err(|source| RunError::Write {
        path: dir.clone(),
        source,
    })?;

    print_table(&outcome.rows);
    let violations = outcome.rows.iter().filter(|r| !r.satisfied).count();
    let csv_path = dir.join(format!("{stem}.csv"));
    write_file(&csv_path, &render_csv(experiment, &outcome.rows, &hash)?)?;

    let mut extra = Vec::new();
    for (suffix, contents) in &outcome.files {
        let path = dir.join(format!("{stem}.{suffix}"));
        write_file(&path, contents)?;
        extra.push(path.display().to_string());
    }
    let sidecar = json!({
        "schema": SCHEMA,
        "experiment": experiment.name(),
        "config_hash": hash,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "workers": workers,
        "dimension_limit": dim_limit,
        "config_path": args.config.display().to_string(),
        "config": config,
        "config_text": text,
        "timings": { "total_seconds": elapsed },
        "rows": outcome.rows.len(),
        "violations": violations,
        "files": extra,
        "details": outcome.details,
    });
    let json_path = dir.join(format!("{stem}.json"));
    let rendered =
        serde_json::to_string_pretty(&sidecar).map_err(|e| RunError::Pool(e.to_string()))?;
    write_file(&json_path, &rendered)?;

    Ok(RunSummary {
        csv: csv_path,
        json: json_path,
        config_hash: hash,
        rows: outcome.rows.len(),
        violations,
    })
}

/// Dry-run report: block presence, basis dimension, τ bound and the ℓ
/// condition. Problems are reported as findings, never as errors.
pub fn validate(path: &Path, experiment: Option<Experiment>) -> String {
    let mut report = String::new();
    let mut findings: Vec<String> = Vec::new();

    let config = match read_config(path) {
        Ok((_, c)) => c,
        Err(e) => {
            findings.push(e.to_string());
            return render_findings(report, &findings, None);
        }
    };
    let experiment = experiment.or(config.experiment);
    if let Some(e) = experiment {
        if let Err(err) = config.check_for(e) {
            findings.push(err.to_string());
        }
    }
    let limit = match config::dimension_limit() {
        Ok(l) => l,
        Err(e) => {
            findings.push(e.to_string());
            crate::fock::DEFAULT_DIM_LIMIT
        }
    };

    let lattice = match config
        .lattice
        .as_ref()
        .map(|_| config.lattice())
        .transpose()
    {
        Ok(l) => l,
        Err(e) => {
            findings.push(e.to_string());
            None
        }
    };
    let mut dimension = None;
    if let (Some(l), Some(_)) = (&lattice, &config.basis) {
        match config.estimated_dimension(l.n_sites()) {
            Ok(d) => {
                let _ = writeln!(report, "basis dimension: {d}");
                if d > limit as u128 {
                    findings.push(format!("estimated dimension {d} exceeds the limit {limit}"));
                }
                dimension = Some(d);
            }
            Err(e) => findings.push(e.to_string()),
        }
    }

    if let Some(c) = &config.constants {
        let gamma = c.gamma.or(config.gamma);
        if let Some(gamma) = gamma {
            let max = bounds::tau_max(gamma, c.jbar);
            if !(c.tau > 0.0 && c.tau <= max * (1.0 + 1e-12)) {
                findings.push(format!("tau = {} exceeds 1/(4 gamma Jbar) = {max}", c.tau));
            }
        } else if lattice.is_none() {
            findings.push("missing field `constants.gamma`".into());
        }
    }

    if let Some(l) = &lattice {
        let spec = config
            .hamiltonian
            .as_ref()
            .map(|_| config.hamiltonian(l))
            .transpose();
        let gamma = config.gamma(l);
        match (spec, gamma) {
            (Ok(Some(spec)), Ok(gamma)) => {
                let jbar = spec.max_hopping();
                let tau = bounds::tau_max(gamma, jbar);
                let _ = writeln!(report, "gamma = {gamma}, Jbar = {jbar}, tau_max = {tau}");
                if let Some(t) = &config.transport {
                    findings.extend(transport_finding(t, gamma, jbar, l.dimension(), tau));
                }
                if let Some(lr) = &config.lr {
                    if let Some(t) = lr.t {
                        if t > tau * (1.0 + 1e-12) {
                            findings.push(format!("lr time {t} exceeds tau_max = {tau}"));
                        }
                    }
                }
            }
            (Err(e), _) | (_, Err(e)) => findings.push(e.to_string()),
            (Ok(None), _) => {}
        }
        if let Some(h) = &config.hhkl {
            for &ell in &h.ells {
                let cfg = HhklConfig::new(ell, h.dt, h.t_total);
                if let Err(e) = cfg.slices().and_then(|_| crate::hhkl::blocks(l, ell)) {
                    findings.push(format!("hhkl ell = {ell}: {e}"));
                }
            }
        }
    }

    render_findings(report, &findings, dimension)
}

fn render_findings(mut report: String, findings: &[String], dimension: Option<u128>) -> String {
    for f in findings {
        let _ = writeln!(report, "finding: {f}");
    }
    match (findings.len(), dimension) {
        (0, Some(d)) => {
            let _ = writeln!(report, "ok (dimension {d})");
        }
        (0, None) => report.push_str("ok\n"),
        (n, _) => {
            let _ = writeln!(report, "findings: {n}");
        }
    }
    report
}

fn transport_finding(
    block: &config::TransportBlock,
    gamma: f64,
    jbar: f64,
    dimension: usize,
    tau_max: f64,
) -> Option<String> {
    let times: Vec<f64> = match (&block.times, &block.tau_multiples) {
        (Some(t), _) => t.clone(),
        (None, m) => m
            .clone()
            .unwrap_or_else(|| vec![1.0, 2.0, 3.0])
            .iter()
            .map(|m| m * tau_max)
            .collect(),
    };
    let mut inadmissible = 0;
    let mut total = 0;
    let mut min_r = f64::INFINITY;
    for &t in &times {
        let (tau, steps) = bounds::transport_step(t, tau_max);
        for &r in &block.radii {
            total += 1;
            let ell = (r / steps) as f64;
            let inputs = ConstantsInputs {
                gamma,
                jbar,
                tau,
                dimension,
                ell,
                t,
                r: r as f64,
                boundary_size: 0,
                ell_t_coefficient: 1.0,
            };
            match compute_constants(inputs) {
                Ok(c) if ell >= c.ell_min => {}
                Ok(c) => {
                    inadmissible += 1;
                    min_r = min_r.min(steps as f64 * c.ell_min.ceil());
                }
                Err(e) => return Some(format!("transport t = {t}: {e}")),
            }
        }
    }
    (inadmissible > 0).then(|| {
        format!("ell condition fails for {inadmissible} of {total} (R, t) points; minimal admissible R = {min_r:.3e}")
    })
}
