use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cov3d::acceptance::{self, CRITERIA};
use cov3d::output::{write_csv, Metadata};
use cov3d::sweep::{fmt, run_fig1, run_fig2, run_fig3, CsvRow};
use cov3d::{ExperimentConfig, RunError};
use cov3d_core::analytic::{coverage_bounds, db_to_linear, interference_laplace_eval};
use cov3d_core::DensityConfig;

#[derive(Parser)]
#[command(name = "cov3d", version, about = "Coverage of 3-D Poisson cellular networks with LOS/NLOS links")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (all cores when absent).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Monte-Carlo trials per coverage point.
    #[arg(long, global = true)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// AP activity probability against AP intensity.
    Fig1,
    /// Link LOS probability of the n-th nearest active AP.
    Fig2,
    /// Coverage bounds and simulated coverage against AP intensity.
    Fig3,
    /// Laplace transform of the interference at one point.
    Laplace {
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        /// Serving distance, meters.
        #[arg(long)]
        r: f64,
        /// Active AP intensity, per cubic meter.
        #[arg(long)]
        lambda_active: f64,
    },
    /// Coverage bounds at one operating point.
    Bounds {
        #[arg(long)]
        lambda_ap: f64,
        #[arg(long)]
        lambda_ue: f64,
        /// SIR threshold; defaults to the configured one.
        #[arg(long, allow_hyphen_values = true)]
        theta_db: Option<f64>,
    },
    /// Run the acceptance suite.
    Acceptance {
        /// List the criteria without running them.
        #[arg(long)]
        list: bool,
        /// Comma-separated criterion ids, e.g. P1,A4.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
}

struct LaplaceRow {
    s: f64,
    r: f64,
    lambda_active: f64,
    value: f64,
    abs_error: f64,
}

impl CsvRow for LaplaceRow {
    const HEADER: &'static [&'static str] = &["s", "r", "lambda_active", "laplace", "abs_error"];
    fn record(&self) -> Vec<String> {
        [self.s, self.r, self.lambda_active, self.value, self.abs_error].map(fmt).to_vec()
    }
}

struct BoundsRow {
    lambda_ap: f64,
    lambda_ue: f64,
    theta_db: f64,
    lower: f64,
    upper: f64,
    lower_error: f64,
    upper_error: f64,
}

impl CsvRow for BoundsRow {
    const HEADER: &'static [&'static str] =
        &["lambda_ap", "lambda_ue", "theta_db", "cov_lower", "cov_upper", "lower_error", "upper_error"];
    fn record(&self) -> Vec<String> {
        [self.lambda_ap, self.lambda_ue, self.theta_db, self.lower, self.upper, self.lower_error, self.upper_error]
            .map(fmt)
            .to_vec()
    }
}

fn load_config(g: &Global) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = g.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(g: &Global) -> Result<Box<dyn Write>, RunError> {
    Ok(match &g.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_rows<R: CsvRow>(g: &Global, cfg: &ExperimentConfig, command: &str, rows: &[R]) -> Result<(), RunError> {
    let meta = Metadata { command: command.to_string(), seed: cfg.seed, config_hash: cfg.hash() };
    write_csv(output(g)?, &meta, rows)
}

fn run(cli: Cli) -> Result<(), RunError> {
    let g = &cli.global;
    if let Command::Acceptance { list: true, .. } = cli.command {
        for c in CRITERIA {
            println!("{} {}", c.id, c.title);
        }
        return Ok(());
    }
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(RunError::invalid("threads", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Io(e.to_string()))?;
    }
    let cfg = load_config(g)?;
    match cli.command {
        Command::Fig1 => write_rows(g, &cfg, "fig1", &run_fig1(&cfg)?),
        Command::Fig2 => write_rows(g, &cfg, "fig2", &run_fig2(&cfg)?),
        Command::Fig3 => write_rows(g, &cfg, "fig3", &run_fig3(&cfg)?),
        Command::Laplace { s, r, lambda_active } => {
            let e = interference_laplace_eval(s, r, lambda_active, &cfg.channel.params(), &cfg.quadrature.settings())?;
            let row = LaplaceRow { s, r, lambda_active, value: e.value, abs_error: e.abs_error };
            write_rows(g, &cfg, "laplace", &[row])
        }
        Command::Bounds { lambda_ap, lambda_ue, theta_db } => {
            let theta_db = theta_db.unwrap_or(cfg.theta_db);
            let d = DensityConfig::new(lambda_ap, lambda_ue)?;
            let b = coverage_bounds(db_to_linear(theta_db), &d, &cfg.channel.params(), &cfg.quadrature.settings())?;
            let row = BoundsRow {
                lambda_ap,
                lambda_ue,
                theta_db,
                lower: b.lower,
                upper: b.upper,
                lower_error: b.lower_diagnostics.total_error,
                upper_error: b.upper_diagnostics.total_error,
            };
            write_rows(g, &cfg, "bounds", &[row])
        }
        Command::Acceptance { only, .. } => {
            let mut out = output(g)?;
            let report = acceptance::run_with(&cfg, only.as_deref(), |o| {
                // progress goes out as each criterion finishes
                let _ = writeln!(out, "{}", o.line());
                for c in &o.checks {
                    let _ = writeln!(out, "    {} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
                }
                let _ = out.flush();
            })?;
            if report.passed() {
                Ok(())
            } else {
                Err(RunError::Acceptance(format!("failed {}", report.failed_ids().join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cov3d: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
