//! `stdpinn`: train physics-informed networks, run loss comparisons and dump
//! reference fields.

mod config;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use stdpinn::problems::{Grid, PdeProblem, ProblemSpec};
use stdpinn::trainer::{Session, TrainConfig};
use stdpinn::with_problem;

use config::ExperimentConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_VAR: &str = "PINN_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "stdpinn", version, about = "Physics-informed network training with a mean/std loss")]
struct Cli {
    /// Overrides the config seed (for sweeps: the seed list).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel sweep cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output directory. Otherwise the config's `out_dir`, then
    /// `$PINN_OUT_DIR`, then `./runs`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// No progress lines on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one configuration and write its run record.
    Run { config: PathBuf },
    /// Train every (variant, collocation count, seed) cell of a config.
    Sweep { config: PathBuf },
    /// Write reference fields of a problem on a grid.
    DumpReference {
        problem: String,
        /// `N` or `NxM`; defaults to the problem's evaluation grid.
        #[arg(long)]
        grid: Option<String>,
        /// Directory for the CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Errors that are the caller's fault exit with 2, everything else with 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => cmd_run(cli, config),
        Command::Sweep { config } => sweep::cmd_sweep(cli, config),
        Command::DumpReference { problem, grid, out } => cmd_dump_reference(cli, problem, grid.as_deref(), out.as_deref()),
    }
}

fn out_root(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| cfg.and_then(|c| c.out_dir.clone()))
        .or_else(|| std::env::var_os(OUT_DIR_VAR).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn load(cli: &Cli, path: &Path) -> Result<(ExperimentConfig, TrainConfig)> {
    let exp = ExperimentConfig::load(path)?;
    let mut cfg = exp.train_config().with_context(|| format!("in config {}", path.display()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok((exp, cfg))
}

fn cmd_run(cli: &Cli, path: &Path) -> Result<()> {
    let (exp, cfg) = load(cli, path)?;
    let spec = ProblemSpec::by_name(&cfg.problem)?;
    let dir = out_root(cli, Some(&exp)).join(stdpinn::trainer::run_id(&cfg));
    with_problem!(spec, p => run_problem(p, cfg, &dir, cli.quiet))?;
    if !cli.quiet {
        eprintln!("wrote {}", dir.display());
    }
    Ok(())
}

fn run_problem<P: PdeProblem>(p: P, cfg: TrainConfig, dir: &Path, quiet: bool) -> Result<()> {
    let mut s = Session::new(p, cfg)?;
    let origin = std::time::Instant::now();
    s.set_clock(Box::new(move || origin.elapsed().as_secs_f64()));
    let fields: Vec<String> = s.record().fields.clone();
    let mut shown = 0;
    let mut report = |s: &Session<P>| {
        for row in &s.record().rows[shown..] {
            if !quiet {
                let errs: Vec<String> =
                    fields.iter().enumerate().map(|(f, n)| format!("{n} l2 {:.3e} linf {:.3e}", row.l2[f], row.linf[f])).collect();
                eprintln!("iter {:>6}  loss {:.6e}  {}", row.iteration, row.total_loss, errs.join("  "));
            }
        }
        shown = s.record().rows.len();
    };
    while !s.is_done() {
        s.step()?;
        report(&s);
    }
    s.finish()?;
    report(&s);
    let nets = s.networks().to_vec();
    let rec = s.record().clone();
    rec.write_all(dir, &nets, Some(s.evaluator()))?;
    Ok(())
}

fn cmd_dump_reference(cli: &Cli, problem: &str, grid: Option<&str>, out: Option<&Path>) -> Result<()> {
    let spec = ProblemSpec::by_name(problem).map_err(|e| UsageError(e.to_string()))?;
    let grid = match grid {
        Some(g) => Grid::parse(g).map_err(|e| UsageError(e.to_string()))?,
        None => spec.defaults().eval_grid,
    };
    if grid.counts.len() != spec.domain().dim() {
        return Err(UsageError(format!("grid {} does not fit the {}-d {} domain", grid.label(), spec.domain().dim(), problem)).into());
    }
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| out_root(cli, None).join("reference"));
    let paths = spec.dump_reference(&grid, &dir)?;
    if !cli.quiet {
        for p in paths {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}
