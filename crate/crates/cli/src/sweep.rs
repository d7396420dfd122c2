//! `sweep`: every cell trains from the initial networks checkpointed once
//! per seed, so variants of one seed differ only in the loss.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use stdpinn::net::{Checkpoint, DenseNetwork};
use stdpinn::problems::{PdeProblem, ProblemSpec};
use stdpinn::trainer::{run_cell, summarize, CellResult, Evaluator, SweepPlan};
use stdpinn::with_problem;

use crate::{load, out_root, Cli, UsageError};

pub fn cmd_sweep(cli: &Cli, path: &Path) -> Result<()> {
    let (exp, base) = load(cli, path)?;
    let variants = exp.variants()?;
    if variants.is_empty() {
        return Err(UsageError("the sweep comparison list is empty; set [sweep] alphas or variants".into()).into());
    }
    let section = exp.sweep.clone().unwrap_or_default();
    let counts = if section.counts.is_empty() { vec![base.n_collocation] } else { section.counts.clone() };
    let seeds = match cli.seed {
        Some(s) => vec![s],
        None if section.seeds.is_empty() => vec![base.seed],
        None => section.seeds.clone(),
    };
    let plan = SweepPlan::new(&base, &variants, &counts, &seeds).context("invalid sweep")?;
    let root = out_root(cli, Some(&exp));
    let spec = ProblemSpec::by_name(&base.problem)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build()?;
    let results = with_problem!(spec.clone(), p => pool.install(|| run_plan(p, &plan, &root, cli.quiet)))?;

    let nfields = spec.fields().len();
    write_comparison(&root.join("comparison.csv"), spec.fields(), &results)?;
    write_summary(&root.join("summary.csv"), spec.fields(), &summarize(&results, nfields))?;
    let failed = results.iter().filter(|r| r.outcome.is_err()).count();
    if !cli.quiet {
        eprintln!("{} runs, {} failed; wrote {}", results.len(), failed, root.display());
    }
    Ok(())
}

fn init_dir(root: &Path, seed: u64) -> PathBuf {
    root.join("init").join(format!("seed{seed}"))
}

/// Writes the initial networks of `seed` and reads them back, so the file is
/// what every cell starts from.
fn checkpoint_init<P: PdeProblem>(p: &P, plan: &SweepPlan, root: &Path, seed: u64) -> Result<Vec<DenseNetwork>> {
    let dir = init_dir(root, seed);
    std::fs::create_dir_all(&dir)?;
    let nets = plan.initial_networks(p, seed)?;
    let mut out = Vec::with_capacity(nets.len());
    for (field, net) in p.fields().iter().zip(&nets) {
        let path = dir.join(format!("checkpoint_{field}.json"));
        std::fs::write(&path, Checkpoint::from_network(net, seed).to_json())?;
        let text = std::fs::read_to_string(&path)?;
        out.push(Checkpoint::from_json(&text)?.to_network()?);
    }
    Ok(out)
}

fn run_plan<P: PdeProblem + Clone>(p: P, plan: &SweepPlan, root: &Path, quiet: bool) -> Result<Vec<CellResult>> {
    let mut inits = Vec::new();
    for seed in plan.seeds() {
        inits.push((seed, checkpoint_init(&p, plan, root, seed)?));
    }
    let results: Vec<Result<CellResult>> = plan
        .cells
        .par_iter()
        .map(|cell| {
            let init = inits.iter().find(|(s, _)| *s == cell.seed).expect("every seed is initialized").1.clone();
            let res = run_cell(p.clone(), cell, init);
            let dir = root.join("runs").join(stdpinn::trainer::run_id(&cell.config));
            match (&res.outcome, &res.networks) {
                (Ok(rec), Some(nets)) => {
                    let mut ev = Evaluator::new(&p, &cell.config.eval_grid)?;
                    rec.write_all(&dir, nets, Some(&mut ev))?;
                    if !quiet {
                        let last = rec.last().expect("a finished run has rows");
                        eprintln!("done {} l2 {:?} ({:.2} ms/iter)", rec.run_id, last.l2, 1e3 * rec.seconds_per_iteration);
                    }
                }
                (Err(msg), _) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("error.txt"), format!("{msg}\n"))?;
                    if !quiet {
                        eprintln!("failed {}: {msg}", dir.display());
                    }
                }
                _ => {}
            }
            Ok(res)
        })
        .collect();
    results.into_iter().collect()
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn write_comparison(path: &Path, fields: &[&str], results: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["variant", "alpha", "error", "gpinn_weight", "variance_term", "n_collocation", "seed", "status", "iterations", "seconds_per_iteration"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for f in fields {
        header.push(format!("{f}_l2"));
        header.push(format!("{f}_linf"));
    }
    header.push("message".into());
    w.write_record(&header)?;
    for r in results {
        let c = &r.cell;
        let mut rec = vec![
            c.variant.label.clone(),
            format!("{:?}", c.config.alpha),
            c.config.error.label(),
            format!("{:?}", c.config.gpinn_weight),
            c.config.variance_term.to_string(),
            c.n_collocation.to_string(),
            c.seed.to_string(),
        ];
        match &r.outcome {
            Ok(run) => {
                let last = run.last().expect("a finished run has rows");
                rec.extend(["ok".to_string(), last.iteration.to_string(), format!("{:?}", run.seconds_per_iteration)]);
                for (a, b) in last.l2.iter().zip(&last.linf) {
                    rec.push(format!("{a:?}"));
                    rec.push(format!("{b:?}"));
                }
                rec.push(String::new());
            }
            Err(msg) => {
                rec.extend(["failed".to_string(), String::new(), String::new()]);
                rec.extend(std::iter::repeat_n(String::new(), 2 * fields.len()));
                rec.push(msg.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary(path: &Path, fields: &[&str], rows: &[stdpinn::trainer::SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["variant", "n_collocation", "runs", "failures"].iter().map(|s| s.to_string()).collect();
    for f in fields {
        header.push(format!("{f}_median_l2"));
        header.push(format!("{f}_median_linf"));
    }
    header.push("median_seconds_per_iteration".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.variant.clone(), r.n_collocation.to_string(), r.runs.to_string(), r.failures.to_string()];
        for (a, b) in r.median_l2.iter().zip(&r.median_linf) {
            rec.push(num(*a));
            rec.push(num(*b));
        }
        rec.push(num(r.median_seconds_per_iteration));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
