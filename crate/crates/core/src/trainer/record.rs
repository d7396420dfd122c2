//! Run records and their on-disk form.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::net::{Checkpoint, DenseNetwork};
use crate::problems::write_field_csv;

use super::{Evaluator, TrainConfig, TrainError};

/// How the L2 column is normalized; written into every metadata file.
pub const NORMALIZATION: &str = "l2 = sqrt(mean over grid of (pred - ref)^2); linf = max over grid of |pred - ref|";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub total_loss: f64,
    /// `(mean, std)` per loss term.
    pub terms: Vec<(f64, f64)>,
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermLogRow {
    pub iteration: usize,
    pub term: String,
    pub mean: f64,
    pub std: f64,
    pub combined: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: TrainConfig,
    pub fields: Vec<String>,
    pub terms: Vec<String>,
    pub rows: Vec<MetricsRow>,
    pub term_log: Vec<TermLogRow>,
    pub train_seconds: f64,
    pub seconds_per_iteration: f64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    run_id: &'a str,
    implementation: &'a str,
    version: &'a str,
    config: &'a TrainConfig,
    fields: &'a [String],
    terms: &'a [String],
    normalization: &'a str,
    reference: &'a str,
    rng: &'a str,
    iterations_completed: usize,
    train_seconds: f64,
    seconds_per_iteration: f64,
    final_l2: Vec<f64>,
    final_linf: Vec<f64>,
    checkpoints: Vec<String>,
}

fn reference_tag(problem: &str) -> &'static str {
    match problem {
        "poisson" => "closed form sin(x^2) + 1",
        "burgers" => "Cole-Hopf integral by Gauss-Hermite quadrature (100 nodes, 200 near the shock)",
        "elasticity" => "manufactured closed form",
        _ => "problem-defined",
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

impl RunRecord {
    pub fn new(cfg: &TrainConfig, fields: Vec<String>, terms: Vec<String>) -> Self {
        let run_id = run_id(cfg);
        Self { run_id, config: cfg.clone(), fields, terms, rows: Vec::new(), term_log: Vec::new(), train_seconds: 0.0, seconds_per_iteration: 0.0 }
    }

    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    /// Column names of `metrics.csv`.
    pub fn metrics_header(&self) -> Vec<String> {
        let mut h = vec!["iteration".to_string(), "total_loss".to_string()];
        for t in &self.terms {
            h.push(format!("{t}_mean"));
            h.push(format!("{t}_std"));
        }
        for f in &self.fields {
            h.push(format!("{f}_l2"));
            h.push(format!("{f}_linf"));
        }
        h.push("wall_seconds".into());
        h
    }

    pub fn write_metrics_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.metrics_header())?;
        for r in &self.rows {
            let mut rec = vec![r.iteration.to_string(), num(r.total_loss)];
            for &(m, s) in &r.terms {
                rec.push(num(m));
                rec.push(num(s));
            }
            for (a, b) in r.l2.iter().zip(&r.linf) {
                rec.push(num(*a));
                rec.push(num(*b));
            }
            rec.push(num(r.wall_seconds));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_loss_terms_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["run_id", "iteration", "term", "mean", "std", "combined", "weight"])?;
        for t in &self.term_log {
            w.write_record([
                self.run_id.clone(),
                t.iteration.to_string(),
                t.term.clone(),
                num(t.mean),
                num(t.std),
                num(t.combined),
                num(t.weight),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes metadata, metrics, loss terms, one checkpoint per network and,
    /// when an evaluator is given, prediction dumps on its grid.
    pub fn write_all(&self, dir: &Path, nets: &[DenseNetwork], eval: Option<&mut Evaluator>) -> Result<Vec<PathBuf>, TrainError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut ckpts = Vec::new();
        for (f, net) in self.fields.iter().zip(nets) {
            let name = format!("checkpoint_{f}.json");
            let p = dir.join(&name);
            std::fs::write(&p, Checkpoint::from_network(net, self.config.seed).to_json())?;
            ckpts.push(name);
            written.push(p);
        }
        let last = self.rows.last();
        let meta = Metadata {
            run_id: &self.run_id,
            implementation: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: &self.config,
            fields: &self.fields,
            terms: &self.terms,
            normalization: NORMALIZATION,
            reference: reference_tag(&self.config.problem),
            rng: crate::net::RNG_NAME,
            iterations_completed: last.map_or(0, |r| r.iteration),
            train_seconds: self.train_seconds,
            seconds_per_iteration: self.seconds_per_iteration,
            final_l2: last.map(|r| r.l2.clone()).unwrap_or_default(),
            final_linf: last.map(|r| r.linf.clone()).unwrap_or_default(),
            checkpoints: ckpts,
        };
        let p = dir.join("metadata.json");
        let mut f = std::fs::File::create(&p)?;
        serde_json::to_writer_pretty(&mut f, &meta)?;
        f.write_all(b"\n")?;
        written.push(p);
        let p = dir.join("metrics.csv");
        self.write_metrics_csv(&p)?;
        written.push(p);
        let p = dir.join("loss_terms.csv");
        self.write_loss_terms_csv(&p)?;
        written.push(p);
        if let Some(ev) = eval {
            let pred = ev.predict(nets);
            let coords = crate::problems::ProblemSpec::by_name(&self.config.problem)
                .map(|s| s.domain().coord_names())
                .unwrap_or(if ev.dim() == 1 { &["x"] } else { &["x", "y"] });
            for (f, vals) in self.fields.iter().zip(&pred) {
                let p = dir.join(format!("prediction_{f}.csv"));
                write_field_csv(&p, coords, f, ev.points(), vals)?;
                written.push(p);
            }
        }
        Ok(written)
    }
}

/// Stable identifier built from the settings that distinguish runs.
pub fn run_id(cfg: &TrainConfig) -> String {
    let mut id = format!("{}-a{}-{}-n{}-s{}", cfg.problem, cfg.alpha, cfg.error.label(), cfg.n_collocation, cfg.seed);
    if cfg.gpinn_weight > 0.0 {
        id.push_str(&format!("-gpinn{}", cfg.gpinn_weight));
    }
    if !cfg.variance_term {
        id.push_str("-mse");
    }
    id.replace(['(', ')'], "")
}

/// Reads `metrics.csv` back as a header plus rows of numbers.
pub fn read_metrics_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), TrainError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
        rows.push(row.map_err(|e| TrainError::Config(format!("bad number in {}: {e}", path.display())))?);
    }
    Ok((header, rows))
}
