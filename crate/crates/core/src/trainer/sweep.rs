//! Sweeps over loss variants, collocation counts and seeds.
//!
//! Every cell of one seed starts from the same initial networks, so
//! differences between variants come from the loss alone.

use serde::{Deserialize, Serialize};

use crate::loss::ErrorKind;
use crate::net::DenseNetwork;
use crate::problems::PdeProblem;

use super::{init_networks, train_with, RunRecord, TrainConfig, TrainError};

/// A loss setting compared within a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub alpha: f64,
    pub error: ErrorKind,
    pub gpinn_weight: f64,
    pub variance_term: bool,
}

impl Variant {
    /// Mean plus standard-deviation loss at `alpha` on squared errors.
    pub fn variance(alpha: f64) -> Self {
        Self { label: format!("alpha={alpha}"), alpha, error: ErrorKind::Squared, gpinn_weight: 0.0, variance_term: true }
    }

    /// Classical mean squared residual.
    pub fn mse() -> Self {
        Self { label: "mse".into(), alpha: 1.0, error: ErrorKind::Squared, gpinn_weight: 0.0, variance_term: false }
    }

    /// Mean Huber error.
    pub fn huber(delta: f64) -> Self {
        Self { label: format!("huber(delta={delta})"), alpha: 1.0, error: ErrorKind::Huber { delta }, gpinn_weight: 0.0, variance_term: false }
    }

    /// Mean squared residual plus the squared residual gradient.
    pub fn gpinn(weight: f64) -> Self {
        Self { label: format!("gpinn(w={weight})"), alpha: 1.0, error: ErrorKind::Squared, gpinn_weight: weight, variance_term: false }
    }

    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            error: self.error,
            gpinn_weight: self.gpinn_weight,
            variance_term: self.variance_term,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub variant: Variant,
    pub n_collocation: usize,
    pub seed: u64,
    pub config: TrainConfig,
}

/// Every `(variant, count, seed)` combination over a base configuration.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub base: TrainConfig,
    pub cells: Vec<SweepCell>,
}

impl SweepPlan {
    pub fn new(base: &TrainConfig, variants: &[Variant], counts: &[usize], seeds: &[u64]) -> Result<Self, TrainError> {
        if variants.is_empty() || counts.is_empty() || seeds.is_empty() {
            return Err(TrainError::Config("sweep needs at least one variant, count and seed".into()));
        }
        let mut cells = Vec::with_capacity(variants.len() * counts.len() * seeds.len());
        for &seed in seeds {
            for &n in counts {
                for v in variants {
                    let mut config = v.apply(base);
                    config.n_collocation = n;
                    config.seed = seed;
                    config.validate()?;
                    cells.push(SweepCell { variant: v.clone(), n_collocation: n, seed, config });
                }
            }
        }
        Ok(Self { base: base.clone(), cells })
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.cells.iter().map(|c| c.seed).collect();
        s.dedup();
        s
    }

    /// Shared initial networks of one seed.
    pub fn initial_networks<P: PdeProblem>(&self, p: &P, seed: u64) -> Result<Vec<DenseNetwork>, TrainError> {
        Ok(init_networks(p, &self.base.hidden, seed)?)
    }
}

/// Outcome of one sweep cell; a failed run keeps its error message.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: SweepCell,
    pub outcome: Result<RunRecord, String>,
    pub networks: Option<Vec<DenseNetwork>>,
}

impl CellResult {
    pub fn final_l2(&self) -> Option<Vec<f64>> {
        self.outcome.as_ref().ok().and_then(|r| r.last()).map(|r| r.l2.clone())
    }

    pub fn final_linf(&self) -> Option<Vec<f64>> {
        self.outcome.as_ref().ok().and_then(|r| r.last()).map(|r| r.linf.clone())
    }
}

pub fn run_cell<P: PdeProblem>(problem: P, cell: &SweepCell, init: Vec<DenseNetwork>) -> CellResult {
    match train_with(problem, cell.config.clone(), init) {
        Ok(out) => CellResult { cell: cell.clone(), outcome: Ok(out.record), networks: Some(out.networks) },
        Err(e) => CellResult { cell: cell.clone(), outcome: Err(e.to_string()), networks: None },
    }
}

/// Median of the finite values; `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Seed medians of one `(variant, count)` group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub variant: String,
    pub n_collocation: usize,
    pub runs: usize,
    pub failures: usize,
    pub median_l2: Vec<Option<f64>>,
    pub median_linf: Vec<Option<f64>>,
    pub median_seconds_per_iteration: Option<f64>,
}

pub fn summarize(results: &[CellResult], nfields: usize) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in results {
        let k = (r.cell.variant.label.clone(), r.cell.n_collocation);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(label, n)| {
            let group: Vec<&CellResult> =
                results.iter().filter(|r| r.cell.variant.label == label && r.cell.n_collocation == n).collect();
            let ok: Vec<&RunRecord> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let col = |f: usize, linf: bool| {
                let v: Vec<f64> =
                    ok.iter().filter_map(|r| r.last()).map(|row| if linf { row.linf[f] } else { row.l2[f] }).collect();
                median(&v)
            };
            SummaryRow {
                variant: label,
                n_collocation: n,
                runs: group.len(),
                failures: group.len() - ok.len(),
                median_l2: (0..nfields).map(|f| col(f, false)).collect(),
                median_linf: (0..nfields).map(|f| col(f, true)).collect(),
                median_seconds_per_iteration: median(&ok.iter().map(|r| r.seconds_per_iteration).collect::<Vec<_>>()),
            }
        })
        .collect()
}
