//! Collocation sampling, the training loop, error metrics and run records.

mod objective;
mod record;
mod session;
mod sweep;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use objective::{Evaluation, Objective};
pub use record::{read_metrics_csv, run_id, MetricsRow, RunRecord, TermLogRow, NORMALIZATION};
pub use session::{train, train_with, Evaluator, Session, TrainOutput};
pub use sweep::{median, run_cell, summarize, CellResult, SummaryRow, SweepCell, SweepPlan, Variant};

use crate::autodiff::AutodiffError;
use crate::loss::{ErrorKind, LossConfig, LossError, TermWeights};
use crate::net::{layer_dims, xavier_init_stream, DenseNetwork, NetError};
use crate::optim::{AdamConfig, OptimError};
use crate::problems::{Domain, Grid, PdeProblem, ProblemError, ProblemSpec, Sampling};

/// Generator stream used for collocation sampling; network `f` uses stream `f`.
pub const SAMPLING_STREAM: u64 = 1000;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at iteration {iteration} in term `{term}`")]
    NonFiniteLoss { iteration: usize, term: String },
    #[error("iteration {iteration}: {source}")]
    Optim { iteration: usize, source: OptimError },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub problem: String,
    pub alpha: f64,
    pub error: ErrorKind,
    pub iterations: usize,
    pub n_collocation: usize,
    /// Data points; always 0 here because every problem enforces its
    /// boundary and initial conditions exactly.
    pub n_data: usize,
    pub sampling: Sampling,
    pub seed: u64,
    pub eval_grid: Grid,
    pub log_every: usize,
    pub gpinn_weight: f64,
    pub variance_eps: f64,
    pub variance_term: bool,
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    pub weights: TermWeights,
}

impl TrainConfig {
    /// Documented defaults of a named problem.
    pub fn for_problem(name: &str) -> Result<Self, TrainError> {
        let spec = ProblemSpec::by_name(name)?;
        let d = spec.defaults();
        Ok(Self {
            problem: spec.name().to_string(),
            alpha: d.alpha,
            error: ErrorKind::Squared,
            iterations: d.iterations,
            n_collocation: d.n_collocation,
            n_data: 0,
            sampling: d.sampling,
            seed: 0,
            eval_grid: d.eval_grid,
            log_every: d.log_every,
            gpinn_weight: 0.0,
            variance_eps: 1e-12,
            variance_term: true,
            hidden: vec![20; 5],
            adam: AdamConfig::default(),
            weights: TermWeights::default(),
        })
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            alpha: self.alpha,
            weights: self.weights,
            error: self.error,
            variance_eps: self.variance_eps,
            gpinn_weight: self.gpinn_weight,
            variance_term: self.variance_term,
        }
    }

    /// Checks everything that does not depend on the problem implementation.
    pub fn validate_for(&self, domain: &Domain) -> Result<(), TrainError> {
        self.loss().validate()?;
        self.adam.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        let bad = |m: String| Err(TrainError::Config(m));
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        if self.n_collocation < 1 {
            return bad("n_collocation must be at least 1".into());
        }
        if self.log_every < 1 {
            return bad("log_every must be at least 1".into());
        }
        if self.n_data != 0 {
            return bad(format!(
                "n_data = {}: boundary and initial conditions are enforced exactly, so there is no data term",
                self.n_data
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden widths must be non-empty and positive, got {:?}", self.hidden));
        }
        if self.eval_grid.counts.len() != domain.dim() || self.eval_grid.is_empty() {
            return bad(format!("eval grid {} does not fit a {}-d domain", self.eval_grid.label(), domain.dim()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<ProblemSpec, TrainError> {
        let spec = ProblemSpec::by_name(&self.problem)?;
        self.validate_for(&spec.domain())?;
        Ok(spec)
    }
}

/// Collocation points, row-major `n × dim`.
///
/// Equispaced: `n` points including both ends on an interval, otherwise a
/// tensor grid with `⌈√n⌉` points per axis truncated to the first `n`.
/// Uniform-random: i.i.d. uniform over the domain from the given seed.
pub fn sample_collocation(domain: &Domain, n: usize, strategy: Sampling, seed: u64) -> Vec<f64> {
    let ranges = domain.ranges();
    match strategy {
        Sampling::Equispaced => {
            if ranges.len() == 1 {
                crate::problems::linspace(ranges[0].0, ranges[0].1, n)
            } else {
                let m = (n as f64).sqrt().ceil() as usize;
                let mut pts = Grid::new(vec![m; ranges.len()]).points(domain).expect("grid matches domain");
                pts.truncate(n * ranges.len());
                pts
            }
        }
        Sampling::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(SAMPLING_STREAM);
            let dists: Vec<Uniform<f64>> = ranges.iter().map(|&(a, b)| Uniform::new(a, b)).collect();
            let mut pts = Vec::with_capacity(n * ranges.len());
            for _ in 0..n {
                for d in &dists {
                    pts.push(d.sample(&mut rng));
                }
            }
            pts
        }
    }
}

/// One network per field, field `f` initialized from stream `f` of `seed`.
pub fn init_networks<P: PdeProblem>(p: &P, hidden: &[usize], seed: u64) -> Result<Vec<DenseNetwork>, NetError> {
    let dims = layer_dims(p.domain().dim(), hidden, 1);
    (0..p.fields().len()).map(|f| xavier_init_stream(&dims, seed, f as u64)).collect()
}

/// Root-mean-square of `pred − reference`.
pub fn l2_error(pred: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(pred.len(), reference.len());
    assert!(!pred.is_empty(), "empty evaluation grid");
    let s: f64 = pred.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    (s / pred.len() as f64).sqrt()
}

/// Maximum of `|pred − reference|`.
pub fn linf_error(pred: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(pred.len(), reference.len());
    assert!(!pred.is_empty(), "empty evaluation grid");
    pred.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn equispaced_interval_and_rectangle() {
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        assert_eq!(sample_collocation(&d, 3, Sampling::Equispaced, 0), vec![0.0, 0.5, 1.0]);
        let r = Domain::Rectangle { x: (0.0, 1.0), y: (0.0, 1.0) };
        let p = sample_collocation(&r, 10, Sampling::Equispaced, 0);
        assert_eq!(p.len(), 20);
        assert_eq!(&p[..4], &[0.0, 0.0, 0.0, 1.0 / 3.0]);
    }

    #[test]
    fn random_sampling_deterministic_and_centered() {
        let d = Domain::SpaceTime { x: (-1.0, 1.0), t: (0.0, 1.0) };
        let a = sample_collocation(&d, 10_000, Sampling::UniformRandom, 42);
        let b = sample_collocation(&d, 10_000, Sampling::UniformRandom, 42);
        assert_eq!(a, b);
        assert_ne!(a, sample_collocation(&d, 10_000, Sampling::UniformRandom, 43));
        let n = 10_000.0;
        let mx = a.chunks(2).map(|p| p[0]).sum::<f64>() / n;
        let mt = a.chunks(2).map(|p| p[1]).sum::<f64>() / n;
        // σ of the mean: (b − a)/√12/√n
        assert!((mx - 0.0).abs() < 3.0 * 2.0 / 12f64.sqrt() / 100.0);
        assert!((mt - 0.5).abs() < 3.0 * 1.0 / 12f64.sqrt() / 100.0);
        assert!(a.chunks(2).all(|p| d.contains(p)));
    }

    #[test]
    fn error_norms() {
        let r = vec![0.3, -1.0, 2.0];
        assert_eq!(l2_error(&r, &r), 0.0);
        assert_eq!(linf_error(&r, &r), 0.0);
        let shifted: Vec<f64> = r.iter().map(|v| v + 0.25).collect();
        assert!((l2_error(&shifted, &r) - 0.25).abs() < 1e-15);
        let mut spike = r.clone();
        spike[1] += 3.0;
        assert_eq!(linf_error(&spike, &r), 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = 0.01;
        let base: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.01).sin()).collect();
        let noisy: Vec<f64> = base.iter().map(|v| v + rho * 3f64.sqrt() * rng.gen_range(-1.0..1.0)).collect();
        assert!((l2_error(&noisy, &base) / rho - 1.0).abs() < 0.05);
        assert!(linf_error(&noisy, &base) >= l2_error(&noisy, &base));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::for_problem("poisson").unwrap();
        assert_eq!((c.iterations, c.n_collocation, c.alpha), (4000, 100, 0.8));
        assert!(c.validate().is_ok());
        c.alpha = 1.3;
        assert!(c.validate().is_err());
        c.alpha = 0.5;
        c.n_data = 10;
        assert!(c.validate().is_err());
        c.n_data = 0;
        c.eval_grid = Grid::new(vec![10, 10]);
        assert!(c.validate().is_err());
        assert!(TrainConfig::for_problem("heat").is_err());
    }
}
