//! Pointwise error kinds and the mean plus standard-deviation loss.
//!
//! Every reduction is generic over [`Real`], so the same code produces plain
//! values, tape-recorded values for gradients, and jets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Scalar, Tape};
use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("loss term `{0}` has no points")]
    Empty(String),
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("invalid loss setting: {0}")]
    Config(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ErrorKind {
    Squared,
    Absolute,
    Huber { delta: f64 },
}

impl Default for ErrorKind {
    fn default() -> Self {
        ErrorKind::Squared
    }
}

impl ErrorKind {
    pub fn validate(&self) -> Result<(), LossError> {
        if let ErrorKind::Huber { delta } = *self {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(LossError::Config(format!("huber delta must be finite and positive, got {delta}")));
            }
        }
        Ok(())
    }

    /// Error of a residual `e = pred - target`.
    pub fn of<R: Real>(&self, e: R) -> R {
        match *self {
            ErrorKind::Squared => e * e,
            ErrorKind::Absolute => e.abs(),
            ErrorKind::Huber { delta } => {
                let a = e.abs();
                if a.value() <= delta {
                    e * e * 0.5
                } else {
                    (a - delta * 0.5) * delta
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            ErrorKind::Squared => "squared".into(),
            ErrorKind::Absolute => "absolute".into(),
            ErrorKind::Huber { delta } => format!("huber({delta})"),
        }
    }
}

pub fn pointwise_error<R: Real>(pred: R, target: R, kind: ErrorKind) -> R {
    kind.of(pred - target)
}

/// Weights of the standard loss components. Problems with exactly enforced
/// boundary and initial conditions only produce residual terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TermWeights {
    pub initial: f64,
    pub dirichlet: f64,
    pub neumann: f64,
    pub residual: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        Self { initial: 1.0, dirichlet: 1.0, neumann: 1.0, residual: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    pub weights: TermWeights,
    pub error: ErrorKind,
    pub variance_eps: f64,
    pub gpinn_weight: f64,
    /// When false the standard-deviation branch is never evaluated, giving
    /// the classical mean loss.
    pub variance_term: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            weights: TermWeights::default(),
            error: ErrorKind::Squared,
            variance_eps: 1e-12,
            gpinn_weight: 0.0,
            variance_term: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(LossError::Alpha(self.alpha));
        }
        self.error.validate()?;
        let w = self.weights;
        for (name, v) in [
            ("initial weight", w.initial),
            ("dirichlet weight", w.dirichlet),
            ("neumann weight", w.neumann),
            ("residual weight", w.residual),
            ("variance_eps", self.variance_eps),
            ("gpinn_weight", self.gpinn_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(LossError::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Mean and population standard deviation of one term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub combined: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub terms: Vec<TermStats>,
    pub total: f64,
}

fn mean_of<R: Real>(e: &[R]) -> R {
    let mut s = e[0];
    for &v in &e[1..] {
        s = s + v;
    }
    s / e.len() as f64
}

/// Returns `(mean, std, combined)` of `e`; the std slot is `None` when the
/// variance branch is switched off.
fn reduce<R: Real>(e: &[R], alpha: f64, eps: f64, variance_term: bool) -> (R, Option<R>, R) {
    let m = mean_of(e);
    if !variance_term {
        return (m, None, m);
    }
    let mut v = (e[0] - m).square();
    for &x in &e[1..] {
        v = v + (x - m).square();
    }
    let sd = (v / e.len() as f64 + eps).sqrt();
    (m, Some(sd), m * alpha + sd * (1.0 - alpha))
}

/// `α·mean(e) + (1 − α)·sqrt(eps + var(e))` with the population variance.
pub fn mean_std_loss<R: Real>(e: &[R], alpha: f64, eps: f64) -> Result<R, LossError> {
    if e.is_empty() {
        return Err(LossError::Empty("e".into()));
    }
    Ok(reduce(e, alpha, eps, true).2)
}

/// One named loss component: residuals (or data mismatches) and a weight.
pub struct Term<'a, R> {
    pub name: &'a str,
    pub residuals: &'a [R],
    pub weight: f64,
}

/// Applies the error kind to each term's residuals and reduces each term on
/// its own. Returns the weighted total and the per-term diagnostics.
pub fn composite_loss<R: Real>(terms: &[Term<'_, R>], cfg: &LossConfig) -> Result<(R, LossBreakdown), LossError> {
    let mut total: Option<R> = None;
    let mut bd = LossBreakdown::default();
    for t in terms {
        if t.residuals.is_empty() {
            return Err(LossError::Empty(t.name.to_string()));
        }
        let e: Vec<R> = t.residuals.iter().map(|&r| cfg.error.of(r)).collect();
        let (m, sd, c) = reduce(&e, cfg.alpha, cfg.variance_eps, cfg.variance_term);
        let std = match sd {
            Some(s) => s.value(),
            None => population_std(&e.iter().map(|v| v.value()).collect::<Vec<_>>()),
        };
        bd.terms.push(TermStats { name: t.name.to_string(), mean: m.value(), std, combined: c.value(), weight: t.weight });
        let wc = c * t.weight;
        total = Some(match total {
            None => wc,
            Some(acc) => acc + wc,
        });
    }
    let total = total.ok_or_else(|| LossError::Empty("<no terms>".into()))?;
    bd.total = total.value();
    Ok((total, bd))
}

/// Population standard deviation of plain values, for diagnostics.
pub fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Mean over points of the squared coordinate gradient of a residual,
/// `mean_i Σ_d (∂r/∂x_d)²`, one reverse pass per point.
pub fn gpinn_term<F>(residual: F, points: &[Vec<f64>]) -> Result<f64, LossError>
where
    F: for<'t> Fn(&[Scalar<'t>]) -> Scalar<'t>,
{
    if points.is_empty() {
        return Err(LossError::Empty("gpinn".into()));
    }
    let mut tape = Tape::new();
    let mut acc = 0.0;
    for p in points {
        tape.clear();
        let x = tape.vars(p);
        let r = residual(&x);
        acc += tape.grad_values(r, &x)?.iter().map(|g| g * g).sum::<f64>();
    }
    Ok(acc / points.len() as f64)
}
