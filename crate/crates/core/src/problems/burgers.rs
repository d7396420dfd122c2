//! Viscous Burgers: `u_t + u u_x = ν u_xx` on `[−1, 1] × [0, 1]`,
//! `u(x, 0) = −sin(πx)`, `u(±1, t) = 0`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use super::{Domain, GaussHermite, Grid, PdeProblem, ProblemDefaults, ProblemError, Sampling};
use crate::jet::{Jet, Layout};
use crate::real::Real;

pub const NU: f64 = 0.01 / PI;

/// Cole–Hopf solution evaluated with the given Gauss–Hermite rule after the
/// substitution `η = 2√(νt) z`. Sums run in log space.
pub fn burgers_reference(x: f64, t: f64, gh: &GaussHermite) -> Result<f64, ProblemError> {
    if t == 0.0 {
        return Ok(-(PI * x).sin());
    }
    let s = 2.0 * (NU * t).sqrt();
    let k = 1.0 / (2.0 * PI * NU);
    let logs: Vec<f64> = gh
        .nodes
        .iter()
        .zip(&gh.log_weights)
        .map(|(&z, &lw)| lw - k * (PI * (x - s * z)).cos())
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (&z, &l) in gh.nodes.iter().zip(&logs) {
        let e = (l - m).exp();
        num += (PI * (x - s * z)).sin() * e;
        den += e;
    }
    let u = -num / den;
    if !(den > 0.0 && u.is_finite()) {
        return Err(ProblemError::Degenerate { point: vec![x, t] });
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct Burgers {
    rules: Arc<[OnceLock<GaussHermite>; 2]>,
}

impl Default for Burgers {
    fn default() -> Self {
        Self::new()
    }
}

impl Burgers {
    pub const NODES: usize = 100;
    pub const NODES_NEAR_SHOCK: usize = 200;

    pub fn new() -> Self {
        Self { rules: Arc::new([OnceLock::new(), OnceLock::new()]) }
    }

    pub fn near_shock(x: f64, t: f64) -> bool {
        t >= 0.75 && x.abs() <= 0.05
    }

    /// Reference with the default node count, escalated near the shock.
    pub fn reference_value(&self, x: f64, t: f64) -> Result<f64, ProblemError> {
        let gh = if Self::near_shock(x, t) {
            self.rules[1].get_or_init(|| GaussHermite::new(Self::NODES_NEAR_SHOCK))
        } else {
            self.rules[0].get_or_init(|| GaussHermite::new(Self::NODES))
        };
        burgers_reference(x, t, gh)
    }
}

impl PdeProblem for Burgers {
    fn name(&self) -> &'static str {
        "burgers"
    }

    fn domain(&self) -> Domain {
        Domain::SpaceTime { x: (-1.0, 1.0), t: (0.0, 1.0) }
    }

    fn fields(&self) -> &'static [&'static str] {
        &["u"]
    }

    fn residual_names(&self) -> &'static [&'static str] {
        &["pde"]
    }

    fn partials(&self) -> &'static Layout {
        Layout::closure(2, &[[2, 0], [0, 1]])
    }

    fn lift<R: Real>(&self, _field: usize, x: &[R]) -> R {
        -(x[0] * PI).sin()
    }

    fn distance<R: Real>(&self, _field: usize, x: &[R]) -> R {
        x[1] * (-(x[0] * x[0]) + 1.0)
    }

    fn residuals<R: Real>(&self, _x: &[R], u: &[Jet<R>]) -> Vec<R> {
        let u = u[0];
        vec![u.d(0, 1) + u.primal() * u.d(1, 0) - u.d(2, 0) * NU]
    }

    fn reference(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        Ok(vec![self.reference_value(x[0], x[1])?])
    }

    fn defaults(&self) -> ProblemDefaults {
        ProblemDefaults {
            iterations: 5000,
            n_collocation: 10_000,
            sampling: Sampling::UniformRandom,
            alpha: 0.8,
            log_every: 100,
            eval_grid: Grid::new(vec![256, 101]),
        }
    }
}
