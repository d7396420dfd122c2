//! `u_xx = −4x² sin(x²) + 2 cos(x²)` on `[−2√π, 2√π]` with `u = 1` at both
//! ends.

use std::f64::consts::PI;

use super::{Domain, Grid, PdeProblem, ProblemDefaults, ProblemError, Sampling};
use crate::jet::{Jet, Layout};
use crate::real::Real;

#[derive(Debug, Clone, Copy, Default)]
pub struct Poisson;

pub fn poisson_reference(x: f64) -> f64 {
    (x * x).sin() + 1.0
}

impl Poisson {
    pub fn half_width() -> f64 {
        2.0 * PI.sqrt()
    }

    pub fn source<R: Real>(x: R) -> R {
        let x2 = x * x;
        x2 * x2.sin() * 4.0 - x2.cos() * 2.0
    }
}

impl PdeProblem for Poisson {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn domain(&self) -> Domain {
        let h = Self::half_width();
        Domain::Interval { a: -h, b: h }
    }

    fn fields(&self) -> &'static [&'static str] {
        &["u"]
    }

    fn residual_names(&self) -> &'static [&'static str] {
        &["pde"]
    }

    fn partials(&self) -> &'static Layout {
        Layout::closure(1, &[[2, 0]])
    }

    fn lift<R: Real>(&self, _field: usize, x: &[R]) -> R {
        x[0].constant_like(1.0)
    }

    fn distance<R: Real>(&self, _field: usize, x: &[R]) -> R {
        (x[0] * x[0] - 4.0 * PI) * (-1.0 / (4.0 * PI))
    }

    fn residuals<R: Real>(&self, x: &[R], u: &[Jet<R>]) -> Vec<R> {
        vec![u[0].d(2, 0) + Self::source(x[0])]
    }

    fn reference(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        Ok(vec![poisson_reference(x[0])])
    }

    fn defaults(&self) -> ProblemDefaults {
        ProblemDefaults {
            iterations: 4000,
            n_collocation: 100,
            sampling: Sampling::Equispaced,
            alpha: 0.8,
            log_every: 100,
            eval_grid: Grid::new(vec![1001]),
        }
    }
}
