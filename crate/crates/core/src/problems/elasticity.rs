//! Linear elasticity on the unit square with a manufactured solution. Five
//! networks: displacements `u_x, u_y` and stresses `σ_xx, σ_yy, σ_xy`.

use std::f64::consts::PI;

use super::{Domain, Grid, PdeProblem, ProblemDefaults, ProblemError, Sampling};
use crate::jet::{Jet, Layout};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityParams {
    pub lambda: f64,
    pub mu: f64,
    pub q: f64,
}

impl Default for ElasticityParams {
    fn default() -> Self {
        Self { lambda: 1.0, mu: 0.5, q: 4.0 }
    }
}

/// Body force `(f_x, f_y)` generated by the manufactured displacements.
pub fn body_force<R: Real>(p: &ElasticityParams, x: R, y: R) -> (R, R) {
    let (l, m, q) = (p.lambda, p.mu, p.q);
    let c2x = (x * (2.0 * PI)).cos();
    let s2x = (x * (2.0 * PI)).sin();
    let sx = (x * PI).sin();
    let cx = (x * PI).cos();
    let sy = (y * PI).sin();
    let cy = (y * PI).cos();
    let y2 = y * y;
    let y3 = y2 * y;
    let y4 = y2 * y2;
    let pi2 = PI * PI;
    let fx = (c2x * sy * (4.0 * pi2) - cx * y3 * (PI * q)) * l + (c2x * sy * (9.0 * pi2) - cx * y3 * (PI * q)) * m;
    let fy = (sx * y2 * (-3.0 * q) + s2x * cy * (2.0 * pi2)) * l
        + (sx * y2 * (-6.0 * q) + s2x * cy * (2.0 * pi2) + sx * y4 * (pi2 * q / 4.0)) * m;
    (fx, fy)
}

/// Closed-form manufactured fields.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured(pub ElasticityParams);

impl Manufactured {
    /// `[u_x, u_y, σ_xx, σ_yy, σ_xy]` at `(x, y)`.
    pub fn fields<R: Real>(&self, x: R, y: R) -> [R; 5] {
        let ElasticityParams { lambda: l, mu: m, q } = self.0;
        let sy = (y * PI).sin();
        let sx = (x * PI).sin();
        let y3 = y * y * y;
        let y4 = y3 * y;
        let ux = (x * (2.0 * PI)).cos() * sy;
        let uy = sx * y4 * (q / 4.0);
        let exx = (x * (2.0 * PI)).sin() * sy * (-2.0 * PI);
        let eyy = sx * y3 * q;
        let exy = ((x * (2.0 * PI)).cos() * (y * PI).cos() * PI + (x * PI).cos() * y4 * (PI * q / 4.0)) * 0.5;
        let sxx = exx * (l + 2.0 * m) + eyy * l;
        let syy = exx * l + eyy * (l + 2.0 * m);
        let sxy = exy * (2.0 * m);
        [ux, uy, sxx, syy, sxy]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Elasticity {
    pub params: ElasticityParams,
}

impl PdeProblem for Elasticity {
    fn name(&self) -> &'static str {
        "elasticity"
    }

    fn domain(&self) -> Domain {
        Domain::Rectangle { x: (0.0, 1.0), y: (0.0, 1.0) }
    }

    fn fields(&self) -> &'static [&'static str] {
        &["u_x", "u_y", "sigma_xx", "sigma_yy", "sigma_xy"]
    }

    fn residual_names(&self) -> &'static [&'static str] {
        &["momentum_x", "momentum_y", "constitutive_xx", "constitutive_yy", "constitutive_xy"]
    }

    fn partials(&self) -> &'static Layout {
        Layout::total(2, 1)
    }

    fn lift<R: Real>(&self, field: usize, x: &[R]) -> R {
        let ElasticityParams { lambda, mu, q } = self.params;
        let (px, py) = (x[0], x[1]);
        match field {
            0 => (py * PI).sin(),
            1 => py * (px * PI).sin() * (q / 4.0),
            3 => py * py * py * (px * PI).sin() * ((lambda + 2.0 * mu) * q),
            _ => px.constant_like(0.0),
        }
    }

    fn distance<R: Real>(&self, field: usize, x: &[R]) -> R {
        let (px, py) = (x[0], x[1]);
        let bx = px * (-px + 1.0);
        let by = py * (-py + 1.0);
        match field {
            0 | 1 => bx * by,
            2 => bx,
            3 => by,
            _ => px.constant_like(1.0),
        }
    }

    fn residuals<R: Real>(&self, x: &[R], u: &[Jet<R>]) -> Vec<R> {
        let ElasticityParams { lambda: l, mu: m, .. } = self.params;
        let (ux, uy, sxx, syy, sxy) = (u[0], u[1], u[2], u[3], u[4]);
        let (fx, fy) = body_force(&self.params, x[0], x[1]);
        let exx = ux.d(1, 0);
        let eyy = uy.d(0, 1);
        let exy = (ux.d(0, 1) + uy.d(1, 0)) * 0.5;
        vec![
            sxx.d(1, 0) + sxy.d(0, 1) + fx,
            sxy.d(1, 0) + syy.d(0, 1) + fy,
            sxx.primal() - (exx * (l + 2.0 * m) + eyy * l),
            syy.primal() - (exx * l + eyy * (l + 2.0 * m)),
            sxy.primal() - exy * (2.0 * m),
        ]
    }

    fn reference(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        Ok(Manufactured(self.params).fields(x[0], x[1]).to_vec())
    }

    fn extra_fields(&self) -> &'static [&'static str] {
        &["f_x", "f_y"]
    }

    fn extra_reference(&self, x: &[f64]) -> Vec<f64> {
        let (fx, fy) = body_force(&self.params, x[0], x[1]);
        vec![fx, fy]
    }

    fn defaults(&self) -> ProblemDefaults {
        ProblemDefaults {
            iterations: 10_000,
            n_collocation: 2500,
            sampling: Sampling::UniformRandom,
            alpha: 0.6,
            log_every: 500,
            eval_grid: Grid::new(vec![101, 101]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{layer_dims, DenseNetwork};
    use crate::problems::residuals_at;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect()
    }

    /// Pinned fields with derivatives taken by central differences of the
    /// closed forms.
    #[test]
    fn manufactured_solution_zeroes_residuals_by_fd() {
        let e = Elasticity::default();
        let m = Manufactured(e.params);
        let l = e.partials();
        let h = 1e-5;
        for (x, y) in random_points(200, 1) {
            let c = m.fields(x, y);
            let dx: Vec<f64> = (0..5).map(|k| (m.fields(x + h, y)[k] - m.fields(x - h, y)[k]) / (2.0 * h)).collect();
            let dy: Vec<f64> = (0..5).map(|k| (m.fields(x, y + h)[k] - m.fields(x, y - h)[k]) / (2.0 * h)).collect();
            let u: Vec<Jet<f64>> = (0..5).map(|k| Jet::from_components(l, &[c[k], dx[k], dy[k]])).collect();
            for (i, r) in e.residuals(&[x, y], &u).iter().enumerate() {
                assert!(r.abs() < 1e-6, "residual {i} at ({x}, {y}): {r}");
            }
        }
    }

    #[test]
    fn manufactured_solution_zeroes_residuals_by_jets() {
        let e = Elasticity::default();
        let m = Manufactured(e.params);
        let l = e.partials();
        for (x, y) in random_points(200, 2) {
            let (xj, yj) = (Jet::variable(l, x, 0), Jet::variable(l, y, 1));
            let u = m.fields(xj, yj);
            for r in e.residuals(&[x, y], &u) {
                assert!(r.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn body_force_values() {
        let p = ElasticityParams::default();
        assert_eq!(body_force(&p, 0.0, 0.0), (0.0, 0.0));
        for y in [0.1, 0.5, 0.93] {
            assert!(body_force(&p, 0.0, y).1.abs() < 1e-14);
        }
        let (fx, fy) = body_force(&p, 0.5, 0.5);
        assert!((fx + 8.5 * PI * PI).abs() < 1e-12);
        assert!((fy - (-6.0 + PI * PI / 32.0)).abs() < 1e-12);
        // f = −div σ of the closed-form stresses
        let m = Manufactured(p);
        let h = 1e-5;
        for (x, y) in random_points(50, 3) {
            let d = |k: usize, ax: usize| {
                let (a, b) = if ax == 0 { (m.fields(x + h, y), m.fields(x - h, y)) } else { (m.fields(x, y + h), m.fields(x, y - h)) };
                (a[k] - b[k]) / (2.0 * h)
            };
            let (fx, fy) = body_force(&p, x, y);
            assert!((fx + d(2, 0) + d(4, 1)).abs() < 1e-6);
            assert!((fy + d(4, 0) + d(3, 1)).abs() < 1e-6);
        }
    }

    #[test]
    fn ansatz_essential_conditions() {
        let e = Elasticity::default();
        let m = Manufactured(e.params);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let s: f64 = rng.gen_range(0.0..1.0);
            let n: f64 = rng.gen_range(-1e3..1e3);
            for (x, y) in [(0.0, s), (1.0, s), (s, 0.0), (s, 1.0)] {
                let exact = m.fields(x, y);
                for f in [0, 1] {
                    assert!((e.ansatz(f, &[x, y], n) - exact[f]).abs() < 1e-12, "field {f} at ({x}, {y})");
                }
            }
            assert!(e.ansatz(2, &[0.0, s], n).abs() < 1e-12);
            assert!(e.ansatz(2, &[1.0, s], n).abs() < 1e-12);
            assert!((e.ansatz(3, &[s, 0.0], n) - m.fields(s, 0.0)[3]).abs() < 1e-12);
            assert!((e.ansatz(3, &[s, 1.0], n) - m.fields(s, 1.0)[3]).abs() < 1e-12);
            assert!(e.ansatz(0, &[s, 0.0], n).abs() < 1e-12);
        }
    }

    /// The remainder `(exact − lift) / distance` is finite up to the
    /// boundary, so the manufactured fields lie in the ansatz family.
    #[test]
    fn manufactured_solution_is_representable() {
        let e = Elasticity::default();
        let m = Manufactured(e.params);
        let l = e.partials();
        for (x, y) in random_points(200, 5) {
            let (xj, yj) = (Jet::variable(l, x, 0), Jet::variable(l, y, 1));
            let exact = m.fields(xj, yj);
            let u: Vec<Jet<f64>> = (0..5)
                .map(|f| {
                    let n = (exact[f] - e.lift(f, &[xj, yj])) / e.distance(f, &[xj, yj]);
                    e.ansatz(f, &[xj, yj], n)
                })
                .collect();
            for r in e.residuals(&[x, y], &u) {
                assert!(r.abs() < 1e-6);
            }
        }
        // bounded remainders close to the edges
        for s in [1e-6, 1e-4] {
            for (x, y) in [(s, 0.5), (1.0 - s, 0.3), (0.4, s), (0.7, 1.0 - s)] {
                let ex = m.fields(x, y);
                for f in 0..4 {
                    let n = (ex[f] - e.lift(f, &[x, y])) / e.distance(f, &[x, y]);
                    assert!(n.is_finite() && n.abs() < 1e3, "field {f} at ({x}, {y}): {n}");
                }
            }
        }
    }

    #[test]
    fn zero_networks() {
        let e = Elasticity::default();
        let nets: Vec<DenseNetwork> = (0..5).map(|_| DenseNetwork::zeros(&layer_dims(2, &[20; 5], 1)).unwrap()).collect();
        let r = residuals_at(&e, &nets, &[0.0, 0.0]);
        assert!(r[0].abs() < 1e-14 && r[1].abs() < 1e-14);
        // at y = 0: ε_xx = 0, ε_yy = (Q/4) sin(πx), ε_xy = π/2 from the u_x lift
        let (x, y) = (0.3, 0.0);
        let r = residuals_at(&e, &nets, &[x, y]);
        let s = [e.lift(2, &[x, y]), e.lift(3, &[x, y]), e.lift(4, &[x, y])];
        let eyy = (PI * x).sin();
        assert!((r[2] - (s[0] - eyy)).abs() < 1e-14);
        assert!((r[3] - (s[1] - 2.0 * eyy)).abs() < 1e-14);
        assert!((r[4] - (s[2] - 0.5 * PI)).abs() < 1e-14);
    }
}
