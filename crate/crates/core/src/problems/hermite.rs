//! Gauss–Hermite quadrature for `∫ f(z) exp(−z²) dz`.

/// Nodes and weights of the `n`-point rule, nodes in decreasing order.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots are bracketed by a sign-change scan of the orthonormal Hermite
    /// function and polished with Newton steps; weights use the polynomial
    /// derivative at each root, which keeps the tail weights accurate in a
    /// relative sense.
    pub fn new(n: usize) -> Self {
        assert!((1..=400).contains(&n), "supported node counts are 1..=400");
        let nf = n as f64;
        let zmax = (2.0 * nf + 1.0).sqrt() + 1.0;
        let step = 2e-3;
        let mut pos = Vec::with_capacity(n / 2);
        let mut a = if n % 2 == 1 { step * 0.5 } else { 0.0 };
        let mut fa = hermite_function(n, a).0;
        while a < zmax && pos.len() < n / 2 {
            let b = a + step;
            let fb = hermite_function(n, b).0;
            if fa == 0.0 || fa.signum() != fb.signum() {
                pos.push(polish(n, a, b));
            }
            a = b;
            fa = fb;
        }
        assert_eq!(pos.len(), n / 2, "root scan missed nodes");
        let mut nodes: Vec<f64> = pos.iter().rev().copied().collect();
        if n % 2 == 1 {
            nodes.push(0.0);
        }
        nodes.extend(pos.iter().map(|z| -z));
        let weights: Vec<f64> = nodes
            .iter()
            .map(|&z| {
                let pp = (2.0 * nf).sqrt() * hermite_poly(n, z).1;
                2.0 / (pp * pp)
            })
            .collect();
        let log_weights = weights.iter().map(|v| v.ln()).collect();
        Self { nodes, weights, log_weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}

/// Orthonormal Hermite polynomials `(p_n(z), p_{n−1}(z))`, normalised so that
/// `p_k(z) e^{−z²/2}` are orthonormal.
fn hermite_poly(n: usize, z: f64) -> (f64, f64) {
    hermite_recurrence(n, z, std::f64::consts::PI.powf(-0.25))
}

/// The same recurrence started from `π^{−1/4} e^{−z²/2}`, which stays in range
/// far into the tails.
fn hermite_function(n: usize, z: f64) -> (f64, f64) {
    hermite_recurrence(n, z, std::f64::consts::PI.powf(-0.25) * (-0.5 * z * z).exp())
}

fn hermite_recurrence(n: usize, z: f64, p0: f64) -> (f64, f64) {
    let mut p1 = p0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Root of `p_n` inside `[a, b]`: bisection to a tight bracket, then Newton.
fn polish(n: usize, mut a: f64, mut b: f64) -> f64 {
    let fa = hermite_function(n, a).0;
    for _ in 0..30 {
        let m = 0.5 * (a + b);
        let fm = hermite_function(n, m).0;
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let mut z = 0.5 * (a + b);
    let nf = n as f64;
    for _ in 0..5 {
        let (p, pm1) = hermite_poly(n, z);
        let dz = p / ((2.0 * nf).sqrt() * pm1);
        z -= dz;
        if dz.abs() <= 1e-16 * z.abs() {
            break;
        }
    }
    z
}
