//! Truncated multivariate Taylor jets in one or two variables.
//!
//! A [`Jet`] carries a value together with a fixed set of its partial
//! derivatives (stored as derivatives, not Taylor coefficients). The set of
//! tracked multi-indices is described by a [`Layout`], which must be
//! downward closed: if `∂²/∂x²` is tracked, so are `∂/∂x` and the value.
//!
//! Jets implement [`Real`], so the same residual code that runs on plain
//! `f64` or tape scalars also propagates derivatives with respect to the
//! point coordinates. Products follow the Leibniz rule and univariate
//! functions follow Faà di Bruno's formula over set partitions.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Mutex;

use crate::real::Real;

/// Largest number of tracked partials (total order 3 in two variables).
pub const MAX_COMPONENTS: usize = 10;
/// Largest total derivative order.
pub const MAX_ORDER: usize = 3;

/// A multi-index `[i, j]` meaning `∂^{i+j} / ∂x^i ∂y^j`.
pub type MultiIndex = [u8; 2];

/// One Faà di Bruno term: `coeff · f^(blocks.len())(a₀) · Π a[block]`.
#[derive(Debug, Clone)]
pub struct PartitionTerm {
    pub coeff: f64,
    pub blocks: Vec<usize>,
}

#[derive(Debug)]
pub struct Layout {
    dim: usize,
    multi: Vec<MultiIndex>,
    lookup: [[Option<u8>; MAX_ORDER + 2]; MAX_ORDER + 2],
    /// `(out, a, b, binomial weight)` triples of the Leibniz rule.
    products: Vec<(u8, u8, u8, f64)>,
    /// Per component, the Faà di Bruno terms (empty for the value).
    partitions: Vec<Vec<PartitionTerm>>,
    max_order: usize,
}

static REGISTRY: Mutex<Vec<&'static Layout>> = Mutex::new(Vec::new());

impl Layout {
    /// The downward closure of `indices` in `dim` variables.
    pub fn closure(dim: usize, indices: &[MultiIndex]) -> &'static Layout {
        assert!(dim == 1 || dim == 2, "jets support one or two variables");
        let mut set: Vec<MultiIndex> = vec![[0, 0]];
        for &[i, j] in indices {
            assert!(dim == 2 || j == 0, "multi-index {:?} uses a second variable", [i, j]);
            assert!((i + j) as usize <= MAX_ORDER, "derivative order above {}", MAX_ORDER);
            for a in 0..=i {
                for b in 0..=j {
                    if !set.contains(&[a, b]) {
                        set.push([a, b]);
                    }
                }
            }
        }
        set.sort_by_key(|&[i, j]| (i + j, std::cmp::Reverse(i)));
        let mut reg = REGISTRY.lock().unwrap();
        if let Some(l) = reg.iter().find(|l| l.dim == dim && l.multi == set) {
            return l;
        }
        let layout: &'static Layout = Box::leak(Box::new(Layout::build(dim, set)));
        reg.push(layout);
        layout
    }

    /// All partials up to total `order`.
    pub fn total(dim: usize, order: usize) -> &'static Layout {
        let mut idx = Vec::new();
        for i in 0..=order as u8 {
            if dim == 1 {
                idx.push([i, 0]);
            } else {
                for j in 0..=(order as u8 - i) {
                    idx.push([i, j]);
                }
            }
        }
        Self::closure(dim, &idx)
    }

    /// The layout holding every index of `self` shifted by each unit vector,
    /// i.e. what a field must carry so that first coordinate derivatives of
    /// expressions over `self` are available.
    pub fn raised(&self) -> &'static Layout {
        let mut idx = self.multi.clone();
        for &[i, j] in &self.multi {
            idx.push([i + 1, j]);
            if self.dim == 2 {
                idx.push([i, j + 1]);
            }
        }
        Self::closure(self.dim, &idx)
    }

    fn build(dim: usize, multi: Vec<MultiIndex>) -> Layout {
        assert!(multi.len() <= MAX_COMPONENTS);
        let mut lookup = [[None; MAX_ORDER + 2]; MAX_ORDER + 2];
        for (k, &[i, j]) in multi.iter().enumerate() {
            lookup[i as usize][j as usize] = Some(k as u8);
        }
        let at = |i: u8, j: u8| lookup[i as usize][j as usize].expect("layout is downward closed");

        let mut products = Vec::new();
        for (k, &[i, j]) in multi.iter().enumerate() {
            for a in 0..=i {
                for b in 0..=j {
                    let w = binomial(i, a) * binomial(j, b);
                    products.push((k as u8, at(a, b), at(i - a, j - b), w));
                }
            }
        }

        let mut partitions = Vec::with_capacity(multi.len());
        for &[i, j] in &multi {
            let labels: Vec<u8> = std::iter::repeat(0u8)
                .take(i as usize)
                .chain(std::iter::repeat(1u8).take(j as usize))
                .collect();
            let mut terms: Vec<PartitionTerm> = Vec::new();
            for blocks in set_partitions(labels.len()) {
                let mut comps: Vec<usize> = blocks
                    .iter()
                    .map(|block| {
                        let xi = block.iter().filter(|&&p| labels[p] == 0).count() as u8;
                        let yi = block.len() as u8 - xi;
                        at(xi, yi) as usize
                    })
                    .collect();
                comps.sort_unstable();
                match terms.iter_mut().find(|t| t.blocks == comps) {
                    Some(t) => t.coeff += 1.0,
                    None => terms.push(PartitionTerm {
                        coeff: 1.0,
                        blocks: comps,
                    }),
                }
            }
            partitions.push(terms);
        }

        let max_order = multi.iter().map(|&[i, j]| (i + j) as usize).max().unwrap_or(0);
        Layout {
            dim,
            multi,
            lookup,
            products,
            partitions,
            max_order,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.multi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multi.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.multi
    }

    pub fn position(&self, idx: MultiIndex) -> Option<usize> {
        let (i, j) = (idx[0] as usize, idx[1] as usize);
        if i > MAX_ORDER + 1 || j > MAX_ORDER + 1 {
            return None;
        }
        self.lookup[i][j].map(|k| k as usize)
    }

    pub fn products(&self) -> &[(u8, u8, u8, f64)] {
        &self.products
    }

    pub fn partitions(&self, comp: usize) -> &[PartitionTerm] {
        &self.partitions[comp]
    }
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut r = 1.0;
    for m in 0..k {
        r = r * (n - m) as f64 / (m + 1) as f64;
    }
    r
}

/// All set partitions of `{0, .., n-1}` as lists of blocks.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for mut p in set_partitions(n - 1) {
        for b in 0..p.len() {
            let mut q = p.clone();
            q[b].push(n - 1);
            out.push(q);
        }
        p.push(vec![n - 1]);
        out.push(p);
    }
    out
}

/// A value with a fixed set of partial derivatives.
#[derive(Clone, Copy)]
pub struct Jet<R> {
    layout: &'static Layout,
    c: [R; MAX_COMPONENTS],
}

impl<R: std::fmt::Debug> std::fmt::Debug for Jet<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map()
            .entries(self.layout.multi.iter().zip(&self.c[..self.layout.len()]))
            .finish()
    }
}

impl<R: Real> Jet<R> {
    pub fn from_components(layout: &'static Layout, comps: &[R]) -> Self {
        assert_eq!(comps.len(), layout.len(), "component count does not match layout");
        let c = std::array::from_fn(|k| if k < comps.len() { comps[k] } else { comps[0] });
        Jet { layout, c }
    }

    /// A constant: value `v`, every derivative zero.
    pub fn constant(layout: &'static Layout, v: R) -> Self {
        let zero = v.constant_like(0.0);
        let c = std::array::from_fn(|k| if k == 0 { v } else { zero });
        Jet { layout, c }
    }

    /// The coordinate `var` evaluated at `v`: unit first derivative in its
    /// own direction.
    pub fn variable(layout: &'static Layout, v: R, var: usize) -> Self {
        let mut j = Self::constant(layout, v);
        let mut unit = [0u8; 2];
        unit[var] = 1;
        if let Some(k) = layout.position(unit) {
            j.c[k] = v.constant_like(1.0);
        }
        j
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn components(&self) -> &[R] {
        &self.c[..self.layout.len()]
    }

    /// The partial derivative `∂^{i+j} / ∂x^i ∂y^j`.
    ///
    /// Panics when the layout does not track it.
    pub fn d(&self, i: u8, j: u8) -> R {
        match self.layout.position([i, j]) {
            Some(k) => self.c[k],
            None => panic!("partial {:?} is not tracked by this jet", [i, j]),
        }
    }

    pub fn try_d(&self, i: u8, j: u8) -> Option<R> {
        self.layout.position([i, j]).map(|k| self.c[k])
    }

    pub fn primal(&self) -> R {
        self.c[0]
    }

    /// Re-packages a jet as an `outer` jet whose components are `inner`
    /// jets: component `S` of the result holds `∂^S u` together with its
    /// derivatives along `inner`. `self` must track every `S + T`.
    pub fn nest(&self, outer: &'static Layout, inner: &'static Layout) -> Jet<Jet<R>> {
        assert_eq!(outer.dim, self.layout.dim);
        assert_eq!(inner.dim, self.layout.dim);
        let comps: Vec<Jet<R>> = outer
            .multi
            .iter()
            .map(|&[i, j]| {
                let c: Vec<R> = inner
                    .multi
                    .iter()
                    .map(|&[a, b]| self.d(i + a, j + b))
                    .collect();
                Jet::from_components(inner, &c)
            })
            .collect();
        Jet::from_components(outer, &comps)
    }

    /// Composition `f(self)` given `f` and its derivatives at the primal
    /// value, `derivs[k] = f^(k)(a₀)`, for `k = 0..=max_order`.
    pub fn compose(&self, derivs: &[R]) -> Self {
        let l = self.layout;
        assert!(derivs.len() > l.max_order);
        let mut out = *self;
        out.c[0] = derivs[0];
        for k in 1..l.len() {
            let mut acc: Option<R> = None;
            for term in &l.partitions[k] {
                let mut t = derivs[term.blocks.len()];
                for &b in &term.blocks {
                    t = t * self.c[b];
                }
                if term.coeff != 1.0 {
                    t = t * term.coeff;
                }
                acc = Some(match acc {
                    Some(a) => a + t,
                    None => t,
                });
            }
            out.c[k] = acc.expect("every derivative has at least one partition");
        }
        out
    }

    fn zip(self, rhs: Self, f: impl Fn(R, R) -> R) -> Self {
        assert!(
            std::ptr::eq(self.layout, rhs.layout),
            "jets with different layouts cannot be combined"
        );
        let mut out = self;
        for k in 0..self.layout.len() {
            out.c[k] = f(self.c[k], rhs.c[k]);
        }
        out
    }

    fn map(self, f: impl Fn(R) -> R) -> Self {
        let mut out = self;
        for k in 0..self.layout.len() {
            out.c[k] = f(self.c[k]);
        }
        out
    }

    fn recip(self) -> Self {
        let a = self.c[0];
        let inv = a.constant_like(1.0) / a;
        let mut d = [inv; MAX_ORDER + 1];
        let mut fact = -1.0;
        for k in 1..=self.layout.max_order {
            d[k] = d[k - 1] * inv * fact;
            fact -= 1.0;
        }
        // d[k] = (-1)^k k! / a^{k+1}
        self.compose(&d[..=self.layout.max_order])
    }
}

impl<R: Real> Add for Jet<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<R: Real> Sub for Jet<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<R: Real> Mul for Jet<R> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        assert!(
            std::ptr::eq(self.layout, rhs.layout),
            "jets with different layouts cannot be combined"
        );
        let mut acc: [Option<R>; MAX_COMPONENTS] = [None; MAX_COMPONENTS];
        for &(k, a, b, w) in &self.layout.products {
            let mut t = self.c[a as usize] * rhs.c[b as usize];
            if w != 1.0 {
                t = t * w;
            }
            let slot = &mut acc[k as usize];
            *slot = Some(match *slot {
                Some(s) => s + t,
                None => t,
            });
        }
        let mut out = self;
        for k in 0..self.layout.len() {
            out.c[k] = acc[k].expect("product covers every component");
        }
        out
    }
}

impl<R: Real> Div for Jet<R> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<R: Real> Neg for Jet<R> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|a| -a)
    }
}

impl<R: Real> Add<f64> for Jet<R> {
    type Output = Self;
    fn add(mut self, k: f64) -> Self {
        self.c[0] = self.c[0] + k;
        self
    }
}

impl<R: Real> Sub<f64> for Jet<R> {
    type Output = Self;
    fn sub(mut self, k: f64) -> Self {
        self.c[0] = self.c[0] - k;
        self
    }
}

impl<R: Real> Mul<f64> for Jet<R> {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.map(|a| a * k)
    }
}

impl<R: Real> Div<f64> for Jet<R> {
    type Output = Self;
    fn div(self, k: f64) -> Self {
        self.map(|a| a / k)
    }
}

impl<R: Real> Real for Jet<R> {
    fn constant_like(&self, c: f64) -> Self {
        Jet::constant(self.layout, self.c[0].constant_like(c))
    }

    fn value(&self) -> f64 {
        self.c[0].value()
    }

    fn sin(self) -> Self {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        self.compose(&[s, c, -s, -c][..=self.layout.max_order])
    }

    fn cos(self) -> Self {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        self.compose(&[c, -s, -c, s][..=self.layout.max_order])
    }

    fn exp(self) -> Self {
        let e = self.c[0].exp();
        self.compose(&[e; MAX_ORDER + 1][..=self.layout.max_order])
    }

    fn tanh(self) -> Self {
        let t = self.c[0].tanh();
        let t2 = t * t;
        let one = t.constant_like(1.0);
        let d1 = one - t2;
        let d2 = (t * t2 - t) * 2.0;
        let d3 = t2 * 8.0 - t2 * t2 * 6.0 - 2.0;
        self.compose(&[t, d1, d2, d3][..=self.layout.max_order])
    }

    fn sqrt(self) -> Self {
        let s = self.c[0].sqrt();
        let inv = s.constant_like(1.0) / s;
        let inv2 = inv * inv;
        let d1 = inv * 0.5;
        let d2 = d1 * inv2 * -0.5;
        let d3 = d2 * inv2 * -1.5;
        self.compose(&[s, d1, d2, d3][..=self.layout.max_order])
    }

    fn abs(self) -> Self {
        let a = self.c[0];
        let sign = if a.value() > 0.0 {
            1.0
        } else if a.value() < 0.0 {
            -1.0
        } else {
            0.0
        };
        let zero = a.constant_like(0.0);
        self.compose(&[a.abs(), a.constant_like(sign), zero, zero][..=self.layout.max_order])
    }

    fn powi(self, n: i32) -> Self {
        let a = self.c[0];
        let mut d = [a.constant_like(0.0); MAX_ORDER + 1];
        let mut coeff = 1.0;
        for (k, slot) in d.iter_mut().enumerate().take(self.layout.max_order + 1) {
            let e = n - k as i32;
            if coeff != 0.0 {
                *slot = a.powi(e) * coeff;
            }
            coeff *= e as f64;
        }
        self.compose(&d[..=self.layout.max_order])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn fd_partial(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, idx: MultiIndex, h: f64) -> f64 {
        // nested central differences
        match idx {
            [0, 0] => f(x, y),
            [i, j] if i > 0 => {
                let g = |a, b| fd_partial(f, a, b, [i - 1, j], h);
                (g(x + h, y) - g(x - h, y)) / (2.0 * h)
            }
            [i, j] => {
                let g = |a, b| fd_partial(f, a, b, [i, j - 1], h);
                (g(x, y + h) - g(x, y - h)) / (2.0 * h)
            }
        }
    }

    #[test]
    fn layouts_are_downward_closed_and_cached() {
        let l = Layout::closure(2, &[[2, 0], [0, 1]]);
        assert_eq!(l.indices(), &[[0, 0], [1, 0], [0, 1], [2, 0]]);
        assert!(std::ptr::eq(l, Layout::closure(2, &[[2, 0], [0, 1], [1, 0]])));
        assert_eq!(Layout::total(2, 2).len(), 6);
        assert_eq!(Layout::total(1, 3).len(), 4);
        let r = l.raised();
        for idx in [[3, 0], [2, 1], [1, 1], [0, 2]] {
            assert!(r.position(idx).is_some());
        }
        assert_eq!(r.len(), 8);
    }

    #[test]
    fn partition_counts_match_bell_numbers() {
        let l = Layout::total(1, 3);
        // d³ f(a) = f''' a'^3 + 3 f'' a' a'' + f' a'''
        let terms = l.partitions(3);
        let coeffs: Vec<f64> = terms.iter().map(|t| t.coeff).collect();
        assert_eq!(coeffs.iter().sum::<f64>(), 5.0);
        assert_eq!(terms.len(), 3);
    }

    #[test]
    fn composite_function_matches_finite_differences() {
        let l = Layout::total(2, 3);
        let (x0, y0) = (0.31, -0.47);
        let f = |x: f64, y: f64| ((x * y).sin() + x.tanh() * y.exp()) / (1.5 + (x * x).cos()) + (y * y + 1.0).sqrt();
        let x = Jet::variable(l, x0, 0);
        let y = Jet::variable(l, y0, 1);
        let j = ((x * y).sin() + x.tanh() * y.exp()) / ((x * x).cos() + 1.5) + (y * y + 1.0).sqrt();
        for (k, &idx) in l.indices().iter().enumerate() {
            let fd = fd_partial(&f, x0, y0, idx, 1e-3);
            let tol = [1e-12, 1e-6, 1e-5, 1e-3][(idx[0] + idx[1]) as usize];
            assert!(
                (j.components()[k] - fd).abs() < tol * (1.0 + fd.abs()),
                "{:?}: jet {} fd {}",
                idx,
                j.components()[k],
                fd
            );
        }
    }

    #[test]
    fn jets_over_tape_scalars_match_nested_gradients() {
        let l = Layout::total(1, 3);
        let tape = Tape::new();
        let x = tape.var(0.7);
        let y = (x.powi(3) * 0.5 - x).tanh() * x.sin();
        let d1 = tape.grad(y, &[x]).unwrap()[0];
        let d2 = tape.grad(d1, &[x]).unwrap()[0];
        let d3 = tape.grad(d2, &[x]).unwrap()[0];
        let xj = Jet::variable(l, 0.7f64, 0);
        let j = (xj.powi(3) * 0.5 - xj).tanh() * xj.sin();
        let want = [y.value(), d1.value(), d2.value(), d3.value()];
        for k in 0..4 {
            assert!((j.components()[k] - want[k]).abs() < 1e-12, "order {k}");
        }
    }

    #[test]
    fn nesting_exposes_coordinate_derivatives() {
        let l = Layout::total(2, 2);
        let x = Jet::variable(l, 0.2, 0);
        let y = Jet::variable(l, 0.9, 1);
        let u = x * x * y;
        let inner = Layout::total(2, 1);
        let outer = Layout::total(2, 1);
        let n = u.nest(outer, inner);
        // component ∂x of the outer jet carries (u_x, u_xx, u_xy)
        let ux = n.d(1, 0);
        assert!((ux.d(0, 0) - 2.0 * 0.2 * 0.9).abs() < 1e-15);
        assert!((ux.d(1, 0) - 2.0 * 0.9).abs() < 1e-15);
        assert!((ux.d(0, 1) - 2.0 * 0.2).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "not tracked")]
    fn missing_partial_panics() {
        let l = Layout::total(1, 1);
        let x = Jet::variable(l, 1.0, 0);
        let _ = x.d(2, 0);
    }
}
