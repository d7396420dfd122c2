//! Tape-based reverse-mode automatic differentiation over `f64` scalars.
//!
//! Every operation on a [`Scalar`] appends a node to the owning [`Tape`].
//! Gradients come in two flavours:
//!
//! * [`Tape::grad_values`] sweeps the tape once with plain `f64` adjoints.
//! * [`Tape::grad`] records the adjoint sweep itself on the same tape, so the
//!   returned derivatives are again [`Scalar`]s and can be differentiated
//!   further (reverse-over-reverse). This is how second and third input
//!   derivatives of a network, and parameter gradients of losses built from
//!   them, are obtained.
//!
//! Domain violations (division by zero, square root of a negative number)
//! and non-finite intermediates do not propagate silently: the first one is
//! latched on the tape and every later extraction reports it.
//!
//! ```
//! use stdpinn::autodiff::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.var(2.0);
//! let y = x * x * x;
//! let dy = tape.grad(y, &[x]).unwrap()[0];
//! let d2y = tape.grad(dy, &[x]).unwrap()[0];
//! assert_eq!(dy.value(), 12.0);
//! assert_eq!(d2y.value(), 12.0);
//! ```

use std::cell::{Cell, RefCell};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::real::Real;

/// Maximum number of nested differentiable gradient passes.
pub const MAX_NESTING: u8 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("domain violation in `{op}` at node {node}: {detail}")]
    Domain {
        node: usize,
        op: &'static str,
        detail: &'static str,
    },
    #[error("non-finite value produced by `{op}` at node {node}")]
    NonFinite { node: usize, op: &'static str },
    #[error("non-finite adjoint while back-propagating through `{op}` at node {node}")]
    NonFiniteAdjoint { node: usize, op: &'static str },
    #[error("nesting depth {depth} exceeds the maximum of {max}")]
    NestingTooDeep { depth: u8, max: u8 },
    #[error("operation `{op}` expects {expected} argument(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

/// The primitive operations a tape can record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Exp,
    Tanh,
    PowI(i32),
    Sqrt,
    Abs,
    /// `a + k` for a constant `k`.
    Offset(f64),
    /// `a * k` for a constant `k`.
    Scale(f64),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Tanh => "tanh",
            Op::PowI(_) => "powi",
            Op::Sqrt => "sqrt",
            Op::Abs => "abs",
            Op::Offset(_) => "offset",
            Op::Scale(_) => "scale",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Op::Leaf => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    a: u32,
    b: u32,
    value: f64,
    level: u8,
}

/// An append-only recording context.
///
/// A tape is single-threaded. Independent tapes can live on different
/// threads at the same time.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    fault: Cell<Option<AutodiffError>>,
    backward_level: Cell<u8>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
            fault: Cell::new(None),
            backward_level: Cell::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every node and any latched fault, keeping the allocation.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
        self.fault.set(None);
        self.backward_level.set(0);
    }

    /// The first fault recorded on this tape, if any.
    pub fn fault(&self) -> Option<AutodiffError> {
        let f = self.fault.take();
        self.fault.set(f.clone());
        f
    }

    pub fn check(&self) -> Result<()> {
        match self.fault() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// An independent variable.
    pub fn var(&self, value: f64) -> Scalar<'_> {
        self.leaf(value)
    }

    /// A constant: a leaf nothing is differentiated with respect to.
    pub fn lift(&self, c: f64) -> Scalar<'_> {
        self.leaf(c)
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Scalar<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn leaf(&self, value: f64) -> Scalar<'_> {
        self.push(Op::Leaf, 0, 0, value, 0)
    }

    fn latch(&self, err: AutodiffError) {
        let cur = self.fault.take();
        self.fault.set(Some(cur.unwrap_or(err)));
    }

    fn push(&self, op: Op, a: u32, b: u32, value: f64, level: u8) -> Scalar<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < u32::MAX as usize, "tape exceeds u32 node indices");
        if !value.is_finite() {
            drop(nodes);
            self.latch(AutodiffError::NonFinite {
                node: idx,
                op: op.name(),
            });
            nodes = self.nodes.borrow_mut();
        }
        nodes.push(Node {
            op,
            a,
            b,
            value,
            level: level.max(self.backward_level.get()),
        });
        Scalar {
            tape: self,
            idx: idx as u32,
        }
    }

    fn node(&self, idx: u32) -> Node {
        self.nodes.borrow()[idx as usize]
    }

    fn unary(&self, op: Op, a: u32) -> Scalar<'_> {
        let na = self.node(a);
        let x = na.value;
        let value = match op {
            Op::Neg => -x,
            Op::Sin => x.sin(),
            Op::Cos => x.cos(),
            Op::Exp => x.exp(),
            Op::Tanh => x.tanh(),
            Op::PowI(n) => x.powi(n),
            Op::Sqrt => {
                if x < 0.0 {
                    self.latch(AutodiffError::Domain {
                        node: self.len(),
                        op: "sqrt",
                        detail: "negative argument",
                    });
                }
                x.sqrt()
            }
            Op::Abs => x.abs(),
            Op::Offset(k) => x + k,
            Op::Scale(k) => x * k,
            _ => unreachable!("{:?} is not unary", op),
        };
        self.push(op, a, a, value, na.level)
    }

    fn binary(&self, op: Op, a: u32, b: u32) -> Scalar<'_> {
        let (na, nb) = {
            let nodes = self.nodes.borrow();
            (nodes[a as usize], nodes[b as usize])
        };
        let (x, y) = (na.value, nb.value);
        let value = match op {
            Op::Add => x + y,
            Op::Sub => x - y,
            Op::Mul => x * y,
            Op::Div => {
                if y == 0.0 {
                    self.latch(AutodiffError::Domain {
                        node: self.len(),
                        op: "div",
                        detail: "zero denominator",
                    });
                }
                x / y
            }
            _ => unreachable!("{:?} is not binary", op),
        };
        self.push(op, a, b, value, na.level.max(nb.level))
    }

    /// Plain-`f64` gradient of `y` with respect to `wrt`.
    pub fn grad_values(&self, y: Scalar<'_>, wrt: &[Scalar<'_>]) -> Result<Vec<f64>> {
        self.check()?;
        for w in wrt.iter().chain(std::iter::once(&y)) {
            assert_same_tape(self, w.tape);
        }
        let lo = match wrt.iter().map(|w| w.idx).min() {
            Some(lo) => lo,
            None => return Ok(Vec::new()),
        };
        if lo > y.idx {
            return Ok(vec![0.0; wrt.len()]);
        }
        let nodes = self.nodes.borrow();
        let base = lo as usize;
        let mut adj = vec![0.0f64; y.idx as usize - base + 1];
        *adj.last_mut().unwrap() = 1.0;
        for i in (base..=y.idx as usize).rev() {
            let g = adj[i - base];
            if g == 0.0 {
                continue;
            }
            let n = nodes[i];
            if !g.is_finite() {
                return Err(AutodiffError::NonFiniteAdjoint {
                    node: i,
                    op: n.op.name(),
                });
            }
            let (a, b) = (n.a as usize, n.b as usize);
            let va = nodes[a].value;
            let (da, db) = match n.op {
                Op::Leaf => continue,
                Op::Add => (g, g),
                Op::Sub => (g, -g),
                Op::Mul => (g * nodes[b].value, g * va),
                Op::Div => {
                    let vb = nodes[b].value;
                    (g / vb, -g * n.value / vb)
                }
                Op::Neg => (-g, 0.0),
                Op::Sin => (g * va.cos(), 0.0),
                Op::Cos => (-g * va.sin(), 0.0),
                Op::Exp => (g * n.value, 0.0),
                Op::Tanh => (g * (1.0 - n.value * n.value), 0.0),
                Op::PowI(k) => {
                    if k == 0 {
                        (0.0, 0.0)
                    } else {
                        (g * k as f64 * va.powi(k - 1), 0.0)
                    }
                }
                Op::Sqrt => (g / (2.0 * n.value), 0.0),
                Op::Abs => (g * sign(va), 0.0),
                Op::Offset(_) => (g, 0.0),
                Op::Scale(k) => (g * k, 0.0),
            };
            if a >= base {
                adj[a - base] += da;
            }
            if n.op.arity() == 2 && b >= base {
                adj[b - base] += db;
            }
        }
        let mut out = Vec::with_capacity(wrt.len());
        for w in wrt {
            let g = adj[w.idx as usize - base];
            if !g.is_finite() {
                return Err(AutodiffError::NonFiniteAdjoint {
                    node: w.idx as usize,
                    op: nodes[w.idx as usize].op.name(),
                });
            }
            out.push(g);
        }
        Ok(out)
    }

    /// Differentiable gradient: the adjoint sweep is recorded on this tape,
    /// so the results can be differentiated again.
    pub fn grad<'t>(&'t self, y: Scalar<'t>, wrt: &[Scalar<'t>]) -> Result<Vec<Scalar<'t>>> {
        self.check()?;
        for w in wrt.iter().chain(std::iter::once(&y)) {
            assert_same_tape(self, w.tape);
        }
        let lo = match wrt.iter().map(|w| w.idx).min() {
            Some(lo) => lo,
            None => return Ok(Vec::new()),
        };
        if lo > y.idx {
            return Ok(wrt.iter().map(|_| self.lift(0.0)).collect());
        }
        let depth = self.node(y.idx).level + 1;
        if depth > MAX_NESTING {
            return Err(AutodiffError::NestingTooDeep {
                depth,
                max: MAX_NESTING,
            });
        }
        let saved = self.backward_level.replace(depth);
        let base = lo as usize;
        let mut adj: Vec<Option<Scalar<'t>>> = vec![None; y.idx as usize - base + 1];
        *adj.last_mut().unwrap() = Some(self.lift(1.0));
        let accumulate = |adj: &mut Vec<Option<Scalar<'t>>>, p: u32, c: Scalar<'t>| {
            let p = p as usize;
            if p >= base {
                let slot = &mut adj[p - base];
                *slot = Some(match *slot {
                    Some(prev) => prev + c,
                    None => c,
                });
            }
        };
        for i in (base..=y.idx as usize).rev() {
            let g = match adj[i - base] {
                Some(g) => g,
                None => continue,
            };
            let n = self.node(i as u32);
            let a = Scalar { tape: self, idx: n.a };
            let b = Scalar { tape: self, idx: n.b };
            let c = Scalar {
                tape: self,
                idx: i as u32,
            };
            match n.op {
                Op::Leaf => {}
                Op::Add => {
                    accumulate(&mut adj, n.a, g);
                    accumulate(&mut adj, n.b, g);
                }
                Op::Sub => {
                    accumulate(&mut adj, n.a, g);
                    accumulate(&mut adj, n.b, -g);
                }
                Op::Mul => {
                    accumulate(&mut adj, n.a, g * b);
                    accumulate(&mut adj, n.b, g * a);
                }
                Op::Div => {
                    accumulate(&mut adj, n.a, g / b);
                    accumulate(&mut adj, n.b, -(g * c / b));
                }
                Op::Neg => accumulate(&mut adj, n.a, -g),
                Op::Sin => accumulate(&mut adj, n.a, g * a.cos()),
                Op::Cos => accumulate(&mut adj, n.a, -(g * a.sin())),
                Op::Exp => accumulate(&mut adj, n.a, g * c),
                Op::Tanh => accumulate(&mut adj, n.a, g * (1.0 - c * c)),
                Op::PowI(k) => {
                    if k != 0 {
                        accumulate(&mut adj, n.a, g * a.powi(k - 1) * k as f64)
                    }
                }
                Op::Sqrt => accumulate(&mut adj, n.a, g / (c * 2.0)),
                Op::Abs => accumulate(&mut adj, n.a, g * sign(a.value())),
                Op::Offset(_) => accumulate(&mut adj, n.a, g),
                Op::Scale(k) => accumulate(&mut adj, n.a, g * k),
            }
        }
        self.backward_level.set(saved);
        self.check()?;
        Ok(wrt
            .iter()
            .map(|w| adj[w.idx as usize - base].unwrap_or_else(|| self.lift(0.0)))
            .collect())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn assert_same_tape(a: &Tape, b: &Tape) {
    assert!(
        std::ptr::eq(a, b),
        "scalars from different recording contexts cannot be combined"
    );
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Scalar<'t> {
    tape: &'t Tape,
    idx: u32,
}

impl fmt::Debug for Scalar<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar(#{} = {})", self.idx, self.value())
    }
}

impl<'t> Scalar<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn index(&self) -> usize {
        self.idx as usize
    }

    pub fn value(&self) -> f64 {
        self.tape.node(self.idx).value
    }

    /// The value, or the fault latched on the tape.
    pub fn checked_value(&self) -> Result<f64> {
        self.tape.check()?;
        Ok(self.value())
    }

    pub fn try_div(self, rhs: Scalar<'t>) -> Result<Scalar<'t>> {
        apply(Op::Div, &[self, rhs])
    }

    pub fn try_sqrt(self) -> Result<Scalar<'t>> {
        apply(Op::Sqrt, &[self])
    }
}

/// Applies a primitive operation, reporting domain violations directly
/// instead of latching them.
pub fn apply<'t>(op: Op, args: &[Scalar<'t>]) -> Result<Scalar<'t>> {
    let expected = op.arity();
    if args.len() != expected || op == Op::Leaf {
        return Err(AutodiffError::Arity {
            op: op.name(),
            expected,
            got: args.len(),
        });
    }
    let tape = args[0].tape;
    for a in &args[1..] {
        assert_same_tape(tape, a.tape);
    }
    match op {
        Op::Div if args[1].value() == 0.0 => {
            return Err(AutodiffError::Domain {
                node: tape.len(),
                op: "div",
                detail: "zero denominator",
            })
        }
        Op::Sqrt if args[0].value() < 0.0 => {
            return Err(AutodiffError::Domain {
                node: tape.len(),
                op: "sqrt",
                detail: "negative argument",
            })
        }
        _ => {}
    }
    let out = if expected == 2 {
        tape.binary(op, args[0].idx, args[1].idx)
    } else {
        tape.unary(op, args[0].idx)
    };
    tape.check()?;
    Ok(out)
}

/// Gradient of `f` at `x`, on a fresh tape.
pub fn gradient<F>(f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: for<'t> Fn(&'t Tape, &[Scalar<'t>]) -> Scalar<'t>,
{
    let tape = Tape::new();
    let vars = tape.vars(x);
    let y = f(&tape, &vars);
    tape.grad_values(y, &vars)
}

/// Gradient of `f` at `x` inside an existing recording context. The
/// components are themselves differentiable.
pub fn gradient_in<'t, F>(tape: &'t Tape, f: F, x: &[Scalar<'t>]) -> Result<Vec<Scalar<'t>>>
where
    F: FnOnce(&[Scalar<'t>]) -> Scalar<'t>,
{
    let y = f(x);
    tape.grad(y, x)
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:expr) => {
        impl<'t> $tr for Scalar<'t> {
            type Output = Scalar<'t>;
            #[inline]
            fn $m(self, rhs: Scalar<'t>) -> Scalar<'t> {
                assert_same_tape(self.tape, rhs.tape);
                self.tape.binary($op, self.idx, rhs.idx)
            }
        }
    };
}

binop!(Add, add, Op::Add);
binop!(Sub, sub, Op::Sub);
binop!(Mul, mul, Op::Mul);
binop!(Div, div, Op::Div);

impl<'t> Neg for Scalar<'t> {
    type Output = Scalar<'t>;
    fn neg(self) -> Scalar<'t> {
        self.tape.unary(Op::Neg, self.idx)
    }
}

impl<'t> Add<f64> for Scalar<'t> {
    type Output = Scalar<'t>;
    fn add(self, k: f64) -> Scalar<'t> {
        self.tape.unary(Op::Offset(k), self.idx)
    }
}

impl<'t> Sub<f64> for Scalar<'t> {
    type Output = Scalar<'t>;
    fn sub(self, k: f64) -> Scalar<'t> {
        self.tape.unary(Op::Offset(-k), self.idx)
    }
}

impl<'t> Mul<f64> for Scalar<'t> {
    type Output = Scalar<'t>;
    fn mul(self, k: f64) -> Scalar<'t> {
        self.tape.unary(Op::Scale(k), self.idx)
    }
}

impl<'t> Div<f64> for Scalar<'t> {
    type Output = Scalar<'t>;
    fn div(self, k: f64) -> Scalar<'t> {
        if k == 0.0 {
            self.tape.latch(AutodiffError::Domain {
                node: self.tape.len(),
                op: "div",
                detail: "zero denominator",
            });
        }
        self.tape.unary(Op::Scale(1.0 / k), self.idx)
    }
}

impl<'t> Add<Scalar<'t>> for f64 {
    type Output = Scalar<'t>;
    fn add(self, s: Scalar<'t>) -> Scalar<'t> {
        s + self
    }
}

impl<'t> Sub<Scalar<'t>> for f64 {
    type Output = Scalar<'t>;
    fn sub(self, s: Scalar<'t>) -> Scalar<'t> {
        -s + self
    }
}

impl<'t> Mul<Scalar<'t>> for f64 {
    type Output = Scalar<'t>;
    fn mul(self, s: Scalar<'t>) -> Scalar<'t> {
        s * self
    }
}

impl<'t> Real for Scalar<'t> {
    fn constant_like(&self, c: f64) -> Self {
        self.tape.lift(c)
    }
    fn value(&self) -> f64 {
        Scalar::value(self)
    }
    fn sin(self) -> Self {
        self.tape.unary(Op::Sin, self.idx)
    }
    fn cos(self) -> Self {
        self.tape.unary(Op::Cos, self.idx)
    }
    fn exp(self) -> Self {
        self.tape.unary(Op::Exp, self.idx)
    }
    fn tanh(self) -> Self {
        self.tape.unary(Op::Tanh, self.idx)
    }
    fn sqrt(self) -> Self {
        self.tape.unary(Op::Sqrt, self.idx)
    }
    fn abs(self) -> Self {
        self.tape.unary(Op::Abs, self.idx)
    }
    fn powi(self, n: i32) -> Self {
        self.tape.unary(Op::PowI(n), self.idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_is_constant() {
        let t = Tape::new();
        let x = t.var(1.7);
        let zero = t.lift(0.0);
        assert_eq!(t.grad_values(x + zero, &[x]).unwrap(), vec![1.0]);
        let five = t.lift(5.0);
        assert_eq!(five.value(), 5.0);
        assert_eq!(t.grad_values(five, &[x]).unwrap(), vec![0.0]);
        let c = t.lift(2.5);
        assert_eq!(t.grad_values(c * x, &[x]).unwrap(), vec![2.5]);
    }

    #[test]
    fn elementary_examples() {
        let t = Tape::new();
        let x = t.var(0.0);
        let y = x.tanh();
        assert_eq!(y.value(), 0.0);
        assert_eq!(t.grad_values(y, &[x]).unwrap(), vec![1.0]);

        let x = t.var(3.0);
        let y = x * x;
        assert_eq!(y.value(), 9.0);
        assert_eq!(t.grad_values(y, &[x]).unwrap(), vec![6.0]);

        let x = t.var((std::f64::consts::PI / 2.0).sqrt());
        let y = (x * x).sin();
        assert!((y.value() - 1.0).abs() < 1e-15);
        assert!(t.grad_values(y, &[x]).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn bilinear_and_cubic() {
        let g = gradient(|_, v| v[0] * v[1], &[2.0, 3.0]).unwrap();
        assert_eq!(g, vec![3.0, 2.0]);
        let g = gradient(|_, v| v[0] * v[0] * v[0], &[2.0]).unwrap();
        assert_eq!(g, vec![12.0]);
    }

    #[test]
    fn nested_third_derivative_of_tanh() {
        let t = Tape::new();
        let x = t.var(0.0);
        let y = x.tanh();
        let d1 = t.grad(y, &[x]).unwrap()[0];
        let d2 = t.grad(d1, &[x]).unwrap()[0];
        let d3 = t.grad(d2, &[x]).unwrap()[0];
        assert!((d1.value() - 1.0).abs() < 1e-15);
        assert!(d2.value().abs() < 1e-15);
        assert!((d3.value() + 2.0).abs() < 1e-10);
        // the values-only sweep agrees with the recorded one
        let d3v = t.grad_values(d2, &[x]).unwrap()[0];
        assert_eq!(d3v, d3.value());
    }

    #[test]
    fn gradient_in_returns_differentiable_components() {
        let t = Tape::new();
        let x = t.vars(&[1.5, -0.5]);
        let g = gradient_in(&t, |v| v[0] * v[0] * v[1], &x).unwrap();
        // d/dx (x^2 y) = 2xy ; d/dy of that = 2x
        let h = t.grad_values(g[0], &x).unwrap();
        assert_eq!(g[0].value(), 2.0 * 1.5 * -0.5);
        assert_eq!(h, vec![2.0 * -0.5, 2.0 * 1.5]);
    }

    #[test]
    fn domain_errors_are_explicit() {
        let t = Tape::new();
        let x = t.var(1.0);
        let z = t.var(0.0);
        assert!(matches!(x.try_div(z), Err(AutodiffError::Domain { op: "div", .. })));
        let neg = t.var(-1.0);
        assert!(matches!(neg.try_sqrt(), Err(AutodiffError::Domain { op: "sqrt", .. })));
        // the checked variants leave the tape clean
        assert!(t.check().is_ok());

        // operator form latches the fault instead
        let bad = x / z;
        assert!(bad.checked_value().is_err());
        let err = t.grad_values(bad, &[x]).unwrap_err();
        assert!(matches!(err, AutodiffError::Domain { op: "div", .. }));
    }

    #[test]
    fn non_finite_intermediate_names_the_node() {
        let t = Tape::new();
        let x = t.var(800.0);
        let y = x.exp();
        match t.grad_values(y, &[x]).unwrap_err() {
            AutodiffError::NonFinite { node, op } => {
                assert_eq!(node, y.index());
                assert_eq!(op, "exp");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn abs_has_zero_subgradient_at_kink() {
        let g = gradient(|_, v| v[0].abs(), &[0.0]).unwrap();
        assert_eq!(g, vec![0.0]);
        let g = gradient(|_, v| v[0].abs(), &[-2.0]).unwrap();
        assert_eq!(g, vec![-1.0]);
    }

    #[test]
    fn sqrt_at_zero_gradient_is_reported() {
        let t = Tape::new();
        let x = t.var(0.0);
        let y = x.sqrt();
        assert!(matches!(
            t.grad_values(y, &[x]),
            Err(AutodiffError::NonFiniteAdjoint { .. })
        ));
    }

    #[test]
    #[should_panic(expected = "different recording contexts")]
    fn mixing_tapes_panics() {
        let a = Tape::new();
        let b = Tape::new();
        let _ = a.var(1.0) + b.var(2.0);
    }

    #[test]
    fn apply_checks_arity() {
        let t = Tape::new();
        let x = t.var(1.0);
        assert!(matches!(apply(Op::Add, &[x]), Err(AutodiffError::Arity { .. })));
        let y = apply(Op::PowI(3), &[x]).unwrap();
        assert_eq!(y.value(), 1.0);
    }

    #[test]
    fn nesting_depth_is_bounded() {
        let t = Tape::new();
        let x = t.var(0.3);
        let mut y = x.sin();
        for _ in 0..MAX_NESTING {
            y = t.grad(y, &[x]).unwrap()[0];
        }
        assert!(matches!(
            t.grad(y, &[x]),
            Err(AutodiffError::NestingTooDeep { .. })
        ));
    }

    #[test]
    fn clear_resets_faults() {
        let mut t = Tape::new();
        {
            let x = t.var(0.0);
            let _ = x / 0.0;
        }
        assert!(t.check().is_err());
        t.clear();
        assert!(t.check().is_ok());
        assert!(t.is_empty());
    }
}
