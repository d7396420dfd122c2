//! The training objective over a fixed collocation set.
//!
//! Network jets come from [`JetEngine`]; everything after the network
//! outputs (ansatz, residuals, error kind, loss reduction, gPINN term) is
//! recorded on a tape with the network jet components as leaves. The tape
//! gradient with respect to those leaves seeds the engine's reverse pass.

use crate::autodiff::{Scalar, Tape};
use crate::jet::{Jet, Layout};
use crate::jetnet::JetEngine;
use crate::loss::{composite_loss, population_std, LossBreakdown, LossConfig, Term, TermStats};
use crate::net::DenseNetwork;
use crate::problems::PdeProblem;
use crate::real::Real;

use super::TrainError;

/// Loss diagnostics and, when requested, one parameter gradient per network.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub breakdown: LossBreakdown,
    pub grads: Option<Vec<Vec<f64>>>,
}

pub struct Objective<P: PdeProblem> {
    problem: P,
    loss: LossConfig,
    base: &'static Layout,
    layout: &'static Layout,
    outer: Option<&'static Layout>,
    dim: usize,
    n: usize,
    points: Vec<f64>,
    /// Lift and distance jets per field, component-major like engine outputs.
    lift: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
    engines: Vec<JetEngine>,
    tape: Tape,
}

impl<P: PdeProblem> Objective<P> {
    pub fn new(problem: P, points: Vec<f64>, loss: LossConfig) -> Self {
        let dim = problem.domain().dim();
        assert_eq!(points.len() % dim, 0);
        let n = points.len() / dim;
        let base = problem.partials();
        let gpinn = loss.gpinn_weight > 0.0;
        let layout = if gpinn { base.raised() } else { base };
        let outer = gpinn.then(|| Layout::total(dim, 1));
        let k = layout.len();
        let nf = problem.fields().len();
        let mut lift = vec![vec![0.0; k * n]; nf];
        let mut dist = vec![vec![0.0; k * n]; nf];
        for (i, x) in points.chunks(dim).enumerate() {
            let xs: Vec<Jet<f64>> = (0..dim).map(|d| Jet::variable(layout, x[d], d)).collect();
            for f in 0..nf {
                let g = problem.lift(f, &xs);
                let dd = problem.distance(f, &xs);
                for c in 0..k {
                    lift[f][c * n + i] = g.components()[c];
                    dist[f][c * n + i] = dd.components()[c];
                }
            }
        }
        let engines = (0..nf).map(|_| JetEngine::new(layout)).collect();
        Self { problem, loss, base, layout, outer, dim, n, points, lift, dist, engines, tape: Tape::new() }
    }

    pub fn problem(&self) -> &P {
        &self.problem
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn loss_config(&self) -> &LossConfig {
        &self.loss
    }

    /// Names of the breakdown terms, in order.
    pub fn term_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.problem.residual_names().iter().map(|s| s.to_string()).collect();
        if self.outer.is_some() {
            v.push("gpinn".into());
        }
        v
    }

    pub fn evaluate(&mut self, nets: &[DenseNetwork], want_grad: bool) -> Result<Evaluation, TrainError> {
        let nf = self.problem.fields().len();
        assert_eq!(nets.len(), nf, "one network per field");
        for (e, net) in self.engines.iter_mut().zip(nets) {
            e.forward(net, &self.points);
        }
        let Self { problem, loss, base, layout, outer, dim, n, points, lift, dist, engines, tape } = self;
        let (n, dim, layout, base) = (*n, *dim, *layout, *base);
        tape.clear();
        let tape: &Tape = tape;
        let k = layout.len();
        let leaves: Vec<Vec<Scalar>> = engines.iter().map(|e| tape.vars(e.outputs())).collect();
        let nres = problem.residual_names().len();
        let mut res: Vec<Vec<Scalar>> = vec![Vec::with_capacity(n); nres];
        let mut gp: Vec<Scalar> = Vec::new();
        let mut comps: Vec<Scalar> = Vec::with_capacity(k);
        let mut fields: Vec<Jet<Scalar>> = Vec::with_capacity(nf);
        for i in 0..n {
            fields.clear();
            for f in 0..nf {
                comps.clear();
                comps.extend((0..k).map(|c| leaves[f][c * n + i]));
                fields.push(ansatz_jet(tape, layout, &lift[f], &dist[f], n, i, &comps));
            }
            let x = &points[i * dim..(i + 1) * dim];
            match outer {
                None => {
                    let xs: Vec<Scalar> = x.iter().map(|&v| tape.lift(v)).collect();
                    for (r, col) in problem.residuals(&xs, &fields).into_iter().zip(res.iter_mut()) {
                        col.push(r);
                    }
                }
                Some(outer) => {
                    let outer = *outer;
                    let xs: Vec<Jet<Scalar>> = (0..dim).map(|d| Jet::variable(outer, tape.lift(x[d]), d)).collect();
                    let nested: Vec<Jet<Jet<Scalar>>> = fields.iter().map(|u| u.nest(base, outer)).collect();
                    let mut g: Option<Scalar> = None;
                    for (r, col) in problem.residuals(&xs, &nested).into_iter().zip(res.iter_mut()) {
                        col.push(r.primal());
                        for d in 1..=dim {
                            let s = r.components()[d].square();
                            g = Some(match g {
                                None => s,
                                Some(a) => a + s,
                            });
                        }
                    }
                    gp.push(g.expect("at least one residual"));
                }
            }
        }
        let names = problem.residual_names();
        let terms: Vec<Term<Scalar>> =
            names.iter().zip(&res).map(|(name, r)| Term { name, residuals: &r[..], weight: loss.weights.residual }).collect();
        let (mut total, mut bd) = composite_loss(&terms, loss)?;
        if !gp.is_empty() {
            let mut s = gp[0];
            for &v in &gp[1..] {
                s = s + v;
            }
            let mean = s / gp.len() as f64;
            let vals: Vec<f64> = gp.iter().map(|v| v.value()).collect();
            bd.terms.push(TermStats {
                name: "gpinn".into(),
                mean: mean.value(),
                std: population_std(&vals),
                combined: mean.value(),
                weight: loss.gpinn_weight,
            });
            total = total + mean * loss.gpinn_weight;
            bd.total = total.value();
        }
        if let Some(t) = bd.terms.iter().find(|t| !(t.combined.is_finite() && t.mean.is_finite() && t.std.is_finite())) {
            return Err(TrainError::NonFiniteLoss { iteration: 0, term: t.name.clone() });
        }
        if !bd.total.is_finite() {
            return Err(TrainError::NonFiniteLoss { iteration: 0, term: "total".into() });
        }
        tape.check()?;
        if !want_grad {
            return Ok(Evaluation { breakdown: bd, grads: None });
        }
        let all: Vec<Scalar> = leaves.iter().flatten().copied().collect();
        let adj = tape.grad_values(total, &all)?;
        drop(all);
        let grads = engines
            .iter_mut()
            .zip(nets)
            .zip(adj.chunks(k * n))
            .map(|((e, net), a)| e.backward(net, a))
            .collect();
        Ok(Evaluation { breakdown: bd, grads: Some(grads) })
    }
}

/// `G + D·N` at point `i` with constant `G`, `D` jets and recorded `N`.
fn ansatz_jet<'t>(tape: &'t Tape, layout: &'static Layout, g: &[f64], d: &[f64], n: usize, i: usize, nc: &[Scalar<'t>]) -> Jet<Scalar<'t>> {
    let k = layout.len();
    let mut acc: Vec<Option<Scalar<'t>>> = vec![None; k];
    for &(out, a, b, w) in layout.products() {
        let da = d[a as usize * n + i];
        if da == 0.0 {
            continue;
        }
        let t = nc[b as usize] * (w * da);
        let slot = &mut acc[out as usize];
        *slot = Some(match *slot {
            None => t,
            Some(s) => s + t,
        });
    }
    let comps: Vec<Scalar<'t>> = acc
        .into_iter()
        .enumerate()
        .map(|(c, v)| {
            let gc = g[c * n + i];
            match v {
                Some(s) if gc != 0.0 => s + gc,
                Some(s) => s,
                None => tape.lift(gc),
            }
        })
        .collect();
    Jet::from_components(layout, &comps)
}
