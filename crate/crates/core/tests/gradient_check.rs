//! Parameter gradients of the full training objective, three ways: the
//! batched jet engine with its hand-derived reverse pass, a tape that takes
//! every coordinate derivative by nested reverse passes through the plain
//! network, and finite differences of the loss value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stdpinn::autodiff::{Scalar, Tape};
use stdpinn::jet::{Jet, Layout};
use stdpinn::loss::{composite_loss, ErrorKind, LossConfig, Term};
use stdpinn::net::{forward_with, DenseNetwork};
use stdpinn::problems::{Burgers, Elasticity, PdeProblem, Poisson, Sampling};
use stdpinn::trainer::{init_networks, sample_collocation, Objective};

/// `∂^idx u` by repeated reverse passes, memoized per multi-index.
fn nested_partials<'t>(tape: &'t Tape, u: Scalar<'t>, x: &[Scalar<'t>], layout: &'static Layout) -> Vec<Scalar<'t>> {
    let idx = layout.indices();
    let mut out: Vec<Option<Scalar<'t>>> = vec![None; idx.len()];
    out[0] = Some(u);
    for (k, &[i, j]) in idx.iter().enumerate().skip(1) {
        // parent: lower one index, preferring the second variable
        let (parent, var) = if j > 0 { ([i, j - 1], 1) } else { ([i - 1, j], 0) };
        let p = layout.position(parent).unwrap();
        let pv = out[p].unwrap();
        out[k] = Some(tape.grad(pv, &[x[var]]).unwrap()[0]);
    }
    out.into_iter().map(Option::unwrap).collect()
}

/// Loss and gradient via tape-only differentiation.
fn tape_route<P: PdeProblem>(p: &P, nets: &[DenseNetwork], points: &[f64], cfg: &LossConfig) -> (f64, Vec<f64>) {
    let tape = Tape::new();
    let dim = p.domain().dim();
    let params: Vec<Vec<Scalar>> = nets.iter().map(|n| tape.vars(n.params())).collect();
    let gpinn = cfg.gpinn_weight > 0.0;
    let layout = if gpinn { p.partials().raised() } else { p.partials() };
    let mut res: Vec<Vec<Scalar>> = vec![Vec::new(); p.residual_names().len()];
    let mut gp: Vec<Scalar> = Vec::new();
    for x in points.chunks(dim) {
        let xv = tape.vars(x);
        let fields: Vec<Jet<Scalar>> = nets
            .iter()
            .enumerate()
            .map(|(f, net)| {
                let n = forward_with(net.dims(), &params[f], &xv).unwrap()[0];
                let u = p.ansatz(f, &xv, n);
                Jet::from_components(layout, &nested_partials(&tape, u, &xv, layout))
            })
            .collect();
        if gpinn {
            let outer = Layout::total(dim, 1);
            let xs: Vec<Jet<Scalar>> = (0..dim).map(|d| Jet::variable(outer, xv[d], d)).collect();
            let nested: Vec<Jet<Jet<Scalar>>> = fields.iter().map(|u| u.nest(p.partials(), outer)).collect();
            let mut g = tape.lift(0.0);
            for (r, col) in p.residuals(&xs, &nested).into_iter().zip(res.iter_mut()) {
                col.push(r.primal());
                for d in 1..=dim {
                    g = g + r.components()[d] * r.components()[d];
                }
            }
            gp.push(g);
        } else {
            for (r, col) in p.residuals(&xv, &fields).into_iter().zip(res.iter_mut()) {
                col.push(r);
            }
        }
    }
    let names = p.residual_names();
    let terms: Vec<Term<Scalar>> = names.iter().zip(&res).map(|(n, r)| Term { name: n, residuals: &r[..], weight: 1.0 }).collect();
    let (mut total, _) = composite_loss(&terms, cfg).unwrap();
    if gpinn {
        let mut s = tape.lift(0.0);
        for &v in &gp {
            s = s + v;
        }
        total = total + s / gp.len() as f64 * cfg.gpinn_weight;
    }
    let all: Vec<Scalar> = params.concat();
    (total.value(), tape.grad_values(total, &all).unwrap())
}

fn loss_at<P: PdeProblem>(obj: &mut Objective<P>, nets: &[DenseNetwork]) -> f64 {
    obj.evaluate(nets, false).unwrap().breakdown.total
}

fn check<P: PdeProblem + Clone>(p: P, n_points: usize, cfg: LossConfig, seed: u64) {
    let nets = init_networks(&p, &[20; 5], seed).unwrap();
    let points = sample_collocation(&p.domain(), n_points, Sampling::UniformRandom, seed);
    let mut obj = Objective::new(p.clone(), points.clone(), cfg);
    let ev = obj.evaluate(&nets, true).unwrap();
    let fast: Vec<f64> = ev.grads.unwrap().concat();

    let (tl, tg) = tape_route(&p, &nets, &points, &cfg);
    assert!((tl - ev.breakdown.total).abs() <= 1e-12 * (1.0 + tl.abs()), "{}: loss {} vs {}", p.name(), tl, ev.breakdown.total);
    let scale = tg.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for (i, (a, b)) in fast.iter().zip(&tg).enumerate() {
        assert!((a - b).abs() <= 1e-9 * scale, "{} param {i}: engine {a} tape {b}", p.name());
    }

    let sizes: Vec<usize> = nets.iter().map(|n| n.num_params()).collect();
    let total: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
    let mut checked = 0;
    while checked < 5 {
        let j = rng.gen_range(0..total);
        if fast[j].abs() < 1e-6 * scale {
            continue;
        }
        let (mut f, mut off) = (0, j);
        while off >= sizes[f] {
            off -= sizes[f];
            f += 1;
        }
        let h = 1e-4;
        let mut eval = |delta: f64| {
            let mut q = nets.clone();
            q[f].params_mut()[off] += delta;
            loss_at(&mut obj, &q)
        };
        let fd = (8.0 * (eval(h) - eval(-h)) - (eval(2.0 * h) - eval(-2.0 * h))) / (12.0 * h);
        let rel = (fast[j] - fd).abs() / fast[j].abs().max(fd.abs());
        assert!(rel < 1e-5, "{} param {j}: engine {} fd {fd} rel {rel}", p.name(), fast[j]);
        checked += 1;
    }
}

fn cfg(alpha: f64) -> LossConfig {
    LossConfig { alpha, ..Default::default() }
}

#[test]
fn poisson_gradients() {
    check(Poisson, 24, cfg(0.8), 1);
    check(Poisson, 24, cfg(1.0), 2);
    check(Poisson, 24, LossConfig { error: ErrorKind::Huber { delta: 1.0 }, ..cfg(0.5) }, 3);
}

#[test]
fn burgers_gradients() {
    check(Burgers::new(), 20, cfg(0.8), 4);
    check(Burgers::new(), 20, LossConfig { error: ErrorKind::Absolute, ..cfg(0.3) }, 5);
}

#[test]
fn elasticity_gradients() {
    check(Elasticity::default(), 16, cfg(0.6), 6);
}

#[test]
fn gpinn_gradients() {
    check(Poisson, 16, LossConfig { gpinn_weight: 0.7, ..cfg(1.0) }, 7);
    check(Burgers::new(), 12, LossConfig { gpinn_weight: 1.0, ..cfg(0.8) }, 8);
    check(Elasticity::default(), 10, LossConfig { gpinn_weight: 1.0, ..cfg(1.0) }, 9);
}
