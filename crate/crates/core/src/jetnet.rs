//! Batched evaluation of a [`DenseNetwork`] on jets over many points at once,
//! with the matching reverse pass for parameter gradients.
//!
//! Points are processed in blocks that stay in cache. Inside a block every
//! buffer is feature-major: feature `j` owns `K` consecutive runs of the
//! block's points, one per partial of the layout, value first. Affine layers
//! act on all partials with the same weights; biases only touch the value
//! run. Hidden `tanh` layers combine partials through the layout's Faà di
//! Bruno terms.
//!
//! This is the training hot path. It computes the same quantities as nested
//! tape gradients of [`DenseNetwork::forward`], which the tests use as the
//! independent check.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use crate::jet::Layout;
use crate::net::DenseNetwork;
use crate::real::{fast_tanh, tanh_derivative_rows};

/// Points per block.
const CHUNK: usize = 128;

/// Reusable buffers for one network and one layout.
#[derive(Debug)]
pub struct JetEngine {
    layout: &'static Layout,
    n: usize,
    dims: Vec<usize>,
    terms: Vec<Vec<Term>>,
    chunks: Vec<Chunk>,
    /// Output jets of all points: row `k * n + i` holds partial `k` at
    /// point `i`, one column per network output.
    out: Vec<f64>,
    /// Transposed weights for the reverse pass.
    wt: Vec<Vec<f64>>,
}

/// Forward state of one block of `n` points; `rows = K n` per feature.
#[derive(Debug, Default)]
struct Chunk {
    n: usize,
    /// `acts[l]`: input of layer `l`, `dims[l] × rows`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers, `dims[l+1] × rows`.
    pre: Vec<Vec<f64>>,
    /// `tanh` derivatives of order `0..stride` at the value pre-activations,
    /// `dims[l+1] × stride × n`.
    fder: Vec<Vec<f64>>,
    out: Vec<f64>,
    adj: Vec<f64>,
    scratch: Vec<f64>,
}

/// One Faà di Bruno term with its blocks stored inline.
#[derive(Debug, Clone, Copy)]
struct Term {
    coeff: f64,
    nb: usize,
    b: [usize; 3],
}

impl JetEngine {
    pub fn new(layout: &'static Layout) -> Self {
        Self {
            layout,
            n: 0,
            dims: Vec::new(),
            chunks: Vec::new(),
            out: Vec::new(),
            wt: Vec::new(),
            terms: (0..layout.len())
                .map(|c| {
                    layout
                        .partitions(c)
                        .iter()
                        .map(|p| {
                            let mut b = [0; 3];
                            b[..p.blocks.len()].copy_from_slice(&p.blocks);
                            Term { coeff: p.coeff, nb: p.blocks.len(), b }
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    /// Propagates jets of the input coordinates through `net`. `points` is
    /// row-major `n × input_dim`. Returns the output jets, `(K n) × out`.
    pub fn forward(&mut self, net: &DenseNetwork, points: &[f64]) -> &[f64] {
        let d_in = net.input_dim();
        assert_eq!(d_in, self.layout.dim(), "network input size must match the jet dimension");
        assert_eq!(points.len() % d_in, 0);
        let n = points.len() / d_in;
        let k = self.layout.len();
        let d_out = net.output_dim();
        self.n = n;
        self.dims = net.dims().to_vec();
        self.chunks.resize_with(n.div_ceil(CHUNK), Chunk::default);
        self.out.resize(k * n * d_out, 0.0);
        for (ci, (chunk, pts)) in self.chunks.iter_mut().zip(points.chunks(CHUNK * d_in)).enumerate() {
            chunk.forward(self.layout, &self.terms, net, pts);
            let (start, nc) = (ci * CHUNK, chunk.n);
            let rows = k * nc;
            for o in 0..d_out {
                for c in 0..k {
                    let src = &chunk.out[o * rows + c * nc..o * rows + (c + 1) * nc];
                    for (p, &v) in src.iter().enumerate() {
                        self.out[(c * n + start + p) * d_out + o] = v;
                    }
                }
            }
        }
        &self.out
    }

    /// Output jets of the last forward pass, `(K n) × out`.
    pub fn outputs(&self) -> &[f64] {
        &self.out
    }

    /// Component `comp` of output `o` at point `i`.
    pub fn output(&self, comp: usize, i: usize, o: usize) -> f64 {
        let no = *self.dims.last().unwrap();
        self.out[(comp * self.n + i) * no + o]
    }

    /// Reverse pass: given adjoints of the output jets (`(K n) × out`),
    /// returns the gradient with respect to the flat parameter vector.
    pub fn backward(&mut self, net: &DenseNetwork, out_adj: &[f64]) -> Vec<f64> {
        assert_eq!(net.dims(), &self.dims[..], "backward with a different network shape");
        let (n, k, d_out) = (self.n, self.layout.len(), net.output_dim());
        assert_eq!(out_adj.len(), k * n * d_out);
        let nl = net.num_layers();
        self.wt.resize_with(nl, Vec::new);
        for l in 1..nl {
            let (ni, no) = (self.dims[l], self.dims[l + 1]);
            let w = weights(net, l);
            let wt = &mut self.wt[l];
            wt.resize(ni * no, 0.0);
            for j in 0..no {
                for i in 0..ni {
                    wt[i * no + j] = w[j * ni + i];
                }
            }
        }
        let mut grad = vec![0.0; net.num_params()];
        for (ci, chunk) in self.chunks.iter_mut().enumerate() {
            let (start, nc) = (ci * CHUNK, chunk.n);
            let rows = k * nc;
            chunk.adj.resize(d_out * rows, 0.0);
            for o in 0..d_out {
                for c in 0..k {
                    for p in 0..nc {
                        chunk.adj[o * rows + c * nc + p] = out_adj[(c * n + start + p) * d_out + o];
                    }
                }
            }
            chunk.backward(self.layout, &self.terms, net, &self.wt, &mut grad);
        }
        grad
    }
}

/// Row-major `out × in` weights of layer `l`.
fn weights(net: &DenseNetwork, l: usize) -> &[f64] {
    let off = net.layer_offset(l);
    &net.params()[off..off + net.dims()[l] * net.dims()[l + 1]]
}

/// `z[j, r] = Σ_i m[j, i] a[i, r]` with `m` row-major `mr × mc`, `a` of
/// `mc × rows` and `z` of `mr × rows`.
fn mat_rows(m: &[f64], mr: usize, mc: usize, a: &[f64], rows: usize, z: &mut [f64]) {
    let mv = ArrayView2::from_shape((mr, mc), &m[..mr * mc]).unwrap();
    let av = ArrayView2::from_shape((mc, rows), &a[..mc * rows]).unwrap();
    let mut zv = ArrayViewMut2::from_shape((mr, rows), &mut z[..mr * rows]).unwrap();
    general_mat_mul(1.0, &mv, &av, 0.0, &mut zv);
}

impl Chunk {
    fn forward(&mut self, layout: &'static Layout, terms: &[Vec<Term>], net: &DenseNetwork, points: &[f64]) {
        let dims = net.dims();
        let (d_in, nl) = (dims[0], net.num_layers());
        let n = points.len() / d_in;
        let k = layout.len();
        let rows = k * n;
        let stride = layout.max_order() + 2;
        self.n = n;
        self.acts.resize_with(nl, Vec::new);
        self.pre.resize_with(nl - 1, Vec::new);
        self.fder.resize_with(nl - 1, Vec::new);

        let a0 = &mut self.acts[0];
        a0.clear();
        a0.resize(d_in * rows, 0.0);
        for (p, x) in points.chunks(d_in).enumerate() {
            for d in 0..d_in {
                a0[d * rows + p] = x[d];
            }
        }
        for (c, idx) in layout.indices().iter().enumerate() {
            if idx[0] + idx[1] == 1 {
                let var = if idx[0] == 1 { 0 } else { 1 };
                a0[var * rows + c * n..var * rows + (c + 1) * n].fill(1.0);
            }
        }

        for l in 0..nl {
            let (ni, no) = (dims[l], dims[l + 1]);
            let hidden = l + 1 < nl;
            let z = if hidden { &mut self.pre[l] } else { &mut self.out };
            z.resize(no * rows, 0.0);
            mat_rows(weights(net, l), no, ni, &self.acts[l], rows, z);
            for (j, &b) in net.bias(l).iter().enumerate() {
                z[j * rows..j * rows + n].iter_mut().for_each(|v| *v += b);
            }
            if !hidden {
                break;
            }
            let z = &self.pre[l];
            let f = &mut self.fder[l];
            f.resize(no * stride * n, 0.0);
            let next = &mut self.acts[l + 1];
            next.resize(no * rows, 0.0);
            for j in 0..no {
                let zj = &z[j * rows..(j + 1) * rows];
                let fj = &mut f[j * stride * n..(j + 1) * stride * n];
                let (f0, rest) = fj.split_at_mut(n);
                for (t, &v) in f0.iter_mut().zip(&zj[..n]) {
                    *t = fast_tanh(v);
                }
                tanh_derivative_rows(f0, rest, stride - 1);
                let fj = &*fj;
                let nj = &mut next[j * rows..(j + 1) * rows];
                nj[..n].copy_from_slice(&fj[..n]);
                for c in 1..k {
                    let out = &mut nj[c * n..(c + 1) * n];
                    out.fill(0.0);
                    for t in &terms[c] {
                        let (fo, z0, cf) = (blk(n, fj, t.nb), blk(n, zj, t.b[0]), t.coeff);
                        match t.nb {
                            1 => out.iter_mut().zip(fo).zip(z0).for_each(|((o, a), b)| *o += cf * a * b),
                            2 => {
                                let z1 = blk(n, zj, t.b[1]);
                                out.iter_mut().zip(fo).zip(z0).zip(z1).for_each(|(((o, a), b), c)| *o += cf * a * b * c)
                            }
                            _ => {
                                let (z1, z2) = (blk(n, zj, t.b[1]), blk(n, zj, t.b[2]));
                                out.iter_mut()
                                    .zip(fo)
                                    .zip(z0)
                                    .zip(z1)
                                    .zip(z2)
                                    .for_each(|((((o, a), b), c), d)| *o += cf * a * b * c * d)
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adds this block's parameter gradient to `grad`, reading the output
    /// adjoints from `self.adj`. `wt[l]` is the transpose of layer `l`'s
    /// weights.
    fn backward(&mut self, layout: &'static Layout, terms: &[Vec<Term>], net: &DenseNetwork, wt: &[Vec<f64>], grad: &mut [f64]) {
        let dims = net.dims();
        let nl = net.num_layers();
        let n = self.n;
        let k = layout.len();
        let rows = k * n;
        let stride = layout.max_order() + 2;
        let mut g = std::mem::take(&mut self.adj);
        let mut h = std::mem::take(&mut self.scratch);
        for l in (0..nl).rev() {
            let (ni, no) = (dims[l], dims[l + 1]);
            let off = net.layer_offset(l);
            let a = &self.acts[l];
            let (wgrad, rest) = grad[off..].split_at_mut(no * ni);
            {
                let gv = ArrayView2::from_shape((no, rows), &g[..no * rows]).unwrap();
                let av = ArrayView2::from_shape((ni, rows), &a[..ni * rows]).unwrap();
                let mut wv = ArrayViewMut2::from_shape((no, ni), wgrad).unwrap();
                general_mat_mul(1.0, &gv, &av.t(), 1.0, &mut wv);
            }
            for j in 0..no {
                rest[j] += g[j * rows..j * rows + n].iter().sum::<f64>();
            }
            if l == 0 {
                break;
            }
            // adjoint of this layer's input, i.e. the previous tanh output
            h.resize(ni * rows, 0.0);
            mat_rows(&wt[l], ni, no, &g, rows, &mut h);
            // through tanh of layer l-1
            let z = &self.pre[l - 1];
            let f = &self.fder[l - 1];
            g.resize(ni * rows, 0.0);
            for j in 0..ni {
                let zj = &z[j * rows..(j + 1) * rows];
                let fj = &f[j * stride * n..(j + 1) * stride * n];
                let hj = &h[j * rows..(j + 1) * rows];
                let (g0, gr) = g[j * rows..(j + 1) * rows].split_at_mut(n);
                gr.fill(0.0);
                g0.iter_mut().zip(&hj[..n]).zip(blk(n, fj, 1)).for_each(|((o, a), b)| *o = a * b);
                for c in 1..k {
                    let hc = blk(n, hj, c);
                    for t in &terms[c] {
                        let (nb, cf) = (t.nb, t.coeff);
                        let (lo, hi) = (blk(n, fj, nb), blk(n, fj, nb + 1));
                        let z0 = blk(n, zj, t.b[0]);
                        match nb {
                            1 => {
                                g0.iter_mut().zip(hc).zip(hi).zip(z0).for_each(|(((o, a), b), c)| *o += cf * a * b * c);
                                let g1 = &mut gr[(t.b[0] - 1) * n..t.b[0] * n];
                                g1.iter_mut().zip(hc).zip(lo).for_each(|((o, a), b)| *o += cf * a * b);
                            }
                            2 => {
                                let z1 = blk(n, zj, t.b[1]);
                                g0.iter_mut()
                                    .zip(hc)
                                    .zip(hi)
                                    .zip(z0)
                                    .zip(z1)
                                    .for_each(|((((o, a), b), c), d)| *o += cf * a * b * c * d);
                                for (own, other) in [(t.b[0], z1), (t.b[1], z0)] {
                                    let gb = &mut gr[(own - 1) * n..own * n];
                                    gb.iter_mut().zip(hc).zip(lo).zip(other).for_each(|(((o, a), b), c)| *o += cf * a * b * c);
                                }
                            }
                            _ => {
                                let (z1, z2) = (blk(n, zj, t.b[1]), blk(n, zj, t.b[2]));
                                g0.iter_mut()
                                    .zip(hc)
                                    .zip(hi)
                                    .zip(z0)
                                    .zip(z1)
                                    .zip(z2)
                                    .for_each(|(((((o, a), b), c), d), e)| *o += cf * a * b * c * d * e);
                                for (own, p, q) in [(t.b[0], z1, z2), (t.b[1], z0, z2), (t.b[2], z0, z1)] {
                                    let gb = &mut gr[(own - 1) * n..own * n];
                                    gb.iter_mut()
                                        .zip(hc)
                                        .zip(lo)
                                        .zip(p)
                                        .zip(q)
                                        .for_each(|((((o, a), b), c), d)| *o += cf * a * b * c * d);
                                }
                            }
                        }
                    }
                }
            }
        }
        self.adj = g;
        self.scratch = h;
    }
}

/// Run `c` of a buffer made of runs of length `m`.
#[inline]
fn blk(m: usize, v: &[f64], c: usize) -> &[f64] {
    &v[c * m..(c + 1) * m]
}
