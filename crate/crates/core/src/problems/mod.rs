//! Benchmark problems: domains, exact-boundary ansatz transforms, residual
//! operators and reference solutions.

mod burgers;
mod elasticity;
mod hermite;
mod poisson;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use burgers::{burgers_reference, Burgers, NU};
pub use elasticity::{body_force, Elasticity, ElasticityParams, Manufactured};
pub use hermite::GaussHermite;
pub use poisson::{poisson_reference, Poisson};

use crate::jet::{Jet, Layout};
use crate::net::DenseNetwork;
use crate::real::Real;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem `{0}` (expected poisson, burgers or elasticity)")]
    Unknown(String),
    #[error("reference quadrature degenerate at {point:?}")]
    Degenerate { point: Vec<f64> },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { x: (f64, f64), y: (f64, f64) },
    SpaceTime { x: (f64, f64), t: (f64, f64) },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn ranges(&self) -> Vec<(f64, f64)> {
        match *self {
            Domain::Interval { a, b } => vec![(a, b)],
            Domain::Rectangle { x, y } => vec![x, y],
            Domain::SpaceTime { x, t } => vec![x, t],
        }
    }

    pub fn coord_names(&self) -> &'static [&'static str] {
        match self {
            Domain::Interval { .. } => &["x"],
            Domain::Rectangle { .. } => &["x", "y"],
            Domain::SpaceTime { .. } => &["x", "t"],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.ranges().iter().all(|(a, b)| a.is_finite() && b.is_finite() && a < b)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.ranges().iter().zip(p).all(|(&(a, b), &v)| v >= a && v <= b)
    }
}

/// `n` equispaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// A tensor grid: `counts[d]` equispaced values along each axis. Points are
/// ordered with the first axis outermost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses `N` or `NxM`.
    pub fn parse(s: &str) -> Result<Self, ProblemError> {
        let counts: Result<Vec<usize>, _> = s.split(['x', 'X']).map(|p| p.trim().parse::<usize>()).collect();
        match counts {
            Ok(c) if !c.is_empty() && c.iter().all(|&v| v >= 1) => Ok(Self { counts: c }),
            _ => Err(ProblemError::Grid(format!("cannot parse `{s}`, expected N or NxM"))),
        }
    }

    pub fn label(&self) -> String {
        self.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x")
    }

    /// Row-major `len × dim` coordinates.
    pub fn points(&self, domain: &Domain) -> Result<Vec<f64>, ProblemError> {
        let ranges = domain.ranges();
        if ranges.len() != self.counts.len() {
            return Err(ProblemError::Grid(format!(
                "grid {} has {} axes, domain has {}",
                self.label(),
                self.counts.len(),
                ranges.len()
            )));
        }
        let axes: Vec<Vec<f64>> = ranges.iter().zip(&self.counts).map(|(&(a, b), &n)| linspace(a, b, n)).collect();
        let mut out = Vec::with_capacity(self.len() * axes.len());
        match axes.len() {
            1 => out.extend_from_slice(&axes[0]),
            _ => {
                for &a in &axes[0] {
                    for &b in &axes[1] {
                        out.push(a);
                        out.push(b);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Equispaced,
    UniformRandom,
}

/// Per-problem training defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDefaults {
    pub iterations: usize,
    pub n_collocation: usize,
    pub sampling: Sampling,
    pub alpha: f64,
    pub log_every: usize,
    pub eval_grid: Grid,
}

/// A PDE with exactly enforced essential conditions. Field `f` is
/// `lift_f(x) + distance_f(x) · N_f(x)` with one scalar network per field.
pub trait PdeProblem: Send + Sync {
    fn name(&self) -> &'static str;
    fn domain(&self) -> Domain;
    fn fields(&self) -> &'static [&'static str];
    fn residual_names(&self) -> &'static [&'static str];
    /// Partials of every field the residuals read.
    fn partials(&self) -> &'static Layout;
    fn lift<R: Real>(&self, field: usize, x: &[R]) -> R;
    fn distance<R: Real>(&self, field: usize, x: &[R]) -> R;
    /// Residuals at `x` given the field jets over [`Self::partials`]
    /// (or any layout containing it).
    fn residuals<R: Real>(&self, x: &[R], u: &[Jet<R>]) -> Vec<R>;
    /// Reference values of every field at `x`.
    fn reference(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError>;
    fn defaults(&self) -> ProblemDefaults;

    /// Extra reference-only quantities written by reference dumps.
    fn extra_fields(&self) -> &'static [&'static str] {
        &[]
    }
    fn extra_reference(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn ansatz<R: Real>(&self, field: usize, x: &[R], n: R) -> R {
        self.lift(field, x) + self.distance(field, x) * n
    }
}

/// Field jets over `layout` at one point, with network outputs coming from
/// plain jet evaluation of each network.
pub fn field_jets<P: PdeProblem>(p: &P, nets: &[DenseNetwork], layout: &'static Layout, x: &[f64]) -> Vec<Jet<f64>> {
    let xs: Vec<Jet<f64>> = (0..x.len()).map(|d| Jet::variable(layout, x[d], d)).collect();
    nets.iter()
        .enumerate()
        .map(|(f, net)| {
            let n = net.forward(&xs).expect("network input size matches the domain")[0];
            p.ansatz(f, &xs, n)
        })
        .collect()
}

/// Residuals of the networks' fields at `x`, through scalar jets.
pub fn residuals_at<P: PdeProblem>(p: &P, nets: &[DenseNetwork], x: &[f64]) -> Vec<f64> {
    let layout = p.partials();
    let u = field_jets(p, nets, layout, x);
    let xs: Vec<f64> = x.to_vec();
    p.residuals(&xs, &u)
}

/// Field values of the networks at `x`.
pub fn fields_at<P: PdeProblem>(p: &P, nets: &[DenseNetwork], x: &[f64]) -> Vec<f64> {
    nets.iter()
        .enumerate()
        .map(|(f, net)| p.ansatz(f, x, net.forward(x).expect("network input size matches the domain")[0]))
        .collect()
}

/// The three benchmarks behind one value type.
#[derive(Debug, Clone)]
pub enum ProblemSpec {
    Poisson(Poisson),
    Burgers(Burgers),
    Elasticity(Elasticity),
}

/// Runs `$body` with `$p` bound to the concrete problem inside `$spec`.
#[macro_export]
macro_rules! with_problem {
    ($spec:expr, $p:ident => $body:expr) => {
        match $spec {
            $crate::problems::ProblemSpec::Poisson($p) => $body,
            $crate::problems::ProblemSpec::Burgers($p) => $body,
            $crate::problems::ProblemSpec::Elasticity($p) => $body,
        }
    };
}

impl ProblemSpec {
    pub const NAMES: [&'static str; 3] = ["poisson", "burgers", "elasticity"];

    pub fn by_name(name: &str) -> Result<Self, ProblemError> {
        match name.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Self::Poisson(Poisson)),
            "burgers" => Ok(Self::Burgers(Burgers::new())),
            "elasticity" => Ok(Self::Elasticity(Elasticity::default())),
            other => Err(ProblemError::Unknown(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        with_problem!(self, p => p.name())
    }

    pub fn domain(&self) -> Domain {
        with_problem!(self, p => p.domain())
    }

    pub fn fields(&self) -> &'static [&'static str] {
        with_problem!(self, p => p.fields())
    }

    pub fn residual_names(&self) -> &'static [&'static str] {
        with_problem!(self, p => p.residual_names())
    }

    pub fn defaults(&self) -> ProblemDefaults {
        with_problem!(self, p => p.defaults())
    }

    pub fn reference(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        with_problem!(self, p => p.reference(x))
    }

    /// Names of every quantity a reference dump contains.
    pub fn dump_fields(&self) -> Vec<&'static str> {
        with_problem!(self, p => p.fields().iter().chain(p.extra_fields()).copied().collect())
    }

    /// Reference values on `grid`: one vector of values per dump field.
    pub fn reference_on(&self, grid: &Grid) -> Result<(Vec<f64>, Vec<Vec<f64>>), ProblemError> {
        with_problem!(self, p => reference_on(p, grid))
    }

    /// Writes one long-format CSV per reference quantity into `dir`.
    pub fn dump_reference(&self, grid: &Grid, dir: &Path) -> Result<Vec<PathBuf>, ProblemError> {
        let (pts, values) = self.reference_on(grid)?;
        let names = self.dump_fields();
        let coords = self.domain().coord_names();
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (name, vals) in names.iter().zip(&values) {
            let path = dir.join(format!("reference_{}_{}.csv", self.name(), name));
            write_field_csv(&path, coords, name, &pts, vals)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

pub fn reference_on<P: PdeProblem>(p: &P, grid: &Grid) -> Result<(Vec<f64>, Vec<Vec<f64>>), ProblemError> {
    let pts = grid.points(&p.domain())?;
    let dim = p.domain().dim();
    let nf = p.fields().len() + p.extra_fields().len();
    let mut values = vec![Vec::with_capacity(grid.len()); nf];
    for x in pts.chunks(dim) {
        let mut v = p.reference(x)?;
        v.extend(p.extra_reference(x));
        for (col, val) in values.iter_mut().zip(v) {
            col.push(val);
        }
    }
    Ok((pts, values))
}

/// Long-format field CSV: coordinate columns, then `field`, then `value`.
pub fn write_field_csv(path: &Path, coords: &[&str], field: &str, pts: &[f64], vals: &[f64]) -> Result<(), ProblemError> {
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header: Vec<&str> = coords.to_vec();
    header.extend(["field", "value"]);
    w.write_record(&header)?;
    let dim = coords.len();
    for (x, v) in pts.chunks(dim).zip(vals) {
        let mut rec: Vec<String> = x.iter().map(|c| format!("{c:?}")).collect();
        rec.push(field.to_string());
        rec.push(format!("{v:?}"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error())?.flush()?;
    Ok(())
}
