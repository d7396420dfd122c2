//! Stepwise training state and the full training driver.

use crate::jet::Layout;
use crate::jetnet::JetEngine;
use crate::loss::LossBreakdown;
use crate::net::DenseNetwork;
use crate::optim::Adam;
use crate::problems::{Grid, PdeProblem};

use super::record::{MetricsRow, RunRecord, TermLogRow};
use super::{init_networks, l2_error, linf_error, sample_collocation, Objective, TrainConfig, TrainError};

/// Predictions and errors on a fixed evaluation grid.
pub struct Evaluator {
    dim: usize,
    points: Vec<f64>,
    lift: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
    reference: Vec<Vec<f64>>,
    engine: JetEngine,
}

impl Evaluator {
    pub fn new<P: PdeProblem>(p: &P, grid: &Grid) -> Result<Self, TrainError> {
        let (points, mut reference) = crate::problems::reference_on(p, grid)?;
        reference.truncate(p.fields().len());
        let dim = p.domain().dim();
        let nf = p.fields().len();
        let mut lift = vec![Vec::with_capacity(grid.len()); nf];
        let mut dist = vec![Vec::with_capacity(grid.len()); nf];
        for x in points.chunks(dim) {
            for f in 0..nf {
                lift[f].push(p.lift(f, x));
                dist[f].push(p.distance(f, x));
            }
        }
        Ok(Self { dim, points, lift, dist, reference, engine: JetEngine::new(Layout::total(dim, 0)) })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reference(&self) -> &[Vec<f64>] {
        &self.reference
    }

    /// Field values of `nets` at every grid point.
    pub fn predict(&mut self, nets: &[DenseNetwork]) -> Vec<Vec<f64>> {
        nets.iter()
            .enumerate()
            .map(|(f, net)| {
                let out = self.engine.forward(net, &self.points);
                out.iter().zip(&self.lift[f]).zip(&self.dist[f]).map(|((n, g), d)| g + d * n).collect()
            })
            .collect()
    }

    /// `(l2, linf)` per field.
    pub fn errors(&mut self, nets: &[DenseNetwork]) -> Vec<(f64, f64)> {
        let pred = self.predict(nets);
        pred.iter().zip(&self.reference).map(|(p, r)| (l2_error(p, r), linf_error(p, r))).collect()
    }
}

/// Seconds from an arbitrary origin.
pub type Clock = Box<dyn FnMut() -> f64 + Send>;

/// Training state advanced one Adam step at a time. Time is read from an
/// optional caller-supplied clock so the same code runs where none exists.
pub struct Session<P: PdeProblem> {
    cfg: TrainConfig,
    nets: Vec<DenseNetwork>,
    sizes: Vec<usize>,
    adam: Adam,
    objective: Objective<P>,
    evaluator: Evaluator,
    iteration: usize,
    record: RunRecord,
    last: Option<LossBreakdown>,
    clock: Option<Clock>,
    busy: f64,
}

impl<P: PdeProblem> Session<P> {
    pub fn new(problem: P, cfg: TrainConfig) -> Result<Self, TrainError> {
        let nets = init_networks(&problem, &cfg.hidden, cfg.seed)?;
        Self::with_networks(problem, cfg, nets)
    }

    /// Starts from given networks (for shared initial weights).
    pub fn with_networks(problem: P, cfg: TrainConfig, nets: Vec<DenseNetwork>) -> Result<Self, TrainError> {
        let domain = problem.domain();
        cfg.validate_for(&domain)?;
        if nets.len() != problem.fields().len() {
            return Err(TrainError::Config(format!("{} networks for {} fields", nets.len(), problem.fields().len())));
        }
        for net in &nets {
            if net.input_dim() != domain.dim() || net.output_dim() != 1 {
                return Err(TrainError::Config(format!("network dims {:?} do not fit the problem", net.dims())));
            }
        }
        let points = sample_collocation(&domain, cfg.n_collocation, cfg.sampling, cfg.seed);
        let evaluator = Evaluator::new(&problem, &cfg.eval_grid)?;
        let objective = Objective::new(problem, points, cfg.loss());
        let sizes: Vec<usize> = nets.iter().map(|n| n.num_params()).collect();
        let adam = Adam::new(cfg.adam, sizes.iter().sum());
        let p = objective.problem();
        let record = RunRecord::new(
            &cfg,
            p.fields().iter().map(|s| s.to_string()).collect(),
            objective.term_names(),
        );
        Ok(Self { cfg, nets, sizes, adam, objective, evaluator, iteration: 0, record, last: None, clock: None, busy: 0.0 })
    }

    /// Installs a clock; loss, gradient and update work is then timed,
    /// metric evaluation is not.
    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = Some(clock);
    }

    fn now(&mut self) -> f64 {
        self.clock.as_mut().map_or(0.0, |c| c())
    }

    /// Seconds of timed training work so far.
    pub fn busy_seconds(&self) -> f64 {
        self.busy
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.cfg.iterations
    }

    pub fn networks(&self) -> &[DenseNetwork] {
        &self.nets
    }

    pub fn problem(&self) -> &P {
        self.objective.problem()
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn into_parts(self) -> (Vec<DenseNetwork>, RunRecord) {
        (self.nets, self.record)
    }

    pub fn evaluator(&mut self) -> &mut Evaluator {
        &mut self.evaluator
    }

    pub fn objective(&mut self) -> &mut Objective<P> {
        &mut self.objective
    }

    /// Loss breakdown from the most recent evaluation.
    pub fn last_loss(&self) -> Option<&LossBreakdown> {
        self.last.as_ref()
    }

    fn should_log(&self, it: usize) -> bool {
        it % self.cfg.log_every == 0 || it == self.cfg.iterations
    }

    fn log(&mut self, bd: &LossBreakdown, wall_seconds: f64) {
        let errors = self.evaluator.errors(&self.nets);
        self.record.rows.push(MetricsRow {
            iteration: self.iteration,
            total_loss: bd.total,
            terms: bd.terms.iter().map(|t| (t.mean, t.std)).collect(),
            l2: errors.iter().map(|e| e.0).collect(),
            linf: errors.iter().map(|e| e.1).collect(),
            wall_seconds,
        });
        for t in &bd.terms {
            self.record.term_log.push(TermLogRow {
                iteration: self.iteration,
                term: t.name.clone(),
                mean: t.mean,
                std: t.std,
                combined: t.combined,
                weight: t.weight,
            });
        }
    }

    fn tag(&self, e: TrainError) -> TrainError {
        match e {
            TrainError::NonFiniteLoss { term, .. } => TrainError::NonFiniteLoss { iteration: self.iteration, term },
            other => other,
        }
    }

    /// One Adam step. Evaluates loss and gradient at the current parameters,
    /// logs them when this iteration is due, then updates.
    pub fn step(&mut self) -> Result<LossBreakdown, TrainError> {
        let t0 = self.now();
        let ev = self.objective.evaluate(&self.nets, true).map_err(|e| self.tag(e))?;
        self.busy += self.now() - t0;
        if self.should_log(self.iteration) {
            self.log(&ev.breakdown, self.busy);
        }
        let t1 = self.now();
        let grads: Vec<f64> = ev.grads.expect("gradient requested").concat();
        let mut params: Vec<f64> = self.nets.iter().flat_map(|n| n.params().iter().copied()).collect();
        self.adam
            .step(&mut params, &grads)
            .map_err(|source| TrainError::Optim { iteration: self.iteration, source })?;
        let mut off = 0;
        for (net, &s) in self.nets.iter_mut().zip(&self.sizes) {
            net.params_mut().copy_from_slice(&params[off..off + s]);
            off += s;
        }
        self.iteration += 1;
        self.busy += self.now() - t1;
        self.record.train_seconds = self.busy;
        self.record.seconds_per_iteration = self.busy / self.iteration as f64;
        self.last = Some(ev.breakdown.clone());
        Ok(ev.breakdown)
    }

    /// Logs the final iteration after the last step.
    pub fn finish(&mut self) -> Result<(), TrainError> {
        if self.record.rows.last().map(|r| r.iteration) == Some(self.iteration) {
            return Ok(());
        }
        let ev = self.objective.evaluate(&self.nets, false).map_err(|e| self.tag(e))?;
        self.log(&ev.breakdown, self.busy);
        self.last = Some(ev.breakdown);
        Ok(())
    }
}

/// Result of a complete run.
pub struct TrainOutput {
    pub networks: Vec<DenseNetwork>,
    pub record: RunRecord,
}

/// Trains from the seeded initialization.
pub fn train<P: PdeProblem>(problem: P, cfg: TrainConfig) -> Result<TrainOutput, TrainError> {
    let nets = init_networks(&problem, &cfg.hidden, cfg.seed)?;
    train_with(problem, cfg, nets)
}

/// Trains from given initial networks. Reported wall-clock seconds count
/// loss, gradient and update work only, not metric evaluation.
pub fn train_with<P: PdeProblem>(problem: P, cfg: TrainConfig, nets: Vec<DenseNetwork>) -> Result<TrainOutput, TrainError> {
    let mut s = Session::with_networks(problem, cfg, nets)?;
    let origin = std::time::Instant::now();
    s.set_clock(Box::new(move || origin.elapsed().as_secs_f64()));
    while !s.is_done() {
        s.step()?;
    }
    s.finish()?;
    let (networks, record) = s.into_parts();
    Ok(TrainOutput { networks, record })
}
