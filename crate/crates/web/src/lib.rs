//! Browser bindings: the mean/std loss on user data, the Burgers reference
//! field, and Poisson training stepped from JavaScript.

use stdpinn::loss::{mean_std_loss, population_std};
use stdpinn::problems::{burgers_reference, GaussHermite, Grid, Poisson};
use stdpinn::trainer::{Session, TrainConfig};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// `[mean, std, loss]` of squared errors `e²` at `alpha`.
#[wasm_bindgen]
pub fn loss_of(errors: &[f64], alpha: f64) -> Result<Vec<f64>, JsValue> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(js_err(format!("alpha {alpha} outside [0, 1]")));
    }
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let loss = mean_std_loss(&sq, alpha, 0.0).map_err(js_err)?;
    let mean = sq.iter().sum::<f64>() / sq.len() as f64;
    Ok(vec![mean, population_std(&sq), loss])
}

/// Reference `u(x, t)` of viscous Burgers at `n` equispaced `x` in [−1, 1].
#[wasm_bindgen]
pub fn burgers_profile(t: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    if !(0.0..=1.0).contains(&t) || n < 2 {
        return Err(js_err("need t in [0, 1] and at least 2 points"));
    }
    let gh = GaussHermite::new(100);
    (0..n)
        .map(|i| burgers_reference(-1.0 + 2.0 * i as f64 / (n - 1) as f64, t, &gh).map_err(js_err))
        .collect()
}

/// Poisson training that advances a few Adam steps per call.
#[wasm_bindgen]
pub struct PoissonDemo {
    session: Session<Poisson>,
}

#[wasm_bindgen]
impl PoissonDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(alpha: f64, seed: u64) -> Result<PoissonDemo, JsValue> {
        let mut cfg = TrainConfig::for_problem("poisson").map_err(js_err)?;
        cfg.alpha = alpha;
        cfg.seed = seed;
        cfg.iterations = usize::MAX / 2;
        cfg.log_every = usize::MAX / 2;
        cfg.eval_grid = Grid::new(vec![201]);
        Ok(Self { session: Session::new(Poisson, cfg).map_err(js_err)? })
    }

    /// Runs `steps` iterations; returns the last loss.
    pub fn step(&mut self, steps: usize) -> Result<f64, JsValue> {
        let mut loss = f64::NAN;
        for _ in 0..steps {
            loss = self.session.step().map_err(js_err)?.total;
        }
        Ok(loss)
    }

    pub fn iteration(&self) -> usize {
        self.session.iteration()
    }

    pub fn grid(&mut self) -> Vec<f64> {
        self.session.evaluator().points().to_vec()
    }

    pub fn reference(&mut self) -> Vec<f64> {
        self.session.evaluator().reference()[0].clone()
    }

    pub fn prediction(&mut self) -> Vec<f64> {
        let nets = self.session.networks().to_vec();
        self.session.evaluator().predict(&nets).swap_remove(0)
    }

    /// RMS error against the reference on the grid.
    pub fn l2(&mut self) -> f64 {
        let nets = self.session.networks().to_vec();
        self.session.evaluator().errors(&nets)[0].0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_of_squares_the_errors() {
        let r = loss_of(&[1.0, -(3f64.sqrt())], 0.5).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12 && (r[2] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn burgers_profile_is_odd() {
        let u = burgers_profile(0.3, 21).unwrap();
        for i in 0..21 {
            assert!((u[i] + u[20 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_demo_steps() {
        let mut d = PoissonDemo::new(0.8, 0).unwrap();
        let first = d.step(1).unwrap();
        let later = d.step(200).unwrap();
        assert_eq!(d.iteration(), 201);
        assert!(later < first);
        assert_eq!(d.prediction().len(), d.grid().len());
        assert!(d.l2().is_finite());
    }
}
