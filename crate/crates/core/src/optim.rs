//! Adam with bias correction and a fixed learning rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("gradient entry {index} is not finite ({value})")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid optimizer setting: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let ok = self.lr.is_finite()
            && self.lr > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps.is_finite()
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(OptimError::Config(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n: usize) -> Self {
        Self { cfg, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One update in place. Nothing is modified when the gradient is rejected.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), OptimError> {
        if params.len() != self.m.len() {
            return Err(OptimError::Length { expected: self.m.len(), got: params.len() });
        }
        if grads.len() != self.m.len() {
            return Err(OptimError::Length { expected: self.m.len(), got: grads.len() });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(OptimError::NonFiniteGradient { index, value: grads[index] });
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut a = Adam::new(AdamConfig::default(), 3);
        let mut p = [0.5, -1.0, 2.0];
        a.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, [0.5, -1.0, 2.0]);
        assert_eq!(a.steps(), 1);
    }

    #[test]
    fn first_step_value() {
        let mut a = Adam::new(AdamConfig::default(), 1);
        let mut p = [0.0];
        a.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] - (-0.001 / (1.0 + 1e-8))).abs() < 1e-18);
        assert!((p[0] + 0.000999999990).abs() < 1e-14);
    }

    /// Straight transcription of the published algorithm, kept separate from
    /// the in-place implementation above.
    fn scripted(g: &[f64]) -> f64 {
        let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 0.001, 1e-8);
        let (mut m, mut v, mut th) = (0.0, 0.0, 0.0);
        for (k, &gk) in g.iter().enumerate() {
            let t = (k + 1) as f64;
            m = b1 * m + (1.0 - b1) * gk;
            v = b2 * v + (1.0 - b2) * gk * gk;
            let mh = m / (1.0 - b1.powf(t));
            let vh = v / (1.0 - b2.powf(t));
            th -= lr * mh / (vh.sqrt() + eps);
        }
        th
    }

    #[test]
    fn two_steps_match_scripted_oracle() {
        let mut a = Adam::new(AdamConfig::default(), 1);
        let mut p = [0.0];
        a.step(&mut p, &[1.0]).unwrap();
        a.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] - scripted(&[1.0, 1.0])).abs() < 1e-12);
        let mut a = Adam::new(AdamConfig::default(), 1);
        let mut p = [0.0];
        let g = [0.3, -2.0, 5.0, 0.01];
        for gk in g {
            a.step(&mut p, &[gk]).unwrap();
        }
        assert!((p[0] - scripted(&g)).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_without_mutation() {
        let mut a = Adam::new(AdamConfig::default(), 3);
        let mut p = [1.0, 2.0, 3.0];
        let e = a.step(&mut p, &[0.0, f64::NAN, f64::INFINITY]).unwrap_err();
        assert!(matches!(e, OptimError::NonFiniteGradient { index: 1, .. }));
        assert_eq!(p, [1.0, 2.0, 3.0]);
        assert_eq!(a.steps(), 0);
        assert!(a.step(&mut p, &[0.0; 2]).is_err());
    }

    #[test]
    fn deterministic() {
        let g = [0.1, -0.7, 3.0];
        let run = || {
            let mut a = Adam::new(AdamConfig::default(), 3);
            let mut p = [0.2, 0.4, -0.1];
            for _ in 0..5 {
                a.step(&mut p, &g).unwrap();
            }
            p.map(f64::to_bits)
        };
        assert_eq!(run(), run());
    }

    fn signed(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
        (lo..hi, any::<bool>()).prop_map(|(m, s)| if s { m } else { -m })
    }

    proptest! {
        // the first step is lr·g/(|g| + eps), so the gap is of order eps/|g|
        #[test]
        fn first_step_scale_equivariant(g in prop::collection::vec(signed(1.0, 10.0), 1..20), c in 1.0f64..100.0) {
            let mut p1 = vec![0.0; g.len()];
            let mut p2 = p1.clone();
            Adam::new(AdamConfig::default(), g.len()).step(&mut p1, &g).unwrap();
            let cg: Vec<f64> = g.iter().map(|x| c * x).collect();
            Adam::new(AdamConfig::default(), g.len()).step(&mut p2, &cg).unwrap();
            for (a, b) in p1.iter().zip(&p2) {
                prop_assert!((a - b).abs() <= 1e-8 * a.abs());
            }
        }
    }
}
