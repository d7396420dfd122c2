//! Experiment configuration files (TOML, unknown keys rejected).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use stdpinn::loss::{ErrorKind, TermWeights};
use stdpinn::optim::AdamConfig;
use stdpinn::problems::{Grid, Sampling};
use stdpinn::trainer::{TrainConfig, Variant};

/// One experiment. Every key except `problem` is optional and falls back to
/// the problem's documented default.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub alpha: Option<f64>,
    pub error: Option<ErrorKind>,
    pub iterations: Option<usize>,
    pub n_collocation: Option<usize>,
    pub n_data: Option<usize>,
    pub sampling: Option<Sampling>,
    pub seed: Option<u64>,
    /// `"1001"` or `"256x101"`.
    pub eval_grid: Option<String>,
    pub log_every: Option<usize>,
    pub gpinn_weight: Option<f64>,
    pub variance_eps: Option<f64>,
    pub variance_term: Option<bool>,
    pub hidden: Option<Vec<usize>>,
    pub adam: Option<AdamConfig>,
    pub weights: Option<TermWeights>,
    pub out_dir: Option<PathBuf>,
    pub sweep: Option<SweepSection>,
}

/// Comparison list of a sweep.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Any of `mse`, `huber`, `gpinn`.
    #[serde(default)]
    pub variants: Vec<String>,
    #[serde(default = "one")]
    pub huber_delta: f64,
    #[serde(default = "one")]
    pub gpinn_weight: f64,
    /// Collocation counts; defaults to the run's `n_collocation`.
    #[serde(default)]
    pub counts: Vec<usize>,
    /// Defaults to the run's seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// The training configuration with defaults filled in, validated.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::for_problem(&self.problem)?;
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    c.$f = v.clone();
                }
            )*};
        }
        set!(alpha, error, iterations, n_collocation, n_data, sampling, seed, log_every, gpinn_weight, variance_eps, variance_term, hidden, adam, weights);
        if let Some(g) = &self.eval_grid {
            c.eval_grid = Grid::parse(g)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Variants named by the `[sweep]` table, α values first.
    pub fn variants(&self) -> Result<Vec<Variant>> {
        let s = self.sweep.clone().unwrap_or_default();
        let mut out: Vec<Variant> = s.alphas.iter().map(|&a| Variant::variance(a)).collect();
        for v in &s.variants {
            out.push(match v.as_str() {
                "mse" => Variant::mse(),
                "huber" => Variant::huber(s.huber_delta),
                "gpinn" => Variant::gpinn(s.gpinn_weight),
                other => bail!("unknown variant `{other}` (expected mse, huber or gpinn)"),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_problem_defaults() {
        let c = ExperimentConfig::parse("problem = \"poisson\"").unwrap().train_config().unwrap();
        assert_eq!((c.alpha, c.iterations, c.n_collocation, c.sampling), (0.8, 4000, 100, Sampling::Equispaced));
    }

    #[test]
    fn overrides_and_nested_tables() {
        let text = r#"
problem = "burgers"
alpha = 0.5
error = { kind = "huber", delta = 2.0 }
eval_grid = "64x11"
[adam]
lr = 0.01
beta1 = 0.9
beta2 = 0.999
eps = 1e-8
"#;
        let c = ExperimentConfig::parse(text).unwrap().train_config().unwrap();
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.error, ErrorKind::Huber { delta: 2.0 });
        assert_eq!(c.eval_grid, Grid::new(vec![64, 11]));
        assert_eq!(c.adam.lr, 0.01);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let e = ExperimentConfig::parse("problem = \"poisson\"\nalpah = 0.5").unwrap_err();
        assert!(format!("{e:#}").contains("alpah"), "{e:#}");
        let c = ExperimentConfig::parse("problem = \"poisson\"\nalpha = 1.3").unwrap();
        assert!(c.train_config().is_err());
        let c = ExperimentConfig::parse("problem = \"poisson\"\n[sweep]\nvariants = [\"ridge\"]").unwrap();
        assert!(c.variants().is_err());
    }

    #[test]
    fn sweep_variants_in_order() {
        let text = "problem = \"poisson\"\n[sweep]\nalphas = [0.5, 1.0]\nvariants = [\"huber\", \"gpinn\"]\n";
        let v = ExperimentConfig::parse(text).unwrap().variants().unwrap();
        let labels: Vec<&str> = v.iter().map(|v| v.label.as_str()).collect();
        assert_eq!(labels, ["alpha=0.5", "alpha=1", "huber(delta=1)", "gpinn(w=1)"]);
    }
}
