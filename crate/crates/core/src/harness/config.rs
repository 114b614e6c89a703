//! Experiment configuration: defaults, validation, and the flat key=value
//! file format shared by config files and manifests.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::loss::PairWeighting;
use crate::registry::ESTIMATOR_NAMES;
use crate::train::{BatchSchedule, TrainConfig};

/// Where the comparison data comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceSpec {
    /// The hard instance: one heavily compared pair, thin tail pairs.
    Hard { num_arms: usize, samples: usize },
    /// A pairwise dataset file previously written by the library.
    CustomFile(PathBuf),
}

/// Everything a full experiment run needs. The same settings round-trip
/// through [`ExperimentConfig::apply_kv`], config files, and manifests, so
/// any emitted manifest can be fed back in as a config file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    /// Estimators to run, a subset of the registry names.
    pub estimators: Vec<String>,
    /// Reward step size for every estimator.
    pub alpha: f64,
    /// Label step size for the smoothing estimators.
    pub beta: f64,
    /// Regularizer for the pessimistic estimator.
    pub epsilon: f64,
    pub epochs: usize,
    pub batch: BatchSchedule,
    pub eval_every: usize,
    pub lambda_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Weight population loss by the sampling distribution instead of
    /// uniformly over supported pairs.
    pub mu_weighted_eval: bool,
}

impl Default for ExperimentConfig {
    /// The desk-scale bandit defaults: 10 arms, 60 samples, step sizes
    /// 0.01 and 0.001, single-record batches, all four estimators.
    fn default() -> Self {
        ExperimentConfig {
            instance: InstanceSpec::Hard { num_arms: 10, samples: 60 },
            estimators: ESTIMATOR_NAMES.iter().map(|s| s.to_string()).collect(),
            alpha: 0.01,
            beta: 0.001,
            epsilon: 0.01,
            epochs: 2000,
            batch: BatchSchedule::Minibatch(1),
            eval_every: 1,
            lambda_grid: crate::policy::default_lambda_grid(),
            trials: 1,
            seed: 0,
            out_dir: PathBuf::from("out"),
            mu_weighted_eval: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::config("at least one estimator must be selected"));
        }
        for name in &self.estimators {
            if !ESTIMATOR_NAMES.contains(&name.as_str()) {
                return Err(Error::config(format!(
                    "unknown estimator {name:?}; known: {}",
                    ESTIMATOR_NAMES.join(", ")
                )));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if let InstanceSpec::Hard { num_arms, samples } = self.instance {
            if num_arms < 2 {
                return Err(Error::config("hard instance needs at least 2 arms"));
            }
            if samples == 0 {
                return Err(Error::config("hard instance needs at least 1 sample"));
            }
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::config("lambda grid must be nonempty"));
        }
        self.train_config_for("mle").validate()
    }

    /// Training hyperparameters for one estimator. The non-smoothing
    /// estimators get `beta = 0`; everything else is shared. Fits run the
    /// full epoch budget so traces cover the whole history.
    pub fn train_config_for(&self, estimator: &str) -> TrainConfig {
        let beta = match estimator {
            "ids" | "ids_v2" => self.beta,
            _ => 0.0,
        };
        TrainConfig {
            alpha: self.alpha,
            beta,
            epochs: self.epochs,
            batch: self.batch,
            seed: self.seed,
            eval_every: self.eval_every,
            convergence_tol: 0.0,
            restore_best: false,
        }
    }

    pub fn population_weighting<'a>(
        &self,
        mu: &'a crate::model::ComparisonDistribution,
    ) -> PairWeighting<'a> {
        if self.mu_weighted_eval {
            PairWeighting::Mu(mu)
        } else {
            PairWeighting::UniformPairs
        }
    }

    /// Applies one `key=value` setting. Both config files and command-line
    /// flags funnel through here, so the two cannot drift apart.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::config(format!("bad value {value:?} for {what}"));
        match key {
            "instance" => {
                if value == "hard" {
                    if let InstanceSpec::CustomFile(_) = self.instance {
                        self.instance = InstanceSpec::Hard { num_arms: 10, samples: 60 };
                    }
                } else {
                    self.instance = InstanceSpec::CustomFile(PathBuf::from(value));
                }
            }
            "arms" => {
                let arms: usize = value.parse().map_err(|_| bad("arms"))?;
                match &mut self.instance {
                    InstanceSpec::Hard { num_arms, .. } => *num_arms = arms,
                    other => *other = InstanceSpec::Hard { num_arms: arms, samples: 60 },
                }
            }
            "samples" => {
                let n: usize = value.parse().map_err(|_| bad("samples"))?;
                match &mut self.instance {
                    InstanceSpec::Hard { samples, .. } => *samples = n,
                    other => *other = InstanceSpec::Hard { num_arms: 10, samples: n },
                }
            }
            "estimators" => {
                self.estimators =
                    value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            }
            "alpha" => self.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "beta" => self.beta = value.parse().map_err(|_| bad("beta"))?,
            "epsilon" => self.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch_size" => {
                let b: usize = value.parse().map_err(|_| bad("batch_size"))?;
                self.batch = if b == 0 { BatchSchedule::Full } else { BatchSchedule::Minibatch(b) };
            }
            "eval_every" => self.eval_every = value.parse().map_err(|_| bad("eval_every"))?,
            "lambda_grid" => {
                let grid: std::result::Result<Vec<f64>, _> =
                    value.split(',').map(|s| s.trim().parse()).collect();
                self.lambda_grid = grid.map_err(|_| bad("lambda_grid"))?;
            }
            "trials" => self.trials = value.parse().map_err(|_| bad("trials"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "out" => self.out_dir = PathBuf::from(value),
            "population_weighting" => {
                self.mu_weighted_eval = match value {
                    "uniform" => false,
                    "mu" => true,
                    _ => return Err(bad("population_weighting")),
                };
            }
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a flat key=value config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    /// Layers a config file's settings onto this config.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// The manifest entries that reconstruct this config, in file order.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let mut entries = Vec::new();
        let mut push = |k: &str, v: String| entries.push((k.to_string(), v));
        match &self.instance {
            InstanceSpec::Hard { num_arms, samples } => {
                push("instance", "hard".to_string());
                push("arms", num_arms.to_string());
                push("samples", samples.to_string());
            }
            InstanceSpec::CustomFile(path) => {
                push("instance", path.display().to_string());
            }
        }
        push("estimators", self.estimators.join(","));
        push("alpha", format!("{}", self.alpha));
        push("beta", format!("{}", self.beta));
        push("epsilon", format!("{}", self.epsilon));
        push("epochs", self.epochs.to_string());
        let batch = match self.batch {
            BatchSchedule::Full => 0,
            BatchSchedule::Minibatch(b) => b,
        };
        push("batch_size", batch.to_string());
        push("eval_every", self.eval_every.to_string());
        push(
            "lambda_grid",
            self.lambda_grid.iter().map(|l| format!("{l}")).collect::<Vec<_>>().join(","),
        );
        push("trials", self.trials.to_string());
        push("seed", self.seed.to_string());
        push("out", self.out_dir.display().to_string());
        push(
            "population_weighting",
            if self.mu_weighted_eval { "mu" } else { "uniform" }.to_string(),
        );
        entries
    }
}
