//! Runtime-selectable reward estimators behind one trait.
//!
//! Callers that do not care which estimator runs (the CLI, the experiment
//! harness) work against [`RewardEstimator`] and pick a concrete one by
//! name. Callers that need variant-specific outputs keep using the typed
//! functions in [`crate::train`] and [`crate::pessimism`] directly.

use crate::data::PairwiseDataset;
use crate::error::{Error, Result};
use crate::model::RewardVector;
use crate::pessimism::fit_pessimistic_mle;
use crate::train::{fit_ids, fit_ids_v2, fit_mle, PopulationEval, SoftLabelState, TrainConfig, TrainTrace};

/// Everything a fit can produce. Fields a variant does not define are None.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Reference-normalized estimate.
    pub reward: RewardVector,
    pub trace: TrainTrace,
    /// Final label or confidence state, for the smoothing variants.
    pub labels: Option<SoftLabelState>,
    /// Per-arm subtracted penalties, for the pessimistic variant.
    pub penalties: Option<Vec<f64>>,
}

/// A reward estimator selectable at runtime.
pub trait RewardEstimator {
    /// Registry name, also used in output file names.
    fn name(&self) -> &'static str;

    fn fit(
        &self,
        data: &PairwiseDataset,
        cfg: &TrainConfig,
        eval: Option<&PopulationEval>,
    ) -> Result<FitOutcome>;
}

/// Plain maximum likelihood.
pub struct MaxLikelihood;

impl RewardEstimator for MaxLikelihood {
    fn name(&self) -> &'static str {
        "mle"
    }

    fn fit(
        &self,
        data: &PairwiseDataset,
        cfg: &TrainConfig,
        eval: Option<&PopulationEval>,
    ) -> Result<FitOutcome> {
        let (reward, trace) = fit_mle(data, cfg, eval)?;
        Ok(FitOutcome { reward, trace, labels: None, penalties: None })
    }
}

/// Maximum likelihood with per-arm coverage penalties subtracted.
pub struct PessimisticMaxLikelihood {
    pub epsilon: f64,
}

impl RewardEstimator for PessimisticMaxLikelihood {
    fn name(&self) -> &'static str {
        "pessimistic"
    }

    fn fit(
        &self,
        data: &PairwiseDataset,
        cfg: &TrainConfig,
        eval: Option<&PopulationEval>,
    ) -> Result<FitOutcome> {
        let (reward, trace, penalties) = fit_pessimistic_mle(data, cfg, eval, self.epsilon)?;
        Ok(FitOutcome { reward, trace, labels: None, penalties: Some(penalties) })
    }
}

/// Label smoothing: targets relax toward model predictions each epoch.
pub struct DataSmoothing;

impl RewardEstimator for DataSmoothing {
    fn name(&self) -> &'static str {
        "ids"
    }

    fn fit(
        &self,
        data: &PairwiseDataset,
        cfg: &TrainConfig,
        eval: Option<&PopulationEval>,
    ) -> Result<FitOutcome> {
        let (reward, trace, labels) = fit_ids(data, cfg, eval)?;
        Ok(FitOutcome { reward, trace, labels: Some(labels), penalties: None })
    }
}

/// Confidence weighting: hard labels, per-record weights `max(2c - 1, 0)`.
pub struct DataSmoothingV2;

impl RewardEstimator for DataSmoothingV2 {
    fn name(&self) -> &'static str {
        "ids_v2"
    }

    fn fit(
        &self,
        data: &PairwiseDataset,
        cfg: &TrainConfig,
        eval: Option<&PopulationEval>,
    ) -> Result<FitOutcome> {
        let (reward, trace, labels) = fit_ids_v2(data, cfg, eval)?;
        Ok(FitOutcome { reward, trace, labels: Some(labels), penalties: None })
    }
}

/// Registry order is the order experiments run estimators in.
pub const ESTIMATOR_NAMES: [&str; 4] = ["mle", "pessimistic", "ids", "ids_v2"];

/// Looks an estimator up by name. `epsilon` only affects the pessimistic
/// variant; the others ignore it.
pub fn by_name(name: &str, epsilon: f64) -> Result<Box<dyn RewardEstimator>> {
    match name {
        "mle" => Ok(Box::new(MaxLikelihood)),
        "pessimistic" => Ok(Box::new(PessimisticMaxLikelihood { epsilon })),
        "ids" => Ok(Box::new(DataSmoothing)),
        "ids_v2" => Ok(Box::new(DataSmoothingV2)),
        other => Err(Error::config(format!(
            "unknown estimator '{other}' (expected one of: {})",
            ESTIMATOR_NAMES.join(", ")
        ))),
    }
}
