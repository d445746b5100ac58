//! A model together with the scaling stages its family calls for.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::models::{self, ModelSpec, TrainedModel};
use crate::preprocess::{select_policy, FittedScaling, ScalingPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub policy: ScalingPolicy,
    pub scaling: FittedScaling,
    pub model: TrainedModel,
}

/// Fits the scaling policy for `spec.family` on `x`, then the model on the
/// scaled rows.
pub fn fit(spec: &ModelSpec, use_pca: bool, x: &Matrix, y: &[u8]) -> Result<Pipeline> {
    let policy = select_policy(&spec.family, use_pca);
    let scaling = FittedScaling::fit(&policy, x)?;
    let model = models::train(spec, &scaling.apply(x)?, y)?;
    Ok(Pipeline { policy, scaling, model })
}

impl Pipeline {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        self.model.predict(&self.scaling.apply(x)?)
    }

    pub fn decision_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model.decision_scores(&self.scaling.apply(x)?)
    }
}
