//! Fold-plan cross-validated accuracy of one configuration.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Config, FoldPlan, TierSpace};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::matrix::Matrix;
use crate::models::{accuracy, Family, ModelSpec};
use crate::pipeline;

/// `(name, category)` of the columns a model of `family` sees.
pub fn feature_layout(data: &FeatureMatrix, family: &Family) -> Vec<(String, String)> {
    data.view_columns(family.date_family())
        .into_iter()
        .map(|j| (data.names[j].clone(), data.categories[j].clone()))
        .collect()
}

pub struct CvTask<'a> {
    pub data: &'a FeatureMatrix,
    pub space: &'a TierSpace,
    pub family: Family,
    pub use_pca: bool,
    pub seed: u64,
    view: Vec<usize>,
    folds: Vec<(Vec<usize>, Vec<usize>)>,
}

impl<'a> CvTask<'a> {
    pub fn new(
        data: &'a FeatureMatrix,
        plan: &FoldPlan,
        space: &'a TierSpace,
        family: Family,
        use_pca: bool,
        seed: u64,
    ) -> Result<Self> {
        let view = data.view_columns(family.date_family());
        if view.len() != space.features.len()
            || view.iter().zip(&space.features).any(|(&j, (name, _))| &data.names[j] != name)
        {
            return Err(Error::validation("tier space features do not match the dataset columns"));
        }
        let mut folds = Vec::with_capacity(plan.folds.len());
        for (k, f) in plan.folds.iter().enumerate() {
            let train = data.rows_in(f.train);
            let val = data.rows_in(f.validation);
            if train.is_empty() || val.is_empty() {
                return Err(Error::DateCoverage(format!("fold {} has no training or validation rows", k + 1)));
            }
            folds.push((train, val));
        }
        Ok(Self { data, space, family, use_pca, seed, view, folds })
    }

    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    pub fn spec(&self, config: &Config) -> ModelSpec {
        ModelSpec { family: self.family.clone(), params: TierSpace::hyperparameters(config), seed: self.seed }
    }

    /// Dataset column indices the configuration keeps.
    pub fn columns(&self, config: &Config) -> Result<Vec<usize>> {
        let cols: Vec<usize> = self.space.feature_mask(config).into_iter().map(|j| self.view[j]).collect();
        if cols.is_empty() {
            return Err(Error::validation("configuration disables every feature"));
        }
        Ok(cols)
    }

    fn slice(&self, rows: &[usize], cols: &[usize]) -> (Matrix, Vec<u8>) {
        (self.data.x.select(rows, cols), rows.iter().map(|&i| self.data.labels[i]).collect())
    }

    /// Validation accuracy of fold `k`; scaling is fit on its training rows.
    pub fn fold_accuracy(&self, config: &Config, k: usize) -> Result<f64> {
        let cols = self.columns(config)?;
        let (train, val) = &self.folds[k];
        let (xt, yt) = self.slice(train, &cols);
        let (xv, yv) = self.slice(val, &cols);
        let p = pipeline::fit(&self.spec(config), self.use_pca, &xt, &yt)?;
        Ok(accuracy(&p.predict(&xv)?, &yv))
    }

    /// Mean validation accuracy over the plan.
    pub fn cv_accuracy(&self, config: &Config) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.folds.len() {
            total += self.fold_accuracy(config, k)?;
        }
        Ok(total / self.folds.len() as f64)
    }
}
