//! Two-level stacking: base models on chosen representations feed their
//! predictions, next to a representation's own features, into a meta model.
//!
//! Meta-training rows only ever see base predictions made out of fold: each
//! validation segment of the fold plan is predicted by bases fit on rows
//! strictly before that segment.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calendar::{DateRange, TradingDate};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Representation};
use crate::matrix::Matrix;
use crate::models::ModelSpec;
use crate::pipeline::{self, Pipeline};
use crate::tuning::FoldPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSpec {
    pub model: ModelSpec,
    pub representation: Representation,
    #[serde(default)]
    pub use_pca: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub bases: Vec<BaseSpec>,
    pub meta: ModelSpec,
    pub meta_representation: Representation,
    #[serde(default)]
    pub meta_use_pca: bool,
    /// Pass base decision scores instead of hard labels.
    #[serde(default)]
    pub score_passthrough: bool,
}

impl StackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bases.is_empty() {
            return Err(Error::validation("a stack needs at least one base model"));
        }
        for b in &self.bases {
            b.model.validate()?;
        }
        self.meta.validate()
    }

    pub fn base_column_names(&self) -> Vec<String> {
        self.bases
            .iter()
            .enumerate()
            .map(|(i, b)| format!("base{}_{}_{}", i + 1, b.model.family.tag(), b.representation.tag()))
            .collect()
    }
}

/// Where one validation segment's base predictions came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProvenance {
    pub segment: DateRange,
    pub train_rows: usize,
    /// Latest training date used by the bases for this segment.
    pub train_last: TradingDate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatures {
    /// Dataset rows that received out-of-fold predictions.
    pub rows: Vec<usize>,
    /// `rows.len() x bases` base outputs.
    pub values: Matrix,
    /// Segment index of each entry of `rows`.
    pub row_segment: Vec<usize>,
    pub provenance: Vec<SegmentProvenance>,
}

fn dataset<'a>(datasets: &[&'a FeatureMatrix], r: Representation) -> Result<&'a FeatureMatrix> {
    datasets
        .iter()
        .copied()
        .find(|d| d.representation == r)
        .ok_or_else(|| Error::validation(format!("stack needs representation {} which was not supplied", r.tag())))
}

fn check_aligned(datasets: &[&FeatureMatrix]) -> Result<()> {
    if let Some(first) = datasets.first() {
        if datasets.iter().any(|d| d.dates != first.dates) {
            return Err(Error::validation("stack datasets do not share row dates"));
        }
    }
    Ok(())
}

fn base_input(base: &BaseSpec, data: &FeatureMatrix, rows: &[usize]) -> Matrix {
    data.x.select(rows, &data.view_columns(base.model.family.date_family()))
}

fn base_output(p: &Pipeline, x: &Matrix, scores: bool) -> Result<Vec<f64>> {
    if scores {
        p.decision_scores(x)
    } else {
        Ok(p.predict(x)?.into_iter().map(f64::from).collect())
    }
}

fn fit_base(base: &BaseSpec, data: &FeatureMatrix, rows: &[usize]) -> Result<Pipeline> {
    let y: Vec<u8> = rows.iter().map(|&i| data.labels[i]).collect();
    pipeline::fit(&base.model, base.use_pca, &base_input(base, data, rows), &y)
}

/// Out-of-fold base outputs for the rows of `rows` that fall in a
/// validation segment of `plan`.
pub fn oof_meta_features(
    spec: &StackSpec,
    datasets: &[&FeatureMatrix],
    plan: &FoldPlan,
    rows: &[usize],
) -> Result<MetaFeatures> {
    spec.validate()?;
    check_aligned(datasets)?;
    let dates = &datasets.first().ok_or_else(|| Error::validation("no datasets supplied"))?.dates;
    let mut out_rows = Vec::new();
    let mut row_segment = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut provenance = Vec::new();
    for (k, fold) in plan.folds.iter().enumerate() {
        let seg = fold.validation;
        let target: Vec<usize> = rows.iter().copied().filter(|&i| seg.contains(dates[i])).collect();
        if target.is_empty() {
            continue;
        }
        let train: Vec<usize> =
            rows.iter().copied().filter(|&i| dates[i] < seg.start && dates[i] >= fold.train.start).collect();
        let Some(&last) = train.last() else {
            return Err(Error::InsufficientData(format!("fold {} ({}..{}) has no earlier training rows", k + 1, seg.start, seg.end)));
        };
        let mut cols = Vec::with_capacity(spec.bases.len());
        for b in &spec.bases {
            let data = dataset(datasets, b.representation)?;
            let p = fit_base(b, data, &train).map_err(|e| match e {
                Error::InsufficientData(m) | Error::DegenerateData(m) => {
                    Error::InsufficientData(format!("fold {} ({}..{}): {m}", k + 1, seg.start, seg.end))
                }
                other => other,
            })?;
            cols.push(base_output(&p, &base_input(b, data, &target), spec.score_passthrough)?);
        }
        for (r, &i) in target.iter().enumerate() {
            out_rows.push(i);
            row_segment.push(provenance.len());
            values.push(cols.iter().map(|c| c[r]).collect());
        }
        provenance.push(SegmentProvenance { segment: seg, train_rows: train.len(), train_last: dates[last] });
    }
    let values = if values.is_empty() { Matrix::zeros(0, spec.bases.len()) } else { Matrix::from_rows(&values)? };
    Ok(MetaFeatures { rows: out_rows, values, row_segment, provenance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    pub spec: StackSpec,
    pub bases: Vec<Pipeline>,
    pub meta: Pipeline,
    /// Meta input columns: representation features then base outputs.
    pub meta_columns: Vec<String>,
    pub provenance: Vec<SegmentProvenance>,
    pub meta_rows: usize,
}

fn meta_input(spec: &StackSpec, data: &FeatureMatrix, rows: &[usize], base_cols: &Matrix) -> Result<Matrix> {
    data.x.select(rows, &data.view_columns(spec.meta.family.date_family())).hcat(base_cols)
}

/// Fits the meta model on out-of-fold base outputs over `rows`, then refits
/// every base on all of `rows`.
pub fn train_stack(spec: &StackSpec, datasets: &[&FeatureMatrix], plan: &FoldPlan, rows: &[usize]) -> Result<StackModel> {
    let oof = oof_meta_features(spec, datasets, plan, rows)?;
    if oof.rows.is_empty() {
        return Err(Error::InsufficientData("no training rows fall in a validation segment".into()));
    }
    let meta_data = dataset(datasets, spec.meta_representation)?;
    let x = meta_input(spec, meta_data, &oof.rows, &oof.values)?;
    let y: Vec<u8> = oof.rows.iter().map(|&i| meta_data.labels[i]).collect();
    let meta = pipeline::fit(&spec.meta, spec.meta_use_pca, &x, &y)?;
    let bases = spec
        .bases
        .iter()
        .map(|b| fit_base(b, dataset(datasets, b.representation)?, rows))
        .collect::<Result<Vec<_>>>()?;
    let view = meta_data.view_columns(spec.meta.family.date_family());
    let mut meta_columns: Vec<String> = view.iter().map(|&j| meta_data.names[j].clone()).collect();
    meta_columns.extend(spec.base_column_names());
    Ok(StackModel { spec: spec.clone(), bases, meta, meta_columns, provenance: oof.provenance, meta_rows: oof.rows.len() })
}

impl StackModel {
    pub fn meta_width(&self) -> usize {
        self.meta_columns.len()
    }

    /// Base outputs for `rows`, one column per base.
    pub fn base_outputs(&self, datasets: &[&FeatureMatrix], rows: &[usize]) -> Result<Matrix> {
        let mut cols = Vec::with_capacity(self.bases.len());
        for (b, p) in self.spec.bases.iter().zip(&self.bases) {
            let data = dataset(datasets, b.representation)?;
            cols.push(base_output(p, &base_input(b, data, rows), self.spec.score_passthrough)?);
        }
        let mut m = Matrix::zeros(rows.len(), cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }
}

/// Meta prediction for `rows`, given every representation the stack uses.
pub fn predict_stack(model: &StackModel, datasets: &[&FeatureMatrix], rows: &[usize]) -> Result<Vec<u8>> {
    check_aligned(datasets)?;
    let meta_data = dataset(datasets, model.spec.meta_representation)?;
    let base = model.base_outputs(datasets, rows)?;
    let x = meta_input(&model.spec, meta_data, rows, &base)?;
    if x.ncols() != model.meta_width() {
        return Err(Error::validation(format!("meta input has {} columns, model expects {}", x.ncols(), model.meta_width())));
    }
    model.meta.predict(&x)
}
