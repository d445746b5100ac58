//! Binary classifiers.
//!
//! Every model exposes a decision score and a threshold; the label is 1 iff
//! the score is strictly above the threshold, so exact ties go to 0.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::DateFamily;
use crate::matrix::Matrix;

pub mod bagging;
pub mod boost;
pub mod knn;
pub mod logistic;
pub mod svm;
pub mod tree;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Logistic,
    Knn,
    Svm,
    Tree,
    Bagging(Box<Family>),
    RandomForest,
    ExtraTrees,
    GradBoost,
    HistGradBoost,
    NewtonBoost,
}

impl Family {
    pub const BASIC: [Family; 9] = [
        Family::Logistic,
        Family::Knn,
        Family::Svm,
        Family::Tree,
        Family::RandomForest,
        Family::ExtraTrees,
        Family::GradBoost,
        Family::HistGradBoost,
        Family::NewtonBoost,
    ];

    /// `LOGISTIC`, `BAGGING(SVM)`, ...
    pub fn tag(&self) -> String {
        match self {
            Family::Logistic => "LOGISTIC".into(),
            Family::Knn => "KNN".into(),
            Family::Svm => "SVM".into(),
            Family::Tree => "TREE".into(),
            Family::Bagging(inner) => format!("BAGGING({})", inner.tag()),
            Family::RandomForest => "RANDOM_FOREST".into(),
            Family::ExtraTrees => "EXTRA_TREES".into(),
            Family::GradBoost => "GRAD_BOOST".into(),
            Family::HistGradBoost => "HIST_GRAD_BOOST".into(),
            Family::NewtonBoost => "NEWTON_BOOST".into(),
        }
    }

    pub fn from_tag(tag: &str) -> Result<Family> {
        let tag = tag.trim();
        if let Some(inner) = tag.strip_prefix("BAGGING(").and_then(|s| s.strip_suffix(')')) {
            let inner = Family::from_tag(inner)?;
            if matches!(inner, Family::Bagging(_)) {
                return Err(Error::parameter("nested bagging is not supported"));
            }
            return Ok(Family::Bagging(Box::new(inner)));
        }
        Family::BASIC
            .into_iter()
            .find(|f| f.tag() == tag)
            .ok_or_else(|| Error::parameter(format!("unknown model family {tag}")))
    }

    /// Families that receive standardized rather than min-max inputs.
    pub fn wants_standardized(&self) -> bool {
        match self {
            Family::Logistic | Family::Svm => true,
            Family::Bagging(inner) => matches!(**inner, Family::Logistic | Family::Svm),
            _ => false,
        }
    }

    pub fn date_family(&self) -> DateFamily {
        match self {
            Family::Logistic | Family::Knn | Family::Svm => DateFamily::Continuous,
            Family::Bagging(inner) => inner.date_family(),
            _ => DateFamily::Tree,
        }
    }

    fn needs_both_classes(&self) -> bool {
        matches!(self, Family::Logistic | Family::Svm)
    }
}

impl Serialize for Family {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.tag())
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Family::from_tag(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Cat(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

fn param_type_error(key: &str, want: &str) -> Error {
    Error::parameter(format!("hyperparameter {key} must be {want}"))
}

pub fn get_real(p: &Params, key: &str, default: f64) -> Result<f64> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| param_type_error(key, "numeric")),
    }
}

pub fn get_int(p: &Params, key: &str, default: i64) -> Result<i64> {
    match p.get(key) {
        None => Ok(default),
        Some(ParamValue::Int(v)) => Ok(*v),
        Some(ParamValue::Real(v)) if *v == libm::round(*v) => Ok(*v as i64),
        Some(_) => Err(param_type_error(key, "an integer")),
    }
}

pub fn get_bool(p: &Params, key: &str, default: bool) -> Result<bool> {
    match p.get(key) {
        None => Ok(default),
        Some(ParamValue::Bool(b)) => Ok(*b),
        Some(_) => Err(param_type_error(key, "a boolean")),
    }
}

pub fn get_cat<'a>(p: &'a Params, key: &str, default: &'a str) -> Result<&'a str> {
    match p.get(key) {
        None => Ok(default),
        Some(ParamValue::Cat(s)) => Ok(s),
        Some(_) => Err(param_type_error(key, "a string")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self { family, params: Params::new(), seed: 0 }
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks that every hyperparameter is a known dimension of the family's
    /// space and lies within its bounds.
    pub fn validate(&self) -> Result<()> {
        let space = default_search_space(&self.family)?;
        for (key, value) in &self.params {
            let dim = space
                .dims
                .iter()
                .find(|d| &d.name == key)
                .ok_or_else(|| Error::parameter(format!("{} has no hyperparameter {key}", self.family.tag())))?;
            if !dim.kind.admits(value) {
                return Err(Error::parameter(format!(
                    "{}: {key} = {value:?} is outside {:?}",
                    self.family.tag(),
                    dim.kind
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DimKind {
    Real { lo: f64, hi: f64, log: bool },
    Int { lo: i64, hi: i64 },
    Categorical { options: Vec<String> },
    Boolean,
}

impl DimKind {
    pub fn admits(&self, v: &ParamValue) -> bool {
        match (self, v) {
            (DimKind::Real { lo, hi, .. }, v) => v.as_f64().is_some_and(|x| *lo <= x && x <= *hi),
            (DimKind::Int { lo, hi }, ParamValue::Int(x)) => lo <= x && x <= hi,
            (DimKind::Categorical { options }, ParamValue::Cat(s)) => options.contains(s),
            (DimKind::Boolean, ParamValue::Bool(_)) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub kind: DimKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn push(&mut self, name: &str, kind: DimKind) {
        self.dims.push(Dimension { name: name.to_string(), kind });
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }
}

fn real(lo: f64, hi: f64, log: bool) -> DimKind {
    DimKind::Real { lo, hi, log }
}

fn int(lo: i64, hi: i64) -> DimKind {
    DimKind::Int { lo, hi }
}

pub const SVM_KERNELS: [&str; 4] = ["linear", "rbf", "sigmoid", "polynomial"];

/// Hyperparameter ranges per family. These are engineering defaults.
pub fn default_search_space(family: &Family) -> Result<SearchSpace> {
    let mut s = SearchSpace::default();
    let tree_dims = |s: &mut SearchSpace| {
        s.push("max_depth", int(1, 20));
        s.push("min_leaf", int(1, 50));
    };
    match family {
        Family::Logistic => {
            s.push("l2", real(1e-6, 1e2, true));
            s.push("lr", real(1e-4, 1.0, true));
            s.push("iters", int(100, 5000));
        }
        Family::Knn => s.push("k", int(1, 101)),
        Family::Svm => {
            let options = SVM_KERNELS.iter().map(|k| k.to_string()).collect();
            s.push("kernel", DimKind::Categorical { options });
            s.push("c", real(1e-3, 1e3, true));
            s.push("gamma", real(1e-5, 10.0, true));
            s.push("degree", int(2, 5));
            s.push("coef0", real(-1.0, 1.0, false));
        }
        Family::Tree => tree_dims(&mut s),
        Family::RandomForest | Family::ExtraTrees => {
            tree_dims(&mut s);
            s.push("n_trees", int(10, 500));
        }
        Family::GradBoost | Family::HistGradBoost | Family::NewtonBoost => {
            tree_dims(&mut s);
            s.push("shrinkage", real(0.01, 0.5, true));
            s.push("n_stages", int(10, 500));
            if *family == Family::HistGradBoost {
                s.push("bins", int(16, 255));
            }
            if *family == Family::NewtonBoost {
                s.push("l2", real(1e-3, 10.0, true));
            }
        }
        Family::Bagging(inner) => {
            if matches!(**inner, Family::Bagging(_)) {
                return Err(Error::parameter("nested bagging is not supported"));
            }
            s = default_search_space(inner)?;
            s.push("bag_estimators", int(2, 50));
            s.push("bag_bootstrap", DimKind::Boolean);
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Logistic(logistic::LogisticModel),
    Knn(knn::KnnModel),
    Svm(svm::SvmModel),
    Tree(tree::DecisionTree),
    Forest(tree::Forest),
    Bagging(bagging::BaggingModel),
    Boost(boost::BoostModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub n_rows: usize,
    pub n_features: usize,
    pub fitted: Fitted,
}

pub(crate) fn check_inputs(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::validation(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if y.len() < 2 {
        return Err(Error::insufficient("training needs at least two rows"));
    }
    if !x.all_finite() {
        return Err(Error::validation("training matrix has non-finite entries"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    Ok(())
}

pub(crate) fn both_classes(y: &[u8]) -> bool {
    y.contains(&0) && y.contains(&1)
}

pub fn train(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> Result<TrainedModel> {
    check_inputs(x, y)?;
    spec.validate()?;
    if spec.family.needs_both_classes() && !both_classes(y) {
        return Err(Error::DegenerateData(format!("{} needs both classes in y", spec.family.tag())));
    }
    let fitted = fit_family(&spec.family, &spec.params, spec.seed, x, y)?;
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        n_rows: x.nrows(),
        n_features: x.ncols(),
        fitted,
    })
}

pub(crate) fn fit_family(family: &Family, p: &Params, seed: u64, x: &Matrix, y: &[u8]) -> Result<Fitted> {
    Ok(match family {
        Family::Logistic => Fitted::Logistic(logistic::fit(&logistic::LogisticParams::from_params(p)?, x, y)?),
        Family::Knn => Fitted::Knn(knn::fit(get_int(p, "k", 5)? as usize, x, y)?),
        Family::Svm => Fitted::Svm(svm::fit(&svm::SvmParams::from_params(p)?, x, y)?.0),
        Family::Tree => Fitted::Tree(tree::fit_tree(&tree::TreeParams::from_params(p)?, x, y, seed)?),
        Family::RandomForest => {
            Fitted::Forest(tree::fit_forest(&tree::ForestParams::from_params(p, false)?, x, y, seed)?)
        }
        Family::ExtraTrees => {
            Fitted::Forest(tree::fit_forest(&tree::ForestParams::from_params(p, true)?, x, y, seed)?)
        }
        Family::GradBoost | Family::HistGradBoost | Family::NewtonBoost => {
            Fitted::Boost(boost::fit(&boost::BoostParams::from_params(family, p)?, x, y)?)
        }
        Family::Bagging(inner) => Fitted::Bagging(bagging::fit(inner, p, seed, x, y)?),
    })
}

impl Fitted {
    pub(crate) fn scores(&self, x: &Matrix) -> Vec<f64> {
        match self {
            Fitted::Logistic(m) => m.probabilities(x),
            Fitted::Knn(m) => m.scores(x),
            Fitted::Svm(m) => m.decision_function(x),
            Fitted::Tree(m) => (0..x.nrows()).map(|i| m.predict_row(x.row(i))).collect(),
            Fitted::Forest(m) => m.scores(x),
            Fitted::Bagging(m) => m.scores(x),
            Fitted::Boost(m) => m.raw_scores(x),
        }
    }

    pub(crate) fn threshold(&self) -> f64 {
        match self {
            Fitted::Svm(_) | Fitted::Boost(_) => 0.0,
            _ => 0.5,
        }
    }

    pub(crate) fn predict(&self, x: &Matrix) -> Vec<u8> {
        let t = self.threshold();
        self.scores(x).into_iter().map(|s| u8::from(s > t)).collect()
    }
}

impl TrainedModel {
    fn check(&self, x: &Matrix) -> Result<()> {
        if x.ncols() != self.n_features {
            return Err(Error::validation(format!(
                "model was fit on {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn decision_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.fitted.scores(x))
    }

    /// Score above which the label is 1 (0 for margin/log-odds models,
    /// 0.5 for probability and vote-share models).
    pub fn threshold(&self) -> f64 {
        self.fitted.threshold()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        self.check(x)?;
        Ok(self.fitted.predict(x))
    }
}

pub fn accuracy(pred: &[u8], y: &[u8]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}
