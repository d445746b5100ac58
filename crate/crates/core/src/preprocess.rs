//! Scaling and full-rank PCA decorrelation, fitted on training rows only.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::models::Family;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

fn column_means(x: &Matrix) -> Vec<f64> {
    let mut m = vec![0.0; x.ncols()];
    for r in x.rows() {
        for (acc, v) in m.iter_mut().zip(r) {
            *acc += v;
        }
    }
    let n = x.nrows() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn require_rows(x: &Matrix, min: usize) -> Result<()> {
    if x.nrows() < min {
        return Err(Error::InsufficientData(format!("need at least {min} rows to fit, got {}", x.nrows())));
    }
    Ok(())
}

/// Per-feature centering and scaling to unit population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

pub fn fit_standardizer(x: &Matrix) -> Result<Standardizer> {
    require_rows(x, 1)?;
    let mean = column_means(x);
    let mut var = vec![0.0; x.ncols()];
    for r in x.rows() {
        for ((acc, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let n = x.nrows() as f64;
    let std: Vec<f64> = var.iter().map(|v| math::sqrt(v / n)).collect();
    // A column is constant when its spread is rounding noise around the mean.
    let constant = std.iter().zip(&mean).map(|(&s, &m)| s <= 1e-12 * math::abs(m).max(1e-300)).collect();
    Ok(Standardizer { mean, std, constant })
}

impl Standardizer {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        map_columns(x, |j, v| if self.constant[j] { 0.0 } else { (v - self.mean[j]) / self.std[j] })
    }
}

/// Per-feature min-max scaling to [0, 1] on the training rows. Unseen data is
/// not clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_minmax(x: &Matrix) -> Result<MinMaxScaler> {
    require_rows(x, 1)?;
    let mut min = vec![f64::INFINITY; x.ncols()];
    let mut max = vec![f64::NEG_INFINITY; x.ncols()];
    for r in x.rows() {
        for (j, &v) in r.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(MinMaxScaler { min, max })
}

impl MinMaxScaler {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        map_columns(x, |j, v| {
            let range = self.max[j] - self.min[j];
            if range > 0.0 {
                (v - self.min[j]) / range
            } else {
                0.0
            }
        })
    }
}

fn map_columns(x: &Matrix, f: impl Fn(usize, f64) -> f64) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.nrows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = f(j, *v);
        }
    }
    out
}

/// Population covariance of the columns of `x`.
pub fn covariance(x: &Matrix) -> Matrix {
    let mean = column_means(x);
    let p = x.ncols();
    let mut c = Matrix::zeros(p, p);
    for r in x.rows() {
        for a in 0..p {
            let da = r[a] - mean[a];
            if da == 0.0 {
                continue;
            }
            for b in a..p {
                let v = c.get(a, b) + da * (r[b] - mean[b]);
                c.set(a, b, v);
            }
        }
    }
    let n = x.nrows() as f64;
    for a in 0..p {
        for b in a..p {
            let v = c.get(a, b) / n;
            c.set(a, b, v);
            c.set(b, a, v);
        }
    }
    c
}

/// Eigenvalues (unsorted) and eigenvectors (as columns) of a symmetric matrix
/// by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let total: f64 = a.as_slice().iter().map(|x| x * x).sum();
    let threshold = JACOBI_TOL * JACOBI_TOL * total.max(f64::MIN_POSITIVE);
    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a.get(p, q) * a.get(p, q);
            }
        }
        s
    };
    let mut sweeps = 0;
    while off(&a) > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { solver: "jacobi", iterations: sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a.get(p, p), a.get(q, q));
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (math::abs(theta) + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Ok(((0..n).map(|i| a.get(i, i)).collect(), v))
}

/// Full-rank rotation onto principal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// Components as columns, ordered by descending eigenvalue.
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
}

pub fn fit_pca(x: &Matrix) -> Result<PcaTransform> {
    require_rows(x, 2)?;
    let cov = covariance(x);
    let (vals, vecs) = jacobi_eigen(&cov)?;
    let p = vals.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut components = Matrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let col = vecs.column(src);
        // Largest-magnitude coordinate (first on ties) is made positive.
        let mut lead = 0;
        for k in 1..p {
            if math::abs(col[k]) > math::abs(col[lead]) {
                lead = k;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for (k, v) in col.iter().enumerate() {
            components.set(k, dst, sign * v);
        }
    }
    Ok(PcaTransform { mean: column_means(x), components, eigenvalues: order.iter().map(|&i| vals[i]).collect() })
}

impl PcaTransform {
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let centered = map_columns(x, |j, v| v - self.mean[j]);
        centered.matmul(&self.components)
    }

    pub fn inverse(&self, z: &Matrix) -> Result<Matrix> {
        let back = z.matmul(&self.components.transpose())?;
        Ok(map_columns(&back, |j, v| v + self.mean[j]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Standardize,
    Minmax,
    Pca,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingPolicy {
    pub stages: Vec<Stage>,
}

impl ScalingPolicy {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        for (i, s) in stages.iter().enumerate() {
            if *s == Stage::Pca && (i == 0 || stages[i - 1] != Stage::Standardize) {
                return Err(Error::parameter("PCA must directly follow standardization"));
            }
        }
        Ok(Self { stages })
    }
}

pub fn select_policy(family: &Family, use_pca: bool) -> ScalingPolicy {
    let stages = if use_pca {
        vec![Stage::Standardize, Stage::Pca]
    } else if family.wants_standardized() {
        vec![Stage::Standardize]
    } else {
        vec![Stage::Minmax]
    };
    ScalingPolicy { stages }
}

/// Parses a family tag and selects its policy.
pub fn select_policy_for(family_tag: &str, use_pca: bool) -> Result<ScalingPolicy> {
    Ok(select_policy(&Family::from_tag(family_tag)?, use_pca))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum FittedStage {
    Standardize(Standardizer),
    Minmax(MinMaxScaler),
    Pca(PcaTransform),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedScaling {
    pub stages: Vec<FittedStage>,
}

impl FittedScaling {
    /// Fits each stage on the output of the previous ones.
    pub fn fit(policy: &ScalingPolicy, x: &Matrix) -> Result<Self> {
        let mut cur = x.clone();
        let mut stages = Vec::with_capacity(policy.stages.len());
        for s in &policy.stages {
            let fitted = match s {
                Stage::Standardize => FittedStage::Standardize(fit_standardizer(&cur)?),
                Stage::Minmax => FittedStage::Minmax(fit_minmax(&cur)?),
                Stage::Pca => FittedStage::Pca(fit_pca(&cur)?),
            };
            cur = apply_stage(&fitted, &cur)?;
            stages.push(fitted);
        }
        Ok(Self { stages })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = x.clone();
        for s in &self.stages {
            cur = apply_stage(s, &cur)?;
        }
        Ok(cur)
    }
}

fn apply_stage(s: &FittedStage, x: &Matrix) -> Result<Matrix> {
    match s {
        FittedStage::Standardize(t) => Ok(t.apply(x)),
        FittedStage::Minmax(t) => Ok(t.apply(x)),
        FittedStage::Pca(t) => t.apply(x),
    }
}
