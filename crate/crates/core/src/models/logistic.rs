//! L2-regularized logistic regression fit by batch gradient descent.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{get_int, get_real, Params};
use crate::error::Result;
use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub l2: f64,
    pub lr: f64,
    pub iters: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl LogisticParams {
    pub fn from_params(p: &Params) -> Result<Self> {
        Ok(Self {
            l2: get_real(p, "l2", 1e-3)?,
            lr: get_real(p, "lr", 0.1)?,
            iters: get_int(p, "iters", 1000)?.max(1) as usize,
            tol: 1e-6,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn probabilities(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| math::sigmoid(dot(&self.weights, r) + self.bias)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean log loss plus `l2/2 * |w|^2`, with its gradient in `w` and in the
/// (unregularized) bias.
pub fn loss_and_gradient(w: &[f64], b: f64, x: &Matrix, y: &[u8], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    let mut loss = 0.0;
    for (row, &yi) in x.rows().zip(y) {
        let f = dot(w, row) + b;
        loss += math::log_loss(f, yi);
        let r = math::sigmoid(f) - yi as f64;
        gb += r;
        for (g, &v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
    }
    let reg: f64 = w.iter().map(|v| v * v).sum();
    for (g, &wi) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    (loss / n + 0.5 * l2 * reg, gw, gb / n)
}

/// The step is capped at `1/L`, with `L` an upper bound on the loss
/// curvature, so large learning rates cannot diverge.
pub fn fit(params: &LogisticParams, x: &Matrix, y: &[u8]) -> Result<LogisticModel> {
    let n = x.nrows() as f64;
    let frob: f64 = x.as_slice().iter().map(|v| v * v).sum();
    let lipschitz = 0.25 * (frob / n + 1.0) + params.l2;
    let step = params.lr.min(1.0 / lipschitz);
    let mut w = vec![0.0; x.ncols()];
    let mut b = 0.0;
    let mut iterations = 0;
    for _ in 0..params.iters {
        let (_, gw, gb) = loss_and_gradient(&w, b, x, y, params.l2);
        let norm = math::sqrt(gw.iter().map(|g| g * g).sum::<f64>() + gb * gb);
        if norm < params.tol {
            break;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= step * g;
        }
        b -= step * gb;
        iterations += 1;
    }
    Ok(LogisticModel { weights: w, bias: b, iterations })
}
