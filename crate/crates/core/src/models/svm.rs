//! Soft-margin SVM trained on the dual by sequential minimal optimization
//! with second-order working-set selection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{get_cat, get_int, get_real, Params};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

const TAU: f64 = 1e-12;
/// Training sets up to this size get a full precomputed Gram matrix.
const FULL_GRAM_LIMIT: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Sigmoid { gamma: f64, coef0: f64 },
    Polynomial { gamma: f64, coef0: f64, degree: u32 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                math::exp(-gamma * d)
            }
            Kernel::Sigmoid { gamma, coef0 } => math::tanh(gamma * dot(a, b) + coef0),
            Kernel::Polynomial { gamma, coef0, degree } => math::powi(gamma * dot(a, b) + coef0, degree as i32),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    /// KKT tolerance on the maximal violating pair.
    pub tol: f64,
    pub max_iter: usize,
}

impl SvmParams {
    pub fn from_params(p: &Params) -> Result<Self> {
        let gamma = get_real(p, "gamma", 0.1)?;
        let coef0 = get_real(p, "coef0", 0.0)?;
        let degree = get_int(p, "degree", 3)?.max(1) as u32;
        let kernel = match get_cat(p, "kernel", "rbf")? {
            "linear" => Kernel::Linear,
            "rbf" => Kernel::Rbf { gamma },
            "sigmoid" => Kernel::Sigmoid { gamma, coef0 },
            "polynomial" => Kernel::Polynomial { gamma, coef0, degree },
            other => return Err(Error::parameter(format!("unknown SVM kernel {other}"))),
        };
        Ok(Self { kernel, c: get_real(p, "c", 1.0)?, tol: 1e-3, max_iter: 200_000 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub support: Matrix,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl SvmModel {
    pub fn decision_function(&self, x: &Matrix) -> Vec<f64> {
        x.rows()
            .map(|r| {
                let s: f64 =
                    self.support.rows().zip(&self.coef).map(|(sv, &c)| c * self.kernel.eval(sv, r)).sum();
                s - self.rho
            })
            .collect()
    }
}

/// Solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective `sum(alpha) - alpha'Q alpha / 2` after each iteration.
    pub objective: Vec<f64>,
    /// Final maximal KKT violation `m(alpha) - M(alpha)`.
    pub kkt_gap: f64,
    pub alpha: Vec<f64>,
}

enum Gram<'a> {
    Full(Vec<f64>, usize),
    OnDemand(&'a Matrix, Kernel),
}

impl Gram<'_> {
    fn column(&self, i: usize, out: &mut Vec<f64>) {
        match self {
            Gram::Full(g, n) => {
                out.clear();
                out.extend_from_slice(&g[i * n..(i + 1) * n]);
            }
            Gram::OnDemand(x, k) => {
                out.clear();
                let xi = x.row(i);
                out.extend(x.rows().map(|r| k.eval(xi, r)));
            }
        }
    }
}

pub fn fit(params: &SvmParams, x: &Matrix, labels: &[u8]) -> Result<(SvmModel, SolveInfo)> {
    if params.c <= 0.0 {
        return Err(Error::parameter("SVM C must be positive"));
    }
    let n = x.nrows();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let gram = if n <= FULL_GRAM_LIMIT {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = params.kernel.eval(x.row(i), x.row(j));
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        Gram::Full(g, n)
    } else {
        Gram::OnDemand(x, params.kernel)
    };
    let diag: Vec<f64> = (0..n).map(|i| params.kernel.eval(x.row(i), x.row(i))).collect();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    // Gradient of 0.5 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let mut ki = Vec::with_capacity(n);
    let mut kj = Vec::with_capacity(n);
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut gap;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    loop {
        // i maximizes -y G over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t]) {
                gmin = gmin.min(-y[t] * grad[t]);
            }
        }
        gap = gmax - gmin;
        if i_sel == usize::MAX || gap < params.tol {
            converged = true;
            break;
        }
        if iterations >= params.max_iter {
            break;
        }
        let i = i_sel;
        gram.column(i, &mut ki);
        // j minimizes the second-order decrease among violating partners.
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b > 0.0 {
                let mut a = diag[i] + diag[t] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let v = -(b * b) / a;
                if v < best {
                    best = v;
                    j_sel = t;
                }
            }
        }
        if j_sel == usize::MAX {
            converged = true;
            break;
        }
        let j = j_sel;
        gram.column(j, &mut kj);
        let qij = y[i] * y[j] * ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
        iterations += 1;
        objective.push(-0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>());
    }

    let rho = compute_rho(&alpha, &y, &grad, c);
    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = SvmModel {
        kernel: params.kernel,
        support: x.select_rows(&sv),
        coef: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
        rho,
    };
    Ok((model, SolveInfo { iterations, converged, objective, kkt_gap: gap, alpha }))
}

fn compute_rho(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Matrix, Vec<u8>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let t = i as f64 * 0.37;
            let (s, c) = (libm::sin(t), libm::cos(t));
            rows.push(vec![1.5 + 0.8 * s, 1.0 + 0.8 * c]);
            y.push(1);
            rows.push(vec![-1.5 + 0.8 * c, -1.0 + 0.8 * s]);
            y.push(0);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separates_blobs_with_each_kernel() {
        let (x, y) = blobs();
        for kernel in [
            Kernel::Linear,
            Kernel::Rbf { gamma: 0.5 },
            Kernel::Polynomial { gamma: 0.5, coef0: 1.0, degree: 3 },
        ] {
            let p = SvmParams { kernel, c: 10.0, tol: 1e-3, max_iter: 100_000 };
            let (m, info) = fit(&p, &x, &y).unwrap();
            assert!(info.converged);
            assert!(info.kkt_gap < 1e-3);
            let pred: Vec<u8> = m.decision_function(&x).iter().map(|&s| u8::from(s > 0.0)).collect();
            assert_eq!(pred, y, "{kernel:?}");
            let eq: f64 = info.alpha.iter().zip(&y).map(|(a, &l)| if l == 1 { *a } else { -*a }).sum();
            assert!(eq.abs() < 1e-9);
        }
    }
}
