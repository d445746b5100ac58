//! k-nearest neighbours with Euclidean distance.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<u8>,
}

pub fn fit(k: usize, x: &Matrix, y: &[u8]) -> Result<KnnModel> {
    if k == 0 {
        return Err(Error::parameter("k must be >= 1"));
    }
    Ok(KnnModel { k: k.min(x.nrows()), x: x.clone(), y: y.to_vec() })
}

impl KnnModel {
    /// Share of the k nearest training rows labelled 1. Rows at equal
    /// distance are ranked by training index.
    pub fn scores(&self, q: &Matrix) -> Vec<f64> {
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.x.nrows());
        q.rows()
            .map(|row| {
                dist.clear();
                dist.extend(self.x.rows().enumerate().map(|(i, r)| {
                    let d: f64 = r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, i)
                }));
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if self.k < dist.len() {
                    dist.select_nth_unstable_by(self.k - 1, cmp);
                }
                let ones = dist[..self.k].iter().filter(|(_, i)| self.y[*i] == 1).count();
                ones as f64 / self.k as f64
            })
            .collect()
    }
}
