//! Gradient boosting of regression trees on the binary log loss.
//!
//! All three variants share one binned tree grower. Exact boosting gives
//! every distinct training value its own bin, so histogram boosting with at
//! least as many bins as distinct values grows identical trees.
//!
//! Each leaf step is halved until it does not raise that leaf's training
//! loss, which keeps the training loss non-increasing across stages.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{get_int, get_real, Family, Params};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

const MAX_HALVINGS: usize = 60;
const HESSIAN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostKind {
    /// First-order split gain, one bin per distinct value.
    Exact,
    /// First-order split gain over at most `bins` quantile bins.
    Histogram,
    /// Second-order gain with L2 leaf regularization.
    Newton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub kind: BoostKind,
    pub n_stages: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bins: usize,
    pub l2: f64,
}

impl BoostParams {
    pub fn from_params(family: &Family, p: &Params) -> Result<Self> {
        let kind = match family {
            Family::GradBoost => BoostKind::Exact,
            Family::HistGradBoost => BoostKind::Histogram,
            Family::NewtonBoost => BoostKind::Newton,
            other => return Err(Error::parameter(alloc::format!("{} is not a boosting family", other.tag()))),
        };
        Ok(Self {
            kind,
            n_stages: get_int(p, "n_stages", 100)?.max(1) as usize,
            shrinkage: get_real(p, "shrinkage", 0.1)?,
            max_depth: get_int(p, "max_depth", 3)?.max(1) as usize,
            min_leaf: get_int(p, "min_leaf", 1)?.max(1) as usize,
            bins: get_int(p, "bins", 255)?.max(2) as usize,
            l2: get_real(p, "l2", 1.0)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum RegNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                RegNode::Leaf { value } => return value,
                RegNode::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub base: f64,
    /// Leaf values already include shrinkage and step halving.
    pub trees: Vec<RegTree>,
    /// Mean training log loss before the first stage and after each stage.
    pub train_loss: Vec<f64>,
}

impl BoostModel {
    /// Log-odds of class 1.
    pub fn raw_scores(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.base + self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>()).collect()
    }
}

/// Split points per feature; a value `v` falls in bin `#{cuts < v}`.
fn feature_cuts(values: &[f64], kind: BoostKind, max_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let all_cuts = || distinct.windows(2).map(|w| super::tree::midpoint(w[0].0, w[1].0)).collect();
    if kind != BoostKind::Histogram || distinct.len() <= max_bins {
        return all_cuts();
    }
    let n = values.len();
    let mut cuts = Vec::with_capacity(max_bins - 1);
    let mut cum = 0usize;
    let mut next_bin = 1usize;
    for i in 0..distinct.len() - 1 {
        cum += distinct[i].1;
        if cum * max_bins >= next_bin * n {
            cuts.push(super::tree::midpoint(distinct[i].0, distinct[i + 1].0));
            while next_bin * n <= cum * max_bins {
                next_bin += 1;
            }
            if cuts.len() == max_bins - 1 {
                break;
            }
        }
    }
    cuts
}

struct Binned {
    /// Column-major bin indices.
    bins: Vec<Vec<u32>>,
    cuts: Vec<Vec<f64>>,
}

fn bin_matrix(x: &Matrix, kind: BoostKind, max_bins: usize) -> Binned {
    let mut bins = Vec::with_capacity(x.ncols());
    let mut cuts = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        let c = feature_cuts(&col, kind, max_bins);
        bins.push(col.iter().map(|&v| c.partition_point(|&cut| cut < v) as u32).collect());
        cuts.push(c);
    }
    Binned { bins, cuts }
}

struct Grower<'a> {
    params: &'a BoostParams,
    binned: &'a Binned,
    g: &'a [f64],
    h: &'a [f64],
    nodes: Vec<RegNode>,
    /// `(node index, rows)` for every leaf, for the step search.
    leaves: Vec<(usize, Vec<usize>)>,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64, n: f64) -> f64 {
        match self.params.kind {
            BoostKind::Newton => g * g / (h + self.params.l2),
            _ => g * g / n,
        }
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        match self.params.kind {
            BoostKind::Newton => -g / (h + self.params.l2),
            _ => -g / h.max(HESSIAN_FLOOR),
        }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (gs, hs) = idx.iter().fold((0.0, 0.0), |(a, b), &i| (a + self.g[i], b + self.h[i]));
        let n = idx.len();
        let mut best: Option<(f64, usize, u32)> = None;
        if depth < self.params.max_depth && n >= 2 * self.params.min_leaf {
            let parent = self.score(gs, hs, n as f64);
            for (f, fbins) in self.binned.bins.iter().enumerate() {
                let nb = self.binned.cuts[f].len() + 1;
                if nb < 2 {
                    continue;
                }
                let mut hg = vec![0.0; nb];
                let mut hh = vec![0.0; nb];
                let mut hc = vec![0usize; nb];
                for &i in &idx {
                    let b = fbins[i] as usize;
                    hg[b] += self.g[i];
                    hh[b] += self.h[i];
                    hc[b] += 1;
                }
                let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
                for b in 0..nb - 1 {
                    gl += hg[b];
                    hl += hh[b];
                    cl += hc[b];
                    let cr = n - cl;
                    if cl < self.params.min_leaf || cr < self.params.min_leaf || hc[b] == 0 {
                        continue;
                    }
                    let gain = self.score(gl, hl, cl as f64) + self.score(gs - gl, hs - hl, cr as f64) - parent;
                    if gain > 0.0 && best.is_none_or(|(bg, _, _)| gain > bg) {
                        best = Some((gain, f, b as u32));
                    }
                }
            }
        }
        let at = self.nodes.len();
        match best {
            None => {
                self.nodes.push(RegNode::Leaf { value: self.leaf_value(gs, hs) });
                self.leaves.push((at, idx));
            }
            Some((_, f, b)) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.binned.bins[f][i] <= b);
                self.nodes.push(RegNode::Leaf { value: 0.0 });
                let l = self.grow(left, depth + 1);
                let r = self.grow(right, depth + 1);
                let threshold = self.binned.cuts[f][b as usize];
                self.nodes[at] = RegNode::Split { feature: f, threshold, left: l, right: r };
            }
        }
        at
    }
}

fn mean_loss(f: &[f64], y: &[u8]) -> f64 {
    f.iter().zip(y).map(|(&fi, &yi)| math::log_loss(fi, yi)).sum::<f64>() / y.len() as f64
}

pub fn fit(params: &BoostParams, x: &Matrix, y: &[u8]) -> Result<BoostModel> {
    if !(params.shrinkage > 0.0) {
        return Err(Error::parameter("boosting shrinkage must be positive"));
    }
    let n = y.len();
    let p = (y.iter().filter(|&&v| v == 1).count() as f64 / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base = math::ln(p / (1.0 - p));
    let binned = bin_matrix(x, params.kind, params.bins);
    let mut f = vec![base; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut train_loss = Vec::with_capacity(params.n_stages + 1);
    train_loss.push(mean_loss(&f, y));
    let mut trees = Vec::with_capacity(params.n_stages);
    for _ in 0..params.n_stages {
        for i in 0..n {
            let s = math::sigmoid(f[i]);
            g[i] = s - f64::from(y[i]);
            h[i] = s * (1.0 - s);
        }
        let mut grower = Grower { params, binned: &binned, g: &g, h: &h, nodes: Vec::new(), leaves: Vec::new() };
        grower.grow((0..n).collect(), 0);
        let Grower { mut nodes, leaves, .. } = grower;
        for (node, rows) in leaves {
            let RegNode::Leaf { value } = nodes[node] else { unreachable!("leaf index") };
            let before: f64 = rows.iter().map(|&i| math::log_loss(f[i], y[i])).sum();
            let mut step = params.shrinkage * value;
            let mut halvings = 0;
            loop {
                let after: f64 = rows.iter().map(|&i| math::log_loss(f[i] + step, y[i])).sum();
                if after <= before {
                    break;
                }
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    step = 0.0;
                    break;
                }
                step *= 0.5;
            }
            for &i in &rows {
                f[i] += step;
            }
            nodes[node] = RegNode::Leaf { value: step };
        }
        trees.push(RegTree { nodes });
        train_loss.push(mean_loss(&f, y));
    }
    Ok(BoostModel { base, trees, train_loss })
}
