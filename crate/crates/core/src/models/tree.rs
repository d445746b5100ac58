//! CART classification trees (Gini) and the random-forest / extra-trees
//! ensembles built on them.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{get_int, Params};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Node {
    Leaf { p: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Share of class 1 in the reached leaf.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { p } => return p,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means all.
    pub max_features: Option<usize>,
    /// Draw one uniform threshold per candidate feature instead of scanning.
    pub random_thresholds: bool,
}

impl TreeParams {
    pub fn from_params(p: &Params) -> Result<Self> {
        let depth = get_int(p, "max_depth", 0)?;
        Ok(Self {
            max_depth: (depth > 0).then_some(depth as usize),
            min_leaf: get_int(p, "min_leaf", 1)?.max(1) as usize,
            max_features: None,
            random_thresholds: false,
        })
    }
}

/// Midpoint between `a < b`, pulled back to `a` if rounding lands on `b`.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    params: &'a TreeParams,
    rng: Rng,
    nodes: Vec<Node>,
    features: Vec<usize>,
    pairs: Vec<(f64, u8)>,
}

#[derive(Clone, Copy)]
struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

/// `n * gini` for a node with `ones` positives out of `n`.
fn weighted_gini(ones: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let zeros = n - ones;
    n - (ones * ones + zeros * zeros) / n
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let ones = idx.iter().filter(|&&i| self.y[i] == 1).count();
        self.nodes.push(Node::Leaf { p: ones as f64 / idx.len() as f64 });
        self.nodes.len() - 1
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let ones = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let pure = ones == 0 || ones == idx.len();
        let depth_done = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_done || idx.len() < 2 * self.params.min_leaf {
            return self.leaf(&idx);
        }
        let Some(best) = self.best_split(&idx) else {
            return self.leaf(&idx);
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { p: 0.0 });
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[at] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        at
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let f = self.x.ncols();
        let wanted = self.params.max_features.unwrap_or(f).clamp(1, f.max(1));
        let subsample = wanted < f || self.params.random_thresholds;
        if subsample {
            // Fresh random feature order per node (Fisher-Yates).
            for k in 0..f.saturating_sub(1) {
                let j = self.rng.random_range(k..f);
                self.features.swap(k, j);
            }
        }
        let mut best: Option<Candidate> = None;
        for visited in 0..f {
            if visited >= wanted && best.is_some() {
                break;
            }
            let feature = self.features[visited];
            let cand = if self.params.random_thresholds {
                self.random_split(idx, feature)
            } else {
                self.scan_split(idx, feature)
            };
            if let Some(c) = cand {
                if best.is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn scan_split(&mut self, idx: &[usize], feature: usize) -> Option<Candidate> {
        self.pairs.clear();
        self.pairs.extend(idx.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
        self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.pairs.len();
        let total_ones = self.pairs.iter().filter(|p| p.1 == 1).count() as f64;
        let min_leaf = self.params.min_leaf;
        let mut left_ones = 0.0;
        let mut best: Option<Candidate> = None;
        for k in 1..n {
            left_ones += f64::from(self.pairs[k - 1].1);
            if k < min_leaf || n - k < min_leaf {
                continue;
            }
            let (a, b) = (self.pairs[k - 1].0, self.pairs[k].0);
            if a == b {
                continue;
            }
            let nl = k as f64;
            let nr = (n - k) as f64;
            let impurity = weighted_gini(left_ones, nl) + weighted_gini(total_ones - left_ones, nr);
            if best.is_none_or(|c| impurity < c.impurity) {
                best = Some(Candidate { impurity, feature, threshold: midpoint(a, b) });
            }
        }
        best
    }

    fn random_split(&mut self, idx: &[usize], feature: usize) -> Option<Candidate> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx {
            let v = self.x.get(i, feature);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo >= hi {
            return None;
        }
        let mut threshold = lo + (hi - lo) * self.rng.random::<f64>();
        if threshold >= hi {
            threshold = lo;
        }
        let (mut nl, mut ones_l, mut ones) = (0usize, 0.0, 0.0);
        for &i in idx {
            let yi = f64::from(self.y[i]);
            ones += yi;
            if self.x.get(i, feature) <= threshold {
                nl += 1;
                ones_l += yi;
            }
        }
        let nr = idx.len() - nl;
        if nl < self.params.min_leaf || nr < self.params.min_leaf {
            return None;
        }
        let impurity = weighted_gini(ones_l, nl as f64) + weighted_gini(ones - ones_l, nr as f64);
        Some(Candidate { impurity, feature, threshold })
    }
}

/// Grows a tree on the rows `idx` (repeats allowed, as in a bootstrap sample).
pub fn grow_on(params: &TreeParams, x: &Matrix, y: &[u8], idx: Vec<usize>, seed_value: u64) -> DecisionTree {
    let mut b = Builder {
        x,
        y,
        params,
        rng: seed::rng(seed_value),
        nodes: Vec::new(),
        features: (0..x.ncols()).collect(),
        pairs: Vec::with_capacity(idx.len()),
    };
    b.grow(idx, 0);
    DecisionTree { nodes: b.nodes }
}

pub fn fit_tree(params: &TreeParams, x: &Matrix, y: &[u8], seed_value: u64) -> Result<DecisionTree> {
    if x.ncols() == 0 {
        return Err(Error::validation("tree needs at least one feature"));
    }
    Ok(grow_on(params, x, y, (0..x.nrows()).collect(), seed_value))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub tree: TreeParams,
    pub n_trees: usize,
    pub bootstrap: bool,
}

impl ForestParams {
    /// Random forest (`extra = false`) or extra trees (`extra = true`).
    pub fn from_params(p: &Params, extra: bool) -> Result<Self> {
        let mut tree = TreeParams::from_params(p)?;
        tree.random_thresholds = extra;
        Ok(Self { tree, n_trees: get_int(p, "n_trees", 100)?.max(1) as usize, bootstrap: !extra })
    }
}

/// Soft-voting ensemble of trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
}

impl Forest {
    pub fn scores(&self, x: &Matrix) -> Vec<f64> {
        let k = self.trees.len() as f64;
        x.rows().map(|r| self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / k).collect()
    }
}

/// `ceil(sqrt(f))`.
pub fn sqrt_features(f: usize) -> usize {
    let mut m = libm::sqrt(f as f64) as usize;
    while m * m < f {
        m += 1;
    }
    while m > 1 && (m - 1) * (m - 1) >= f {
        m -= 1;
    }
    m.max(1)
}

pub fn fit_forest(params: &ForestParams, x: &Matrix, y: &[u8], seed_value: u64) -> Result<Forest> {
    if x.ncols() == 0 {
        return Err(Error::validation("forest needs at least one feature"));
    }
    let mut tree = params.tree.clone();
    tree.max_features = Some(sqrt_features(x.ncols()));
    let n = x.nrows();
    let trees = (0..params.n_trees as u64)
        .map(|t| {
            let tree_seed = seed::derive(seed_value, t);
            let idx = if params.bootstrap {
                let mut rng = seed::rng(seed::derive(tree_seed, 0));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_on(&tree, x, y, idx, seed::derive(tree_seed, 1))
        })
        .collect();
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn midpoint_stays_below_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a <= m && m < b);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }

    #[test]
    fn sqrt_feature_counts() {
        assert_eq!(sqrt_features(1), 1);
        assert_eq!(sqrt_features(4), 2);
        assert_eq!(sqrt_features(5), 3);
        assert_eq!(sqrt_features(200), 15);
    }

    #[test]
    fn xor_needs_a_zero_gain_first_split() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let y = [0, 1, 1, 0];
        let t = fit_tree(&TreeParams::from_params(&Params::new()).unwrap(), &x, &y, 0).unwrap();
        let pred: Vec<u8> = x.rows().map(|r| u8::from(t.predict_row(r) > 0.5)).collect();
        assert_eq!(pred, y);
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn depth_and_leaf_limits() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let mut p = TreeParams::from_params(&Params::new()).unwrap();
        p.max_depth = Some(3);
        assert!(fit_tree(&p, &x, &y, 0).unwrap().depth() <= 3);
        p.max_depth = None;
        p.min_leaf = 5;
        let t = fit_tree(&p, &x, &y, 0).unwrap();
        for node in &t.nodes {
            if let Node::Split { feature, threshold, .. } = node {
                let left = (0..20).filter(|&i| x.get(i, *feature) <= *threshold).count();
                assert!(left >= 5);
            }
        }
    }
}
