//! CART trees with the Gini criterion, bagged into a random forest.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const DEFAULT_TREES: usize = 100;
/// Nodes with fewer samples are not split.
pub const MIN_SAMPLES_SPLIT: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { p1: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes in preorder; node 0 is the root. `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    max_features: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// Best split of `idx` among a random feature subset. Features constant
    /// within the node do not count towards `max_features`.
    fn best_split(&self, idx: &[usize], r: &mut Rng) -> Option<(usize, f64)> {
        let d = self.x.ncols();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(r);
        let n = idx.len();
        let pos_total = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut tried = 0;
        let mut vals: Vec<(f64, u8)> = Vec::with_capacity(n);
        for f in features {
            if tried == self.max_features {
                break;
            }
            vals.clear();
            vals.extend(idx.iter().map(|&i| (self.x[[i, f]], self.y[i])));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            if vals[0].0 == vals[n - 1].0 {
                continue;
            }
            tried += 1;
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(vals[k - 1].1);
                if vals[k].0 == vals[k - 1].0 {
                    continue;
                }
                let impurity = (k as f64 * gini(left_pos, k)
                    + (n - k) as f64 * gini(pos_total - left_pos, n - k))
                    / n as f64;
                if best.is_none_or(|b| impurity < b.0) {
                    let threshold = 0.5 * (vals[k - 1].0 + vals[k].0);
                    best = Some((impurity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, r: &mut Rng) -> usize {
        let pos = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { p1: pos as f64 / idx.len() as f64 });
        if pos == 0 || pos == idx.len() || idx.len() < MIN_SAMPLES_SPLIT {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx, r) else {
            return id;
        };
        let (l, rt): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[[i, feature]] <= threshold);
        let left = self.grow(l, r);
        let right = self.grow(rt, r);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl DecisionTree {
    /// Grow to purity on the rows `idx` (repeats allowed).
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], idx: Vec<usize>, max_features: usize, r: &mut Rng) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::invalid("cannot grow a tree on no samples"));
        }
        let mut b = Builder { x, y, max_features: max_features.max(1), nodes: Vec::new() };
        b.grow(idx, r);
        Ok(Self { nodes: b.nodes })
    }

    pub fn predict_p1(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { p1 } => return p1,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfModel {
    pub trees: Vec<DecisionTree>,
    pub tree_seeds: Vec<u64>,
    pub n_features: usize,
}

/// Bagged CART forest: bootstrap rows per tree, `floor(√d)` candidate
/// features per split.
pub fn rf_fit(x: ArrayView2<'_, f64>, y: &[u8], n_trees: usize, seed: u64) -> Result<RfModel> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(Error::invalid("random forest needs nonempty data"));
    }
    if n != y.len() {
        return Err(Error::shape(format!("{n} labels"), format!("{} labels", y.len())));
    }
    if n_trees == 0 {
        return Err(Error::invalid("random forest needs at least one tree"));
    }
    let max_features = ((d as f64).sqrt().floor() as usize).max(1);
    let tree_seeds: Vec<u64> = (0..n_trees).map(|t| rng::derive_seed(seed, "tree", t as u64)).collect();
    let trees = tree_seeds
        .iter()
        .map(|&s| {
            let mut r = rng::seeded(s);
            let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            DecisionTree::fit(x, y, idx, max_features, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RfModel { trees, tree_seeds, n_features: d })
}

impl RfModel {
    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let p1 = self.trees.iter().map(|t| t.predict_p1(x)).sum::<f64>() / self.trees.len() as f64;
        [1.0 - p1, p1]
    }
}
