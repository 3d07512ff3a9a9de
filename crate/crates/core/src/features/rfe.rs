use ndarray::{ArrayView2, Axis};

use crate::baselines::LinearSvm;
use crate::error::{Error, Result};

/// Features removed per elimination round.
pub const RFE_STEP: usize = 8;
/// Round counts `m` of the RFE grid `M = d − 8m`.
pub const RFE_GRID: std::ops::RangeInclusive<u32> = 0..=35;

const RANKING_C: f64 = 1.0;
const RANKING_SEED: u64 = 0x5eed;

pub fn rfe_dim(m: u32, d: usize) -> usize {
    d.saturating_sub(RFE_STEP * m as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfeModel {
    pub n_features: usize,
    /// Surviving feature indices, ascending.
    pub selected: Vec<usize>,
    /// Eliminated indices, earliest first.
    pub elimination_order: Vec<usize>,
}

impl RfeModel {
    /// Survivors at a larger target: the current selection plus the most
    /// recently eliminated features. Nested by construction.
    pub fn survivors(&self, target: usize) -> Result<Vec<usize>> {
        if target < self.selected.len() || target > self.n_features {
            return Err(Error::invalid(format!(
                "target {target} outside [{}, {}]",
                self.selected.len(),
                self.n_features
            )));
        }
        let extra = target - self.selected.len();
        let mut out = self.selected.clone();
        out.extend(self.elimination_order.iter().rev().take(extra));
        out.sort_unstable();
        Ok(out)
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.selected.iter().map(|&i| x[i]).collect()
    }
}

/// Recursive feature elimination: fit a linear SVM (C = 1) on the surviving
/// features, drop the `step` with the smallest squared weight (lower index
/// first on ties), repeat until `target` remain.
pub fn rfe_select(x: ArrayView2<'_, f64>, y: &[u8], step: usize, target: usize) -> Result<RfeModel> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::shape(format!("{n} labels"), format!("{} labels", y.len())));
    }
    if step == 0 || target == 0 || target > d || !(d - target).is_multiple_of(step) {
        return Err(Error::invalid(format!(
            "RFE target {target} is not of the form {d} - {step}m"
        )));
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::invalid("RFE needs both classes"));
    }
    let mut alive: Vec<usize> = (0..d).collect();
    let mut elimination_order = Vec::with_capacity(d - target);
    while alive.len() > target {
        let sub = x.select(Axis(1), &alive);
        let svm = LinearSvm::fit(sub.view(), y, RANKING_C, RANKING_SEED);
        let mut rank: Vec<(f64, usize)> = svm.weights.iter().zip(&alive).map(|(w, &i)| (w * w, i)).collect();
        rank.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let drop: Vec<usize> = rank.iter().take(step).map(|r| r.1).collect();
        elimination_order.extend_from_slice(&drop);
        alive.retain(|i| !drop.contains(i));
    }
    Ok(RfeModel { n_features: d, selected: alive, elimination_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    /// Labels depend only on features 3 and 7; the rest is noise and a few
    /// constant columns.
    fn toy(d: usize, n: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut r = crate::rng::seeded(seed);
        let mut x = Array2::from_shape_fn((n, d), |_| r.random_range(-1.0..1.0));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = u8::from(i % 2 == 0);
            let s = if label == 1 { 1.0 } else { -1.0 };
            x[[i, 3]] = s * (2.0 + r.random::<f64>());
            x[[i, 7]] = s * (2.0 + r.random::<f64>());
            for c in [11, 12] {
                x[[i, c]] = 0.0;
            }
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn grid_contains_88() {
        assert_eq!(rfe_dim(27, 304), 88);
        assert_eq!(rfe_dim(0, 304), 304);
        assert_eq!(RFE_GRID.count(), 36);
    }

    #[test]
    fn zero_rounds_is_identity() {
        let (x, y) = toy(24, 40, 1);
        let m = rfe_select(x.view(), &y, 8, 24).unwrap();
        assert_eq!(m.selected, (0..24).collect::<Vec<_>>());
        assert!(m.elimination_order.is_empty());
    }

    #[test]
    fn informative_features_survive() {
        let (x, y) = toy(304, 120, 2);
        let m = rfe_select(x.view(), &y, 8, 8).unwrap();
        assert_eq!(m.selected.len(), 8);
        assert!(m.selected.contains(&3) && m.selected.contains(&7), "{:?}", m.selected);
        // constant columns go in the first round
        assert!(m.elimination_order[..8].contains(&11));
        assert!(m.elimination_order[..8].contains(&12));
    }

    #[test]
    fn survivor_sets_are_nested() {
        let (x, y) = toy(64, 60, 3);
        let m = rfe_select(x.view(), &y, 8, 16).unwrap();
        let mut prev = m.survivors(16).unwrap();
        for target in (24..=64).step_by(8) {
            let s = m.survivors(target).unwrap();
            assert_eq!(s.len(), target);
            assert!(prev.iter().all(|i| s.contains(i)));
            prev = s;
        }
        // a direct run to a larger target agrees with the nested prefix
        let direct = rfe_select(x.view(), &y, 8, 40).unwrap();
        assert_eq!(direct.selected, m.survivors(40).unwrap());
    }

    #[test]
    fn bad_targets() {
        let (x, y) = toy(24, 20, 4);
        assert!(rfe_select(x.view(), &y, 8, 20).is_err());
        assert!(rfe_select(x.view(), &y, 8, 0).is_err());
        assert!(rfe_select(x.view(), &[0; 20], 8, 16).is_err());
    }
}
