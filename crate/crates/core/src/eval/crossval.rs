use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_FOLDS: usize = 10;
const MAX_REDRAWS: u64 = 100;

pub const CNN_K_GRID: [usize; 4] = [2, 3, 4, 5];
pub const CNN_NK_GRID: [usize; 3] = [8, 16, 32];
pub const CNN_ND_GRID: [usize; 4] = [16, 64, 128, 256];
pub const MLP_W1_GRID: [usize; 2] = [1, 10];
pub const MLP_L_GRID: [usize; 4] = [8, 256, 1028, 2056];
pub const MLP_M_GRID: [usize; 3] = [64, 512, 1024];

/// Named hyperparameters of one grid point, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint(pub Vec<(String, f64)>);

impl GridPoint {
    pub fn new(pairs: &[(&str, f64)]) -> Self {
        GridPoint(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    /// Integer-valued parameter; grid values are small whole numbers.
    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key)
            .map(|v| v as usize)
            .ok_or_else(|| Error::invalid(format!("grid point {self} has no parameter {key}")))
    }
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

pub fn cnn_grid() -> Vec<GridPoint> {
    let mut out = Vec::new();
    for k in CNN_K_GRID {
        for n_k in CNN_NK_GRID {
            for n_d in CNN_ND_GRID {
                out.push(GridPoint::new(&[("k", k as f64), ("n_k", n_k as f64), ("n_d", n_d as f64)]));
            }
        }
    }
    out
}

pub fn mlp_grid() -> Vec<GridPoint> {
    let mut out = Vec::new();
    for w1 in MLP_W1_GRID {
        for l in MLP_L_GRID {
            for m in MLP_M_GRID {
                out.push(GridPoint::new(&[("w1", w1 as f64), ("l", l as f64), ("m", m as f64)]));
            }
        }
    }
    out
}

pub fn pca_grid() -> Vec<GridPoint> {
    crate::features::PCA_GRID.map(|n| GridPoint::new(&[("n", f64::from(n))])).collect()
}

pub fn rfe_grid() -> Vec<GridPoint> {
    crate::features::RFE_GRID.map(|m| GridPoint::new(&[("m", f64::from(m))])).collect()
}

/// Recording-level fold assignment: `folds[f]` lists the recording indices
/// held out in fold `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Folds {
    pub folds: Vec<Vec<usize>>,
}

impl Folds {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// `(train, validation)` recording indices of fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        train.sort_unstable();
        (train, self.folds[f].clone())
    }
}

/// Deal recordings into `k` folds after a seeded shuffle, ordering by
/// positive-label fraction so each fold gets a spread of class balance.
/// Draws are repeated until every validation fold and its training
/// complement contain both classes; `class_presence[r]` says which classes
/// recording `r` contains.
pub fn recording_folds(class_presence: &[[bool; 2]], positive_fraction: &[f64], k: usize, seed: u64) -> Result<Folds> {
    let n = class_presence.len();
    if k < 2 || n < k {
        return Err(Error::invalid(format!("{k}-fold split of {n} recordings")));
    }
    if positive_fraction.len() != n {
        return Err(Error::shape(format!("{n} fractions"), format!("{} fractions", positive_fraction.len())));
    }
    let has = |rs: &[usize], c: usize| rs.iter().any(|&r| class_presence[r][c]);
    for attempt in 0..MAX_REDRAWS {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::derived(seed, "crossval.folds", attempt));
        if attempt == 0 {
            order.sort_by(|&a, &b| positive_fraction[a].total_cmp(&positive_fraction[b]));
        }
        let mut folds = vec![Vec::new(); k];
        for (i, r) in order.into_iter().enumerate() {
            folds[i % k].push(r);
        }
        folds.iter_mut().for_each(|f| f.sort_unstable());
        let f = Folds { folds };
        let ok = (0..k).all(|i| {
            let (tr, va) = f.split(i);
            has(&tr, 0) && has(&tr, 1) && has(&va, 0) && has(&va, 1)
        });
        if ok {
            return Ok(f);
        }
    }
    Err(Error::invalid(format!(
        "could not draw {k} folds with both classes in every fold from {n} recordings"
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct GridEntry {
    pub point: GridPoint,
    pub n_params: usize,
    pub fold_scores: Vec<f64>,
    /// NaN when the point failed.
    pub mean_score: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
    pub best: usize,
}

impl GridResult {
    pub fn best_entry(&self) -> &GridEntry {
        &self.entries[self.best]
    }

    /// Entry indices by descending mean score (failed points last).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| better(&self.entries[b], &self.entries[a]).then(a.cmp(&b)));
        idx
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        self.entries.iter().map(|e| (e.point.to_string(), e.mean_score)).collect()
    }
}

/// Ordering where `Greater` means `a` is the better entry: higher mean, then
/// fewer parameters; failed entries lose to everything.
fn better(a: &GridEntry, b: &GridEntry) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a.mean_score.is_nan(), b.mean_score.is_nan()) {
        (true, true) => Equal,
        (true, false) => Less,
        (false, true) => Greater,
        (false, false) => a.mean_score.total_cmp(&b.mean_score).then(b.n_params.cmp(&a.n_params)),
    }
}

/// Evaluate every grid point on every fold with `score(point, fold)`, take
/// the mean fold score and select the best point (ties: fewest parameters,
/// then grid order). A point whose scoring fails on any fold is recorded as
/// failed; it is an error only if every point fails.
pub fn crossval_grid(
    points: &[GridPoint],
    n_folds: usize,
    n_params: impl Fn(&GridPoint) -> usize,
    mut score: impl FnMut(&GridPoint, usize) -> Result<f64>,
) -> Result<GridResult> {
    if points.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let mut entries = Vec::with_capacity(points.len());
    for p in points {
        let mut fold_scores = Vec::with_capacity(n_folds);
        let mut error = None;
        for f in 0..n_folds {
            match score(p, f) {
                Ok(s) => fold_scores.push(s),
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        let mean_score = if error.is_some() || fold_scores.is_empty() {
            f64::NAN
        } else {
            fold_scores.iter().sum::<f64>() / fold_scores.len() as f64
        };
        entries.push(GridEntry { point: p.clone(), n_params: n_params(p), fold_scores, mean_score, error });
    }
    let mut best = 0;
    for i in 1..entries.len() {
        if better(&entries[i], &entries[best]).is_gt() {
            best = i;
        }
    }
    if entries[best].mean_score.is_nan() {
        let why = entries[best].error.clone().unwrap_or_default();
        return Err(Error::Numerical(format!("every grid point failed (e.g. {why})")));
    }
    Ok(GridResult { entries, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(cnn_grid().len(), 48);
        assert_eq!(mlp_grid().len(), 24);
        assert_eq!(pca_grid().len(), 13);
        assert_eq!(rfe_grid().len(), 36);
        assert_eq!(cnn_grid()[0].to_string(), "k=2,n_k=8,n_d=16");
    }

    #[test]
    fn single_point_wins() {
        let g = [GridPoint::new(&[("a", 1.0)])];
        let r = crossval_grid(&g, 3, |_| 10, |_, f| Ok(f as f64)).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.best_entry().mean_score, 1.0);
    }

    #[test]
    fn ties_go_to_smaller_model_and_failures_lose() {
        let g = [
            GridPoint::new(&[("size", 300.0)]),
            GridPoint::new(&[("size", 100.0)]),
            GridPoint::new(&[("size", 200.0)]),
            GridPoint::new(&[("size", 1.0)]),
        ];
        let r = crossval_grid(
            &g,
            2,
            |p| p.get("size").unwrap() as usize,
            |p, _| if p.get("size") == Some(1.0) { Err(Error::invalid("boom")) } else { Ok(0.8) },
        )
        .unwrap();
        assert_eq!(r.best, 1);
        assert!(r.entries[3].mean_score.is_nan());
        assert_eq!(r.ranking(), vec![1, 2, 0, 3]);
        assert!(crossval_grid(&g[3..], 2, |_| 1, |_, _| Err(Error::invalid("x"))).is_err());
    }

    #[test]
    fn folds_partition_recordings() {
        let presence = vec![[true, true]; 37];
        let frac = vec![0.4; 37];
        let f = recording_folds(&presence, &frac, 10, 1).unwrap();
        let mut all: Vec<usize> = f.folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        assert!(f.folds.iter().all(|v| (3..=4).contains(&v.len())));
        let (tr, va) = f.split(0);
        assert!(va.iter().all(|r| !tr.contains(r)));
        assert_eq!(f, recording_folds(&presence, &frac, 10, 1).unwrap());
    }

    #[test]
    fn folds_redraw_or_fail() {
        // recordings 0..3 are all-negative, 3..6 all-positive
        let presence: Vec<[bool; 2]> = (0..6).map(|i| [i < 3, i >= 3]).collect();
        let frac: Vec<f64> = (0..6).map(|i| if i < 3 { 0.0 } else { 1.0 }).collect();
        let f = recording_folds(&presence, &frac, 3, 0).unwrap();
        for v in &f.folds {
            assert!(v.iter().any(|&r| r < 3) && v.iter().any(|&r| r >= 3));
        }
        let only_neg = vec![[true, false]; 6];
        assert!(recording_folds(&only_neg, &[0.0; 6], 3, 0).is_err());
    }
}
