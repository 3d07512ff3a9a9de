use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes.
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

pub fn nb_fit(x: ArrayView2<'_, f64>, y: &[u8]) -> Result<NbModel> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::shape(format!("{n} labels"), format!("{} labels", y.len())));
    }
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    for (row, &c) in x.rows().into_iter().zip(y) {
        let c = usize::from(c);
        counts[c] += 1;
        sums[c].iter_mut().zip(row).for_each(|(s, v)| *s += v);
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::invalid("naive Bayes needs samples from both classes"));
    }
    let means = [0, 1].map(|c| sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<_>>());
    let mut sq = [vec![0.0; d], vec![0.0; d]];
    for (row, &c) in x.rows().into_iter().zip(y) {
        let c = usize::from(c);
        sq[c].iter_mut().zip(row).zip(&means[c]).for_each(|((s, v), m)| *s += (v - m).powi(2));
    }
    let variances = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| (s / counts[c] as f64).max(VARIANCE_FLOOR))
            .collect::<Vec<_>>()
    });
    let priors = [counts[0] as f64 / n as f64, counts[1] as f64 / n as f64];
    Ok(NbModel { priors, means, variances })
}

impl NbModel {
    pub fn n_features(&self) -> usize {
        self.means[0].len()
    }

    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        let ll: f64 = x
            .iter()
            .zip(&self.means[c])
            .zip(&self.variances[c])
            .map(|((v, m), var)| -0.5 * ((v - m).powi(2) / var + var.ln() + (2.0 * std::f64::consts::PI).ln()))
            .sum();
        self.priors[c].ln() + ll
    }

    /// Class posteriors `[p0, p1]`.
    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let (a, b) = (self.log_joint(0, x), self.log_joint(1, x));
        // p1 = 1 / (1 + exp(a - b)), written to stay finite
        let p1 = if b >= a {
            1.0 / (1.0 + (a - b).exp())
        } else {
            let e = (b - a).exp();
            e / (1.0 + e)
        };
        [1.0 - p1, p1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn symmetric_midpoint() {
        let x = array![[-1.0], [-1.0], [1.0], [1.0]];
        let m = nb_fit(x.view(), &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.predict_proba(&[0.0]), [0.5, 0.5]);
        assert_eq!(m.variances[0], vec![VARIANCE_FLOOR]);
    }

    #[test]
    fn floored_variance_is_decisive() {
        let x = array![[-1.0], [-1.0], [1.0], [1.0]];
        let m = nb_fit(x.view(), &[0, 0, 1, 1]).unwrap();
        let p = m.predict_proba(&[1.0]);
        assert!(p[1] > 0.99);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_samples_give_identical_model() {
        let x = array![[0.1, 2.0], [0.4, 1.0], [1.5, -1.0], [2.0, -0.5], [0.2, 0.3]];
        let y = [0, 0, 1, 1, 0];
        let twice = ndarray::concatenate![ndarray::Axis(0), x, x];
        let y2: Vec<u8> = y.iter().chain(&y).copied().collect();
        let a = nb_fit(x.view(), &y).unwrap();
        let b = nb_fit(twice.view(), &y2).unwrap();
        for c in 0..2 {
            assert!((a.priors[c] - b.priors[c]).abs() < 1e-15);
            for j in 0..2 {
                assert!((a.means[c][j] - b.means[c][j]).abs() < 1e-15);
                assert!((a.variances[c][j] - b.variances[c][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn affine_rescaling_invariance() {
        let x = array![[0.1, 2.0], [0.4, 1.0], [1.5, -1.0], [2.0, -0.5], [0.2, 0.3], [1.1, 0.0]];
        let y = [0, 0, 1, 1, 0, 1];
        let scale = [3.0, -0.25];
        let shift = [10.0, 1.5];
        let xs = Array2::from_shape_fn(x.dim(), |(i, j)| x[[i, j]] * scale[j] + shift[j]);
        let a = nb_fit(x.view(), &y).unwrap();
        let b = nb_fit(xs.view(), &y).unwrap();
        for q in [[0.5, 0.5], [1.7, -2.0], [-1.0, 3.0]] {
            let qs = [q[0] * scale[0] + shift[0], q[1] * scale[1] + shift[1]];
            let (pa, pb) = (a.predict_proba(&q), b.predict_proba(&qs));
            assert!((pa[1] - pb[1]).abs() < 1e-9, "{pa:?} {pb:?}");
        }
    }

    #[test]
    fn single_class_is_an_error() {
        let x = array![[1.0], [2.0]];
        assert!(nb_fit(x.view(), &[1, 1]).is_err());
    }
}
