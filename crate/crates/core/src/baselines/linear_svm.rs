//! L1-loss linear SVM solved by dual coordinate descent. Used as the ranking
//! model for recursive feature elimination.

use ndarray::{Array1, ArrayView2};
use rand::seq::SliceRandom;

use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Array1<f64>,
    pub bias: f64,
    pub converged: bool,
}

const MAX_EPOCHS: usize = 1000;
const TOL: f64 = 1e-3;

impl LinearSvm {
    /// Fit `min ½‖w‖² + C Σ max(0, 1 − y(wᵀx + b))` with labels in {0, 1}.
    /// The bias is learned as the weight of an implicit constant feature.
    pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], c: f64, seed: u64) -> Self {
        let (n, d) = x.dim();
        let sign: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let q_diag: Vec<f64> = (0..n).map(|i| x.row(i).dot(&x.row(i)) + 1.0).collect();
        let mut alpha = vec![0.0; n];
        let mut w = Array1::<f64>::zeros(d);
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = rng::seeded(seed);
        let mut converged = false;

        for _ in 0..MAX_EPOCHS {
            order.shuffle(&mut r);
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for &i in &order {
                let xi = x.row(i);
                let g = sign[i] * (w.dot(&xi) + b) - 1.0;
                let pg = if alpha[i] == 0.0 {
                    g.min(0.0)
                } else if alpha[i] == c {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg != 0.0 {
                    let old = alpha[i];
                    alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
                    let step = (alpha[i] - old) * sign[i];
                    w.scaled_add(step, &xi);
                    b += step;
                }
            }
            if pg_max - pg_min < TOL {
                converged = true;
                break;
            }
        }
        Self { weights: w, bias: b, converged }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_a_line() {
        let x = array![[-2.0, 0.3], [-1.0, -0.2], [1.0, 0.1], [2.0, -0.4]];
        let m = LinearSvm::fit(x.view(), &[0, 0, 1, 1], 1.0, 0);
        assert!(m.converged);
        for (i, &l) in [0u8, 0, 1, 1].iter().enumerate() {
            let f = m.decision(x.row(i).as_slice().unwrap());
            assert_eq!(f > 0.0, l == 1);
        }
        assert!(m.weights[0] > 0.0 && m.weights[0].abs() > m.weights[1].abs());
    }

    #[test]
    fn constant_zero_feature_gets_zero_weight() {
        let x = array![[-1.0, 0.0], [1.0, 0.0], [-2.0, 0.0], [2.0, 0.0]];
        let m = LinearSvm::fit(x.view(), &[0, 1, 0, 1], 1.0, 0);
        assert_eq!(m.weights[1], 0.0);
    }
}
