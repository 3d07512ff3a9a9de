//! C-SVM with an RBF kernel, solved by SMO with second-order working-set
//! selection, and Platt-scaled probability outputs.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub const KKT_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

pub fn rbf_kernel(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i · y_i` per support vector, `y ∈ {-1, +1}`.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub platt_a: f64,
    pub platt_b: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Dual solution over all training points, before support-vector pruning.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Solve `min ½ αᵀQα − Σα` s.t. `0 ≤ α ≤ C`, `Σ α_i y_i = 0`,
/// `Q_ij = y_i y_j K_ij`, until the maximal violating pair gap drops below
/// [`KKT_TOL`] or the iteration cap is hit.
pub fn smo_solve(kernel: &[f64], sign: &[f64], c: f64) -> SmoSolution {
    let n = sign.len();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 10_000_000usize.max(100 * n);
    let mut iterations = 0;
    let mut converged = false;

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], sign[t]) && -sign[t] * grad[t] >= gmax {
                gmax = -sign[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], sign[t]) {
                continue;
            }
            let v = -sign[t] * grad[t];
            gmin = gmin.min(v);
            if i_sel != usize::MAX {
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = k(i_sel, i_sel) + k(t, t) - 2.0 * k(i_sel, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    if -(b * b) / a <= obj_min {
                        obj_min = -(b * b) / a;
                        j_sel = t;
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < KKT_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let (yi, yj) = (sign[i], sign[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            } else if diff <= 0.0 && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = c - diff;
            } else if diff <= 0.0 && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c && alpha[i] > c {
                alpha[i] = c;
                alpha[j] = sum - c;
            } else if sum <= c && alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c && alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            } else if sum <= c && alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += sign[t] * (yi * k(t, i) * di + yj * k(t, j) * dj);
        }
    }

    // rho from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = sign[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if sign[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if at_lower {
            if sign[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    SmoSolution { alpha, bias: -rho, converged, iterations }
}

/// Largest KKT violation of a dual solution in terms of the margins
/// `m_i = y_i f(x_i)`: `m ≥ 1` at `α = 0`, `m ≤ 1` at `α = C`, `m = 1` between.
pub fn kkt_violation(kernel: &[f64], sign: &[f64], c: f64, sol: &SmoSolution) -> f64 {
    let n = sign.len();
    (0..n)
        .map(|i| {
            let f = (0..n).map(|j| sol.alpha[j] * sign[j] * kernel[i * n + j]).sum::<f64>() + sol.bias;
            let m = sign[i] * f;
            let a = sol.alpha[i];
            if a <= 0.0 {
                (1.0 - m).max(0.0)
            } else if a >= c {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn rbf_gram(x: ArrayView2<'_, f64>, gamma: f64) -> Vec<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf_kernel(&rows[i], &rows[j], gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    kernel
}

/// Platt's sigmoid `P(y=1|f) = 1 / (1 + exp(A f + B))`, fitted by Newton's
/// method with backtracking on regularized targets.
pub fn platt_fit(decision: &[f64], labels: &[u8]) -> (f64, f64) {
    let prior1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &ti) in decision.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}

/// Fit an RBF C-SVM on labels in {0, 1}. The Gram matrix is held in memory,
/// so callers should subsample very large training sets.
pub fn svm_fit(x: ArrayView2<'_, f64>, y: &[u8], c: f64, gamma: f64) -> Result<SvmModel> {
    let (n, _) = x.dim();
    if n != y.len() {
        return Err(Error::shape(format!("{n} labels"), format!("{} labels", y.len())));
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::invalid("SVM needs samples from both classes"));
    }
    if !(c > 0.0 && gamma > 0.0) {
        return Err(Error::invalid(format!("SVM needs C > 0 and gamma > 0 (C={c}, gamma={gamma})")));
    }
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let kernel = rbf_gram(x, gamma);
    let sign: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let sol = smo_solve(&kernel, &sign, c);

    let decision: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| sol.alpha[j] * sign[j] * kernel[i * n + j]).sum::<f64>() + sol.bias)
        .collect();
    let (platt_a, platt_b) = platt_fit(&decision, y);

    let (mut support_vectors, mut dual_coef) = (Vec::new(), Vec::new());
    for (i, row) in rows.into_iter().enumerate() {
        if sol.alpha[i] > 0.0 {
            support_vectors.push(row);
            dual_coef.push(sol.alpha[i] * sign[i]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coef,
        bias: sol.bias,
        gamma,
        c,
        platt_a,
        platt_b,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf_kernel(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let z = self.decision(x) * self.platt_a + self.platt_b;
        let p1 = if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        };
        [1.0 - p1, p1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kernel_identity() {
        for g in [0.01, 1.0, 50.0] {
            assert_eq!(rbf_kernel(&[0.3, -2.0], &[0.3, -2.0], g), 1.0);
        }
    }

    #[test]
    fn symmetric_pair() {
        let x = array![[1.0], [-1.0]];
        let m = svm_fit(x.view(), &[0, 1], 10.0, 1.0).unwrap();
        assert!(m.decision(&[1.0]) < 0.0);
        assert!(m.decision(&[-1.0]) > 0.0);
        assert!(m.decision(&[0.0]).abs() < 1e-9);
        assert!(m.dual_coef.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn probabilities_are_distributions() {
        let x = array![[0.0, 0.0], [0.2, 0.1], [1.0, 1.0], [0.9, 1.2], [0.1, 0.3], [1.1, 0.8]];
        let m = svm_fit(x.view(), &[0, 0, 1, 1, 0, 1], 1.0, 1.0).unwrap();
        for q in [[0.0, 0.0], [5.0, 5.0], [-3.0, 2.0]] {
            let p = m.predict_proba(&q);
            assert!(p[0] >= 0.0 && p[1] >= 0.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
        assert!(m.predict_proba(&[1.0, 1.0])[1] > m.predict_proba(&[0.0, 0.0])[1]);
    }

    /// 50 points on either side of a random line, at distance ≥ 0.25 each
    /// (margin ≥ 0.5 between the classes).
    pub(crate) fn separable_set(seed: u64) -> (ndarray::Array2<f64>, Vec<u8>) {
        use rand::Rng as _;
        let mut r = crate::rng::seeded(seed);
        let theta: f64 = r.random_range(0.0..std::f64::consts::TAU);
        let (nx, ny) = (theta.cos(), theta.sin());
        let mut x = ndarray::Array2::zeros((50, 2));
        let mut y = Vec::with_capacity(50);
        for i in 0..50 {
            let label = (i % 2) as u8;
            let side = if label == 1 { 1.0 } else { -1.0 };
            let along: f64 = r.random_range(-2.0..2.0);
            let off: f64 = side * r.random_range(0.25..1.5);
            x[[i, 0]] = along * -ny + off * nx;
            x[[i, 1]] = along * nx + off * ny;
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn separable_set_kkt_audit() {
        for seed in 0..3 {
            let (x, y) = separable_set(seed);
            let kernel = rbf_gram(x.view(), 1.0);
            let sign: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
            let sol = smo_solve(&kernel, &sign, 10.0);
            assert!(sol.converged);
            assert!(kkt_violation(&kernel, &sign, 10.0, &sol) <= KKT_TOL);
            assert!(sol.alpha.iter().all(|&a| (0.0..=10.0).contains(&a)));
            assert!(sol.alpha.iter().zip(&sign).map(|(a, s)| a * s).sum::<f64>().abs() <= 1e-6);

            let m = svm_fit(x.view(), &y, 10.0, 1.0).unwrap();
            for (row, &l) in x.rows().into_iter().zip(&y) {
                assert_eq!(m.decision(row.as_slice().unwrap()) > 0.0, l == 1);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let x = array![[0.0], [1.0]];
        assert!(svm_fit(x.view(), &[1, 1], 1.0, 1.0).is_err());
        assert!(svm_fit(x.view(), &[0, 1], 0.0, 1.0).is_err());
    }
}
