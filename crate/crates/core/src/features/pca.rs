use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Exponents `n` of the PCA grid `N = round(0.8ⁿ · d)`.
pub const PCA_GRID: std::ops::RangeInclusive<u32> = 0..=12;

/// Retained dimension `round(0.8ⁿ · d)`, halves rounded up.
pub fn pca_dim(n: u32, d: usize) -> usize {
    (0.8f64.powi(n as i32) * d as f64 + 0.5).floor() as usize
}

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `N × d`, orthonormal rows in order of decreasing variance.
    pub components: Array2<f64>,
    /// Variance along each retained component.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let centered = Array1::from_iter(x.iter().zip(&self.mean).map(|(v, m)| v - m));
        self.components.dot(&centered).to_vec()
    }

    pub fn transform_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let centered = &x - &self.mean.view().insert_axis(Axis(0));
        centered.dot(&self.components.t())
    }

    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let z = Array1::from_vec(z.to_vec());
        (self.components.t().dot(&z) + &self.mean).to_vec()
    }
}

/// Top-`n_components` principal axes of the rows of `x`.
///
/// Axes are eigenvectors of the centred scatter matrix (equivalently right
/// singular vectors of the centred data). Each is signed so that its
/// largest-magnitude entry is positive.
pub fn pca_fit(x: ArrayView2<'_, f64>, n_components: usize) -> Result<PcaModel> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(Error::invalid("PCA needs a nonempty data matrix"));
    }
    if n_components == 0 || n_components > n.min(d) {
        return Err(Error::invalid(format!(
            "cannot keep {n_components} components of {n} samples in {d} dimensions"
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let scatter = centered.t().dot(&centered);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, scatter.as_standard_layout().as_slice().expect("contiguous")));

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > top * RANK_TOL).count();
    if n_components > rank {
        return Err(Error::Numerical(format!(
            "requested {n_components} components but the data has rank {rank}"
        )));
    }

    let mut components = Array2::<f64>::zeros((n_components, d));
    let mut explained_variance = Vec::with_capacity(n_components);
    let denom = (n.max(2) - 1) as f64;
    for (row, &i) in order.iter().take(n_components).enumerate() {
        let v = eig.eigenvectors.column(i);
        let pivot = v.iter().enumerate().fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components[[row, j]] = sign * v[j];
        }
        explained_variance.push(eig.eigenvalues[i].max(0.0) / denom);
    }
    Ok(PcaModel { mean, components, explained_variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut r = crate::rng::seeded(seed);
        Array2::from_shape_fn((n, d), |_| r.random_range(-1.0..1.0))
    }

    fn recon_error(m: &PcaModel, x: &Array2<f64>) -> f64 {
        x.rows()
            .into_iter()
            .map(|row| {
                let r = m.reconstruct(&m.transform(row.as_slice().unwrap()));
                row.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn grid_dimensions() {
        assert_eq!(pca_dim(0, 304), 304);
        assert_eq!(pca_dim(1, 304), 243);
        let dims: Vec<usize> = PCA_GRID.map(|n| pca_dim(n, 304)).collect();
        assert_eq!(dims.len(), 13);
        assert!(dims.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rank_one_line() {
        let dir = [0.6, -0.8, 0.0];
        let x = Array2::from_shape_fn((20, 3), |(i, j)| 1.0 + (i as f64 - 7.0) * dir[j]);
        let m = pca_fit(x.view(), 1).unwrap();
        assert!(recon_error(&m, &x) < 1e-18);
        assert!(pca_fit(x.view(), 2).is_err());
        // sign convention: largest-magnitude entry (-0.8) flipped positive
        assert!((m.components[[0, 1]] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_components_and_centred_mean() {
        let x = random(40, 6, 1);
        let m = pca_fit(x.view(), 6).unwrap();
        let g = m.components.dot(&m.components.t());
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - want).abs() < 1e-8);
            }
        }
        assert!(m.transform(m.mean.as_slice().unwrap()).iter().all(|v| v.abs() < 1e-12));
        assert!(recon_error(&m, &x) < 1e-6);
    }

    #[test]
    fn reconstruction_error_non_increasing() {
        let x = random(30, 8, 2);
        let errs: Vec<f64> = (1..=8).map(|k| recon_error(&pca_fit(x.view(), k).unwrap(), &x)).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{errs:?}");
    }

    #[test]
    fn too_many_components() {
        let x = random(5, 8, 3);
        assert!(pca_fit(x.view(), 6).is_err());
        assert!(pca_fit(x.view(), 0).is_err());
    }
}
