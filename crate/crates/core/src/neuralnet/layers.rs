use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::Real;

/// Batched valid-mode convolution via im2col. Inputs are rows of length
/// `h1·w1` (row-major patch); outputs are rows of length `h2·w2·N_k` laid
/// out as `(i·w2 + j)·N_k + p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub h1: usize,
    pub w1: usize,
    pub k: usize,
    /// `N_k × k²`, row `p` is kernel `W_p` flattened row-major.
    pub kernels: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn out_dims(&self) -> (usize, usize) {
        (self.h1 + 1 - self.k, self.w1 + 1 - self.k)
    }

    pub fn n_k(&self) -> usize {
        self.kernels.nrows()
    }

    /// `(B·h2·w2) × k²` patch matrix.
    pub fn im2col(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let (h2, w2) = self.out_dims();
        let (k, w1) = (self.k, self.w1);
        let b = x.nrows();
        let mut cols = Vec::with_capacity(b * h2 * w2 * k * k);
        for row in x.rows() {
            let row = row.as_slice().map(std::borrow::Cow::Borrowed).unwrap_or_else(|| std::borrow::Cow::Owned(row.to_vec()));
            for i in 0..h2 {
                for j in 0..w2 {
                    for a in 0..k {
                        let start = (i + a) * w1 + j;
                        cols.extend_from_slice(&row[start..start + k]);
                    }
                }
            }
        }
        Array2::from_shape_vec((b * h2 * w2, k * k), cols).expect("im2col shape")
    }

    /// Pre-activation output, `B × (h2·w2·N_k)`.
    pub fn forward_cols(&self, cols: &Array2<T>, batch: usize) -> Array2<T> {
        let mut z = cols.dot(&self.kernels.t());
        z += &self.bias;
        let width = z.len() / batch.max(1);
        z.into_shape_with_order((batch, width)).expect("conv output shape")
    }

    /// Parameter gradients from the output gradient `dz` (same shape as the
    /// forward output).
    pub fn backward(&self, cols: &Array2<T>, dz: Array2<T>) -> (Array2<T>, Array1<T>) {
        let rows = cols.nrows();
        let dz = dz.into_shape_with_order((rows, self.n_k())).expect("conv grad shape");
        (dz.t().dot(cols), dz.sum_axis(Axis(0)))
    }
}

/// Fully connected layer `y = W x + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> Dense<T> {
    pub fn forward(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut y = x.dot(&self.w.t());
        y += &self.b;
        y
    }

    /// Returns `(dW, db, dx)`; `dx` is skipped when not needed.
    pub fn backward(&self, x: ArrayView2<'_, T>, dy: &Array2<T>, need_dx: bool) -> (Array2<T>, Array1<T>, Option<Array2<T>>) {
        let dw = dy.t().dot(&x);
        let db = dy.sum_axis(Axis(0));
        let dx = need_dx.then(|| dy.dot(&self.w));
        (dw, db, dx)
    }
}
