use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::transforms::PatchDataset;

pub const DEFAULT_TOP_FRAC: f64 = 0.10;
const CONSTANT_TOL: f64 = 1e-12;

/// Per-class mean spectra; index 0/1 is the class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSpectra {
    pub freq_axis: Vec<f64>,
    pub test: [Vec<f64>; 2],
    pub train: [Vec<f64>; 2],
    /// `[class][test, train]`: spectrum was constant and is reported as zeros.
    pub constant: [[bool; 2]; 2],
    pub n_test_patches: usize,
}

/// Zero mean, unit (population) variance; constant input gives zeros and
/// `true`.
pub fn standardize_spectrum(v: &[f64]) -> (Vec<f64>, bool) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let scale = mean.abs().max(1.0);
    if var.sqrt() <= CONSTANT_TOL * scale {
        return (vec![0.0; v.len()], true);
    }
    let sd = var.sqrt();
    (v.iter().map(|x| (x - mean) / sd).collect(), false)
}

/// Average over patches and their `w1` columns, giving one value per row.
fn mean_spectrum(data: &PatchDataset, idx: &[usize]) -> Vec<f64> {
    let (h1, w1) = (data.h1, data.w1);
    let mut acc = vec![0.0; h1];
    for &i in idx {
        for (f, row) in data.patch(i).chunks_exact(w1).enumerate() {
            acc[f] += row.iter().map(|&v| f64::from(v)).sum::<f64>();
        }
    }
    let norm = (idx.len() * w1) as f64;
    acc.iter().map(|a| a / norm).collect()
}

/// For class `i`, the `ceil(top_frac · N)` test patches with the highest
/// predicted `p_i` are averaged; the training spectrum averages all
/// training patches labelled `i`. Each spectrum is then standardized.
pub fn class_spectra(
    probs: ArrayView2<'_, f64>,
    test: &PatchDataset,
    train: &PatchDataset,
    freq_axis: &[f64],
    top_frac: f64,
) -> Result<ClassSpectra> {
    let n = test.len();
    if n == 0 {
        return Err(Error::invalid("class spectra need a non-empty test set"));
    }
    if probs.dim() != (n, 2) {
        return Err(Error::shape(format!("{n}x2 probabilities"), format!("{}x{}", probs.nrows(), probs.ncols())));
    }
    if (train.h1, train.w1) != (test.h1, test.w1) || freq_axis.len() != test.h1 {
        return Err(Error::shape(
            format!("{}x{} patches and {} frequencies", test.h1, test.w1, test.h1),
            format!("{}x{} patches and {} frequencies", train.h1, train.w1, freq_axis.len()),
        ));
    }
    if !(top_frac > 0.0 && top_frac <= 1.0) {
        return Err(Error::invalid(format!("top fraction {top_frac} outside (0, 1]")));
    }
    let top_n = ((top_frac * n as f64).ceil() as usize).clamp(1, n);
    let mut out = ClassSpectra {
        freq_axis: freq_axis.to_vec(),
        test: [Vec::new(), Vec::new()],
        train: [Vec::new(), Vec::new()],
        constant: [[false; 2]; 2],
        n_test_patches: top_n,
    };
    for class in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| probs[[b, class]].total_cmp(&probs[[a, class]]).then(a.cmp(&b)));
        let (spec, constant) = standardize_spectrum(&mean_spectrum(test, &order[..top_n]));
        out.test[class] = spec;
        out.constant[class][0] = constant;

        let labelled: Vec<usize> = (0..train.len()).filter(|&i| usize::from(train.labels[i]) == class).collect();
        if labelled.is_empty() {
            return Err(Error::invalid(format!("no training patches of class {class}")));
        }
        let (spec, constant) = standardize_spectrum(&mean_spectrum(train, &labelled));
        out.train[class] = spec;
        out.constant[class][1] = constant;
    }
    Ok(out)
}

impl ClassSpectra {
    /// Frequency (Hz) of the maximum of `test[class]`.
    pub fn peak_hz(&self, class: usize) -> f64 {
        let v = &self.test[class];
        let i = (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        self.freq_axis[i]
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::transforms::PatchMeta;

    fn dataset(h1: usize, w1: usize, patches: Vec<Vec<f32>>, labels: Vec<u8>) -> PatchDataset {
        let mut d = PatchDataset::empty(h1, w1);
        for (i, p) in patches.into_iter().enumerate() {
            d.patches.extend(p);
            d.meta.push(PatchMeta { recording_id: "r".into(), start_frame: i });
        }
        d.labels = labels;
        d
    }

    #[test]
    fn single_column_single_patch() {
        let test = dataset(3, 1, vec![vec![1.0, 2.0, 6.0]], vec![1]);
        let train = dataset(3, 1, vec![vec![1.0, 2.0, 6.0], vec![0.0, 1.0, 0.0]], vec![1, 0]);
        let s = class_spectra(array![[0.2, 0.8]].view(), &test, &train, &[1.0, 2.0, 3.0], 0.1).unwrap();
        let (expected, _) = standardize_spectrum(&[1.0, 2.0, 6.0]);
        assert_eq!(s.test[1], expected);
        assert_eq!(s.n_test_patches, 1);
        assert_eq!(s.peak_hz(1), 3.0);
        for v in s.test.iter().chain(&s.train) {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6 && (var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn picks_top_patches_and_averages_columns() {
        // 20 patches; top 10 % for class 1 are the two with highest p1
        let mut patches = Vec::new();
        let mut p1 = Vec::new();
        for i in 0..20 {
            let hot = i == 4 || i == 9;
            patches.push(if hot { vec![0.0, 0.0, 4.0, 2.0] } else { vec![3.0, 1.0, 0.0, 0.0] });
            p1.push(if hot { 0.95 } else { 0.1 + 0.01 * i as f64 });
        }
        let probs = ndarray::Array2::from_shape_fn((20, 2), |(i, c)| if c == 1 { p1[i] } else { 1.0 - p1[i] });
        let test = dataset(2, 2, patches.clone(), vec![0; 20]);
        let train = dataset(2, 2, patches, (0..20).map(|i| u8::from(i == 4 || i == 9)).collect());
        let s = class_spectra(probs.view(), &test, &train, &[100.0, 200.0], 0.1).unwrap();
        assert_eq!(s.n_test_patches, 2);
        assert_eq!(s.peak_hz(1), 200.0);
        assert_eq!(s.peak_hz(0), 100.0);
        assert_eq!(s.test[1], s.train[1]);
    }

    #[test]
    fn constant_patches_are_flagged() {
        let test = dataset(3, 2, vec![vec![5.0; 6], vec![5.0; 6]], vec![0, 1]);
        let s = class_spectra(array![[0.5, 0.5], [0.4, 0.6]].view(), &test, &test, &[1.0, 2.0, 3.0], 0.1).unwrap();
        assert_eq!(s.test[0], vec![0.0; 3]);
        assert_eq!(s.constant, [[true, true], [true, true]]);
    }

    #[test]
    fn errors() {
        let empty = PatchDataset::empty(3, 1);
        let probs = ndarray::Array2::<f64>::zeros((0, 2));
        assert!(class_spectra(probs.view(), &empty, &empty, &[1.0, 2.0, 3.0], 0.1).is_err());
        let test = dataset(3, 1, vec![vec![1.0, 2.0, 3.0]], vec![1]);
        assert!(class_spectra(array![[0.2, 0.8]].view(), &test, &test, &[1.0, 2.0, 3.0], 0.1).is_err());
    }
}
