use crate::error::{Error, Result};

/// Largest odd integer ≤ `kernel_s · rate`, at least 1.
pub fn median_kernel_len(kernel_s: f64, rate: f64) -> Result<usize> {
    let span = kernel_s * rate;
    if !(span.is_finite() && span >= 0.0) {
        return Err(Error::invalid(format!("median kernel of {kernel_s} s at {rate} Hz")));
    }
    let n = span.floor() as usize;
    Ok(if n == 0 { 1 } else if n.is_multiple_of(2) { n - 1 } else { n })
}

/// Sliding median over an odd window with edge replication; output length
/// equals input length.
pub fn median_filter(scores: &[f64], kernel_len: usize) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("median filter of an empty sequence"));
    }
    if kernel_len.is_multiple_of(2) {
        return Err(Error::invalid(format!("median kernel length {kernel_len} must be odd")));
    }
    let half = kernel_len / 2;
    let last = scores.len() - 1;
    let mut window = Vec::with_capacity(kernel_len);
    Ok((0..scores.len())
        .map(|i| {
            window.clear();
            window.extend((0..kernel_len).map(|k| scores[(i + k).saturating_sub(half).min(last)]));
            window.sort_by(f64::total_cmp);
            window[half]
        })
        .collect())
}

pub fn median_filter_seconds(scores: &[f64], kernel_s: f64, rate: f64) -> Result<Vec<f64>> {
    median_filter(scores, median_kernel_len(kernel_s, rate)?)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn examples() {
        assert_eq!(median_filter(&[0.0, 1.0, 0.0, 1.0, 1.0], 3).unwrap(), vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(median_kernel_len(1.0, 31.25).unwrap(), 31);
        assert_eq!(median_kernel_len(1.0, 3.125).unwrap(), 3);
        assert_eq!(median_kernel_len(1.0, 4.9).unwrap(), 3);
        assert_eq!(median_kernel_len(0.1, 3.125).unwrap(), 1);
        assert!(median_filter(&[], 3).is_err());
        assert!(median_filter(&[1.0], 2).is_err());
    }

    fn naive(x: &[f64], k: usize) -> Vec<f64> {
        let h = k as isize / 2;
        (0..x.len() as isize)
            .map(|i| {
                let mut w: Vec<f64> = (i - h..=i + h).map(|j| x[j.clamp(0, x.len() as isize - 1) as usize]).collect();
                w.sort_by(|a, b| a.partial_cmp(b).unwrap());
                w[h as usize]
            })
            .collect()
    }

    proptest! {
        #[test]
        fn matches_sort_oracle(x in prop::collection::vec(-10.0f64..10.0, 1..60), k in 0usize..6) {
            let k = 2 * k + 1;
            prop_assert_eq!(median_filter(&x, k).unwrap(), naive(&x, k));
        }

        #[test]
        fn identity_constant_and_monotone(x in prop::collection::vec(0.0f64..1.0, 1..40), bump in prop::collection::vec(0.0f64..1.0, 40), c in -3.0f64..3.0) {
            prop_assert_eq!(median_filter(&x, 1).unwrap(), x.clone());
            prop_assert_eq!(median_filter(&vec![c; x.len()], 5).unwrap(), vec![c; x.len()]);
            let y: Vec<f64> = x.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let (fx, fy) = (median_filter(&x, 5).unwrap(), median_filter(&y, 5).unwrap());
            prop_assert!(fx.iter().zip(&fy).all(|(a, b)| b >= a));
        }
    }
}
