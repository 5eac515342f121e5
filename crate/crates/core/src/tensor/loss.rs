use alloc::vec::Vec;

use super::{Matrix, Scalar, TensorError};

/// Masked softmax cross-entropy over a block of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    /// `Σ_masked −ln softmax(row)[label] / normalizer`
    pub loss: T,
    /// `(softmax − onehot) / normalizer` on masked rows, zero elsewhere.
    pub grad: Matrix<T>,
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Index of the largest entry of each row (first one on ties).
pub fn argmax_rows<T: Scalar>(m: &Matrix<T>) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Cross-entropy against class indices, normalised by an external row count.
///
/// Intervals call this on their own rows with `normalizer` set to the size of
/// the global training mask, so per-interval losses and gradients sum to the
/// whole-graph mean.
pub fn masked_cross_entropy<T: Scalar>(
    logits: &Matrix<T>,
    classes: &[u32],
    mask: &[bool],
    normalizer: usize,
) -> Result<LossOutput<T>, TensorError> {
    let rows = logits.rows();
    if classes.len() != rows || mask.len() != rows {
        return Err(TensorError::Shape {
            op: "masked_cross_entropy",
            left: logits.shape(),
            right: (classes.len(), mask.len()),
        });
    }
    if normalizer == 0 {
        return Err(TensorError::EmptyMask);
    }
    let k = logits.cols();
    let scale = T::one() / T::of_f64(normalizer as f64);
    let mut grad = Matrix::zeros(rows, k);
    let mut loss = T::zero();
    for i in 0..rows {
        if !mask[i] {
            continue;
        }
        let class = classes[i] as usize;
        if class >= k {
            return Err(TensorError::ClassOutOfRange {
                row: i,
                class: classes[i],
                classes: k,
            });
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp());
        let log_sum = max + sum.ln();
        loss = loss + (log_sum - row[class]) * scale;
        let g = grad.row_mut(i);
        for (j, gv) in g.iter_mut().enumerate() {
            let p = (row[j] - log_sum).exp();
            let y = if j == class { T::one() } else { T::zero() };
            *gv = (p - y) * scale;
        }
    }
    if !loss.is_finite() || !grad.is_finite() {
        return Err(TensorError::NonFinite {
            op: "masked_cross_entropy",
        });
    }
    Ok(LossOutput { loss, grad })
}

/// Mean softmax cross-entropy over the masked rows of one-hot labels.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Matrix<T>,
    labels_onehot: &Matrix<T>,
    mask: &[bool],
) -> Result<LossOutput<T>, TensorError> {
    if logits.shape() != labels_onehot.shape() {
        return Err(TensorError::Shape {
            op: "softmax_cross_entropy",
            left: logits.shape(),
            right: labels_onehot.shape(),
        });
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(TensorError::EmptyMask);
    }
    let mut classes = Vec::with_capacity(logits.rows());
    for i in 0..labels_onehot.rows() {
        let row = labels_onehot.row(i);
        if !mask.get(i).copied().unwrap_or(false) {
            classes.push(0);
            continue;
        }
        let ones: Vec<usize> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == T::one())
            .map(|(j, _)| j)
            .collect();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones.len() != 1 || zeros + 1 != row.len() {
            return Err(TensorError::NotOneHot { row: i });
        }
        classes.push(ones[0] as u32);
    }
    masked_cross_entropy(logits, &classes, mask, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_logits_give_ln2() {
        let logits = Matrix::<f64>::from_rows(&[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        let out = softmax_cross_entropy(&logits, &y, &[true, true]).unwrap();
        assert!((out.loss - core::f64::consts::LN_2).abs() < 1e-12);
        assert!((out.grad.get(0, 0) + 0.25).abs() < 1e-12);
        assert!((out.grad.get(0, 1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_are_stable() {
        let logits = Matrix::<f32>::from_rows(&[[1000.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let out = softmax_cross_entropy(&logits, &y, &[true]).unwrap();
        assert!(out.loss.abs() < 1e-6);
        assert!(out.grad.data().iter().all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn rejects_bad_masks_and_labels() {
        let logits = Matrix::<f64>::zeros(2, 2);
        let y = Matrix::from_rows(&[[1.0, 0.0], [0.5, 0.5]]).unwrap();
        assert_eq!(
            softmax_cross_entropy(&logits, &y, &[false, false]).unwrap_err(),
            TensorError::EmptyMask
        );
        assert_eq!(
            softmax_cross_entropy(&logits, &y, &[true, true]).unwrap_err(),
            TensorError::NotOneHot { row: 1 }
        );
        // unmasked rows are not inspected
        assert!(softmax_cross_entropy(&logits, &y, &[true, false]).is_ok());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Matrix::<f64>::from_fn(20, 7, |_, _| rng.random_range(-30.0..30.0));
        let s = softmax_rows(&m);
        for i in 0..s.rows() {
            let sum: f64 = s.row(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let logits = Matrix::<f64>::from_fn(5, 3, |_, _| rng.random_range(-2.0..2.0));
        let classes: Vec<u32> = (0..5).map(|i| (i % 3) as u32).collect();
        let mask = [true, true, false, true, true];
        let analytic = masked_cross_entropy(&logits, &classes, &mask, 4)
            .unwrap()
            .grad;
        let h = 1e-5;
        let mut numeric = Matrix::<f64>::zeros(5, 3);
        for i in 0..5 {
            for j in 0..3 {
                let mut plus = logits.clone();
                plus.set(i, j, logits.get(i, j) + h);
                let mut minus = logits.clone();
                minus.set(i, j, logits.get(i, j) - h);
                let lp = masked_cross_entropy(&plus, &classes, &mask, 4)
                    .unwrap()
                    .loss;
                let lm = masked_cross_entropy(&minus, &classes, &mask, 4)
                    .unwrap()
                    .loss;
                numeric.set(i, j, (lp - lm) / (2.0 * h));
            }
        }
        assert!(analytic.relative_error(&numeric) <= 1e-6);
    }

    #[test]
    fn argmax_picks_first_maximum() {
        let m = Matrix::<f32>::from_rows(&[[0.1, 0.9, 0.9], [2.0, -1.0, 0.0]]).unwrap();
        assert_eq!(argmax_rows(&m), [1, 0]);
    }
}
