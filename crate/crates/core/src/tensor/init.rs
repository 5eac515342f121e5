use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{Matrix, Scalar, TensorError};

/// Glorot uniform bound `√(6/(fan_in+fan_out))`.
pub fn xavier_bound(rows: usize, cols: usize) -> f64 {
    libm::sqrt(6.0 / (rows + cols) as f64)
}

/// Glorot-uniform weights on `[−b, b]`, deterministic in `seed`.
pub fn xavier_init<T: Scalar>(
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<Matrix<T>, TensorError> {
    if rows == 0 || cols == 0 {
        return Err(TensorError::ZeroDimension);
    }
    let b = xavier_bound(rows, cols);
    let dist = Uniform::new_inclusive(-b, b).expect("finite positive bound");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Matrix::from_fn(rows, cols, |_, _| {
        T::of_f64(dist.sample(&mut rng))
    }))
}

/// He-normal weights with standard deviation `√(2/rows)`.
pub fn he_init<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Result<Matrix<T>, TensorError> {
    if rows == 0 || cols == 0 {
        return Err(TensorError::ZeroDimension);
    }
    let dist = Normal::new(0.0, libm::sqrt(2.0 / rows as f64)).expect("positive std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Matrix::from_fn(rows, cols, |_, _| {
        T::of_f64(dist.sample(&mut rng))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xavier_square_bound_is_one() {
        assert_eq!(xavier_bound(3, 3), 1.0);
        let w = xavier_init::<f64>(3, 3, 1).unwrap();
        assert!(w.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = xavier_init::<f32>(16, 8, 42).unwrap();
        let b = xavier_init::<f32>(16, 8, 42).unwrap();
        let bits = |m: &Matrix<f32>| {
            m.data()
                .iter()
                .map(|v| v.to_bits())
                .collect::<alloc::vec::Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(a, xavier_init::<f32>(16, 8, 43).unwrap());
        assert_eq!(
            he_init::<f64>(4, 4, 9).unwrap(),
            he_init::<f64>(4, 4, 9).unwrap()
        );
    }

    #[test]
    fn xavier_mean_near_zero() {
        let w = xavier_init::<f64>(100, 100, 7).unwrap();
        let mean = w.data().iter().sum::<f64>() / w.data().len() as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn he_std_matches_fan_in() {
        let w = he_init::<f64>(50, 400, 5).unwrap();
        let n = w.data().len() as f64;
        let var = w.data().iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var - 2.0 / 50.0).abs() < 0.004, "var {var}");
    }

    #[test]
    fn zero_dimension_rejected() {
        assert_eq!(
            xavier_init::<f32>(0, 3, 0).unwrap_err(),
            TensorError::ZeroDimension
        );
        assert_eq!(
            he_init::<f32>(3, 0, 0).unwrap_err(),
            TensorError::ZeroDimension
        );
    }
}
