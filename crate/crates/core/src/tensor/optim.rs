use serde::{Deserialize, Serialize};

use super::{Matrix, Scalar, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Per-parameter optimiser state. Owned by exactly one parameter server.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Option<Matrix<T>>,
    v: Option<Matrix<T>>,
    step_count: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn sgd(learning_rate: T) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: T) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn new(kind: OptimizerKind, learning_rate: T) -> Self {
        Self {
            kind,
            learning_rate,
            beta1: T::of_f64(0.9),
            beta2: T::of_f64(0.999),
            eps: T::of_f64(1e-8),
            m: None,
            v: None,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> Option<&Matrix<T>> {
        self.m.as_ref()
    }

    pub fn second_moment(&self) -> Option<&Matrix<T>> {
        self.v.as_ref()
    }
}

/// Applies one update and returns the new parameters.
///
/// Adam moments are allocated on the first call and must keep the shape of
/// the parameter afterwards.
pub fn optimizer_step<T: Scalar>(
    state: &mut OptimizerState<T>,
    params: &Matrix<T>,
    grads: &Matrix<T>,
) -> Result<Matrix<T>, TensorError> {
    if params.shape() != grads.shape() {
        return Err(TensorError::Shape {
            op: "optimizer_step",
            left: params.shape(),
            right: grads.shape(),
        });
    }
    let lr = state.learning_rate;
    let out = match state.kind {
        OptimizerKind::Sgd => {
            let mut out = params.clone();
            for (p, &g) in out.data_mut().iter_mut().zip(grads.data()) {
                *p = *p - lr * g;
            }
            out
        }
        OptimizerKind::Adam => {
            let shape = params.shape();
            for moment in [&state.m, &state.v].into_iter().flatten() {
                if moment.shape() != shape {
                    return Err(TensorError::Shape {
                        op: "optimizer_step(adam state)",
                        left: moment.shape(),
                        right: shape,
                    });
                }
            }
            let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
            let m = state
                .m
                .get_or_insert_with(|| Matrix::zeros(shape.0, shape.1));
            let v = state
                .v
                .get_or_insert_with(|| Matrix::zeros(shape.0, shape.1));
            let t = (state.step_count + 1) as i32;
            let c1 = T::one() - b1.powi(t);
            let c2 = T::one() - b2.powi(t);
            let mut out = params.clone();
            for (((p, &g), mi), vi) in out
                .data_mut()
                .iter_mut()
                .zip(grads.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
            out
        }
    };
    state.step_count += 1;
    if !out.is_finite() {
        return Err(TensorError::NonFinite {
            op: "optimizer_step",
        });
    }
    Ok(out)
}
