use alloc::vec::Vec;

use super::GnnError;
use crate::graph::Graph;
use crate::tensor::{masked_cross_entropy, matmul, relu, relu_backward, Matrix, Scalar};

/// Largest graph the dense reference model will materialise.
pub const DENSE_LIMIT: usize = 20_000;

/// Full-graph forward intermediates, layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseForward<T> {
    /// `ÂH_ℓ` for each layer.
    pub gathered: Vec<Matrix<T>>,
    /// `ÂH_ℓ·W_ℓ` for each layer.
    pub pre_activations: Vec<Matrix<T>>,
    /// `H_0 … H_L`; the last entry holds the logits.
    pub activations: Vec<Matrix<T>>,
}

impl<T> DenseForward<T> {
    pub fn logits(&self) -> &Matrix<T> {
        self.activations.last().expect("at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseBackward<T> {
    pub loss: T,
    pub weight_grads: Vec<Matrix<T>>,
}

fn adjacency<T: Scalar>(g: &Graph) -> Result<Matrix<T>, GnnError> {
    Ok(g.dense_normalized_adjacency(DENSE_LIMIT)?.cast())
}

/// `H_{ℓ+1} = σ(ÂH_ℓW_ℓ)` over the whole graph, raw logits on the last layer.
pub fn dense_oracle_forward<T: Scalar>(
    g: &Graph,
    features: &Matrix<T>,
    weights: &[Matrix<T>],
) -> Result<DenseForward<T>, GnnError> {
    let a = adjacency::<T>(g)?;
    let mut out = DenseForward {
        gathered: Vec::new(),
        pre_activations: Vec::new(),
        activations: alloc::vec![features.clone()],
    };
    for (l, w) in weights.iter().enumerate() {
        let gathered = matmul(&a, out.activations.last().unwrap())?;
        let pre = matmul(&gathered, w)?;
        let next = if l + 1 == weights.len() {
            pre.clone()
        } else {
            relu(&pre)
        };
        out.gathered.push(gathered);
        out.pre_activations.push(pre);
        out.activations.push(next);
    }
    Ok(out)
}

/// Loss and exact weight gradients for the masked mean cross-entropy.
pub fn dense_oracle_backward<T: Scalar>(
    g: &Graph,
    forward: &DenseForward<T>,
    weights: &[Matrix<T>],
    classes: &[u32],
    mask: &[bool],
) -> Result<DenseBackward<T>, GnnError> {
    let a_t = adjacency::<T>(g)?.transpose();
    let normalizer = mask.iter().filter(|&&m| m).count();
    let loss = masked_cross_entropy(forward.logits(), classes, mask, normalizer)?;
    let depth = weights.len();
    let mut grads = alloc::vec![Matrix::zeros(0, 0); depth];
    let mut upstream = loss.grad;
    for l in (0..depth).rev() {
        let post = if l + 1 == depth {
            upstream
        } else {
            relu_backward(&forward.pre_activations[l], &upstream)?
        };
        grads[l] = forward.gathered[l].matmul_tn(&post)?;
        upstream = matmul(&a_t, &post.matmul_nt(&weights[l])?)?;
    }
    Ok(DenseBackward {
        loss: loss.loss,
        weight_grads: grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, symmetrize};

    #[test]
    fn p2_forward_by_hand() {
        let g = build_graph(&symmetrize(&[(0, 1)]).unwrap(), 2).unwrap();
        let x = Matrix::<f64>::identity(2);
        let w = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let f = dense_oracle_forward(&g, &x, &[w.clone(), Matrix::identity(1)]).unwrap();
        assert_eq!(
            f.activations[1],
            Matrix::from_rows(&[[1.0], [1.0]]).unwrap()
        );
        assert_eq!(f.logits(), &Matrix::from_rows(&[[1.0], [1.0]]).unwrap());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)];
        let g = build_graph(&symmetrize(&pairs).unwrap(), 5).unwrap();
        let x = Matrix::<f64>::from_fn(5, 3, |i, j| libm::sin((i * 3 + j) as f64 * 0.37));
        let w = [
            Matrix::from_fn(3, 4, |i, j| libm::cos((i + 2 * j) as f64 * 0.41) * 0.5),
            Matrix::from_fn(4, 2, |i, j| libm::sin((3 * i + j) as f64 * 0.23) * 0.5),
        ];
        let classes = [0u32, 1, 1, 0, 1];
        let mask = [true, true, false, true, true];
        let f = dense_oracle_forward(&g, &x, &w).unwrap();
        let b = dense_oracle_backward(&g, &f, &w, &classes, &mask).unwrap();
        let h = 1e-5;
        for l in 0..2 {
            let mut numeric = Matrix::zeros(w[l].rows(), w[l].cols());
            for i in 0..w[l].rows() {
                for j in 0..w[l].cols() {
                    let eval = |d: f64| {
                        let mut ws = w.clone();
                        ws[l].set(i, j, w[l].get(i, j) + d);
                        let f = dense_oracle_forward(&g, &x, &ws).unwrap();
                        masked_cross_entropy(f.logits(), &classes, &mask, 4)
                            .unwrap()
                            .loss
                    };
                    numeric.set(i, j, (eval(h) - eval(-h)) / (2.0 * h));
                }
            }
            assert!(b.weight_grads[l].relative_error(&numeric) <= 1e-6);
        }
    }
}
