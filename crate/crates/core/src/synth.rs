//! Deterministic stochastic-block-model datasets.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, symmetrize, Graph, GraphError, VertexId};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("need at least one community with at least one vertex")]
    Empty,
    #[error("feature width {width} is below the community count {communities}")]
    FeatureWidth { width: usize, communities: usize },
    #[error("noise scale must be finite and non-negative")]
    InvalidNoise,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub communities: usize,
    pub per_community: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Columns: community indicator first, pure noise after.
    pub feature_dims: usize,
    /// Standard deviation of the Gaussian noise added to every feature.
    pub noise: f64,
    pub seed: u64,
}

impl SbmSpec {
    pub fn new(communities: usize, per_community: usize, p_in: f64, p_out: f64, seed: u64) -> Self {
        Self {
            communities,
            per_community,
            p_in,
            p_out,
            feature_dims: communities + 4,
            noise: 1.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Undirected pairs `(u, v)` with `u < v`.
    pub undirected: Vec<(VertexId, VertexId)>,
    pub graph: Graph,
    pub features: Matrix<f32>,
    pub labels: Vec<u32>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }
}

/// Vertex `i` belongs to community `i / per_community`.
pub fn synth_sbm(
    communities: usize,
    per_community: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<Dataset, SynthError> {
    synth_sbm_with(&SbmSpec::new(communities, per_community, p_in, p_out, seed))
}

pub fn synth_sbm_with(spec: &SbmSpec) -> Result<Dataset, SynthError> {
    for p in [spec.p_in, spec.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(SynthError::InvalidProbability(p));
        }
    }
    if spec.communities == 0 || spec.per_community == 0 {
        return Err(SynthError::Empty);
    }
    if spec.feature_dims < spec.communities {
        return Err(SynthError::FeatureWidth {
            width: spec.feature_dims,
            communities: spec.communities,
        });
    }
    let noise = Normal::new(0.0, spec.noise).map_err(|_| SynthError::InvalidNoise)?;
    let n = spec.communities * spec.per_community;
    let community = |v: usize| v / spec.per_community;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut undirected = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if community(u) == community(v) {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.random_bool(p) {
                undirected.push((u as VertexId, v as VertexId));
            }
        }
    }
    let graph = build_graph(&symmetrize(&undirected)?, n)?;

    let mut feat_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_f00d);
    let features = Matrix::from_fn(n, spec.feature_dims, |v, j| {
        let base = if j == community(v) { 1.0 } else { 0.0 };
        (base + noise.sample(&mut feat_rng)) as f32
    });
    let labels = (0..n).map(|v| community(v) as u32).collect();
    Ok(Dataset {
        undirected,
        graph,
        features,
        labels,
        num_classes: spec.communities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_model_gives_disjoint_cliques() {
        let d = synth_sbm(2, 5, 1.0, 0.0, 3).unwrap();
        assert_eq!(d.undirected.len(), 2 * 10);
        for &(u, v) in &d.undirected {
            assert_eq!(u / 5, v / 5);
        }
        assert_eq!(d.graph.num_edges(), 40);
        assert_eq!(d.labels, [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(d.features.shape(), (10, 6));
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = synth_sbm(3, 20, 0.3, 0.05, 11).unwrap();
        let b = synth_sbm(3, 20, 0.3, 0.05, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            a.undirected,
            synth_sbm(3, 20, 0.3, 0.05, 12).unwrap().undirected
        );
    }

    #[test]
    fn inter_community_edges_follow_binomial() {
        // n1 = n2 = 20, p_out = 0.1: mean 40, variance 36 per run
        let (n1, n2, p) = (20.0, 20.0, 0.1);
        let runs = 100.0;
        let mut total = 0.0;
        for seed in 0..100 {
            let d = synth_sbm(2, 20, 0.0, p, seed).unwrap();
            total += d.undirected.len() as f64;
        }
        let mean = total / runs;
        let expect = n1 * n2 * p;
        let sigma = libm::sqrt(n1 * n2 * p * (1.0 - p) / runs);
        assert!(
            (mean - expect).abs() <= 3.0 * sigma,
            "{mean} vs {expect} ± {}",
            3.0 * sigma
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            synth_sbm(2, 5, 1.5, 0.0, 0).unwrap_err(),
            SynthError::InvalidProbability(1.5)
        );
        assert_eq!(
            synth_sbm(2, 5, 0.5, -0.1, 0).unwrap_err(),
            SynthError::InvalidProbability(-0.1)
        );
        assert_eq!(synth_sbm(0, 5, 0.5, 0.1, 0).unwrap_err(), SynthError::Empty);
        let mut s = SbmSpec::new(4, 2, 0.5, 0.1, 0);
        s.feature_dims = 3;
        assert!(matches!(
            synth_sbm_with(&s),
            Err(SynthError::FeatureWidth { .. })
        ));
    }
}
