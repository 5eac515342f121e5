use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::GnnError;
use crate::graph::{Partition, PartitionId, VertexId, VertexInterval};
use crate::tensor::{
    masked_cross_entropy, matmul, relu, relu_backward, LossOutput, Matrix, Scalar,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChunkKind {
    Gathered,
    Activated,
    Scattered,
    Gradient,
}

/// Data flowing between the tasks of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerChunk<T> {
    pub interval: usize,
    pub layer: usize,
    pub epoch: u32,
    pub kind: ChunkKind,
    pub matrix: Matrix<T>,
}

/// Where a Gather finds the row of a (local or ghost) vertex.
pub trait RowSource<T> {
    fn row(&self, v: VertexId) -> Option<&[T]>;
}

/// Every vertex's row in one matrix indexed by global id.
pub struct DenseRows<'a, T>(pub &'a Matrix<T>);

impl<T: Scalar> RowSource<T> for DenseRows<'_, T> {
    fn row(&self, v: VertexId) -> Option<&[T]> {
        ((v as usize) < self.0.rows()).then(|| self.0.row(v as usize))
    }
}

/// Rows a Scatter ships to one remote partition.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostMessage<T> {
    pub from: PartitionId,
    pub to: PartitionId,
    pub interval: usize,
    pub layer: usize,
    pub epoch: u32,
    pub direction: Direction,
    /// Row `i` of `rows` belongs to `vertices[i]`.
    pub vertices: Vec<VertexId>,
    pub rows: Matrix<T>,
}

/// What ∇ApplyVertex needs from the forward pass of one interval and layer.
#[derive(Debug, Clone, PartialEq)]
pub struct StashedContext<T> {
    pub weight_version: u64,
    /// `(ÂH_ℓ)` rows of the interval.
    pub gathered: Matrix<T>,
    /// `in_ℓ = ÂH_ℓ·W_ℓ`; absent under rematerialisation.
    pub pre_activation: Option<Matrix<T>>,
}

/// Graph-server side cache of forward intermediates, keyed by
/// (interval, layer, epoch).
#[derive(Debug, Clone, Default)]
pub struct ContextStore<T> {
    rematerialize: bool,
    contexts: BTreeMap<(usize, usize, u32), StashedContext<T>>,
    versions: BTreeMap<(usize, u32), u64>,
}

impl<T: Scalar> ContextStore<T> {
    pub fn new(rematerialize: bool) -> Self {
        Self {
            rematerialize,
            contexts: BTreeMap::new(),
            versions: BTreeMap::new(),
        }
    }

    pub fn rematerialize(&self) -> bool {
        self.rematerialize
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn get(&self, interval: usize, layer: usize, epoch: u32) -> Option<&StashedContext<T>> {
        self.contexts.get(&(interval, layer, epoch))
    }

    /// Weight version pinned for (interval, epoch), if any task used one yet.
    pub fn pinned_version(&self, interval: usize, epoch: u32) -> Option<u64> {
        self.versions.get(&(interval, epoch)).copied()
    }

    fn pin(&mut self, interval: usize, epoch: u32, version: u64) -> Result<(), GnnError> {
        match self.versions.get(&(interval, epoch)) {
            Some(&stashed) if stashed != version => Err(GnnError::VersionMismatch {
                interval,
                epoch,
                stashed,
                got: version,
            }),
            Some(_) => Ok(()),
            None => {
                self.versions.insert((interval, epoch), version);
                Ok(())
            }
        }
    }

    /// Drops the version pin once the interval's epoch is finished.
    pub fn release(&mut self, interval: usize, epoch: u32) {
        self.versions.remove(&(interval, epoch));
    }
}

/// Forward Gather: row `v` is `self(v)·H[v] + Σ_{u→v} coef(u→v)·H[u]`.
pub fn gather<T: Scalar, S: RowSource<T> + ?Sized>(
    p: &Partition,
    iv: &VertexInterval,
    layer: usize,
    epoch: u32,
    width: usize,
    source: &S,
) -> Result<LayerChunk<T>, GnnError> {
    let mut out = Matrix::zeros(iv.len(), width);
    for (r, i) in iv.range().enumerate() {
        let v = p.owned()[i];
        let acc = out.row_mut(r);
        accumulate(
            acc,
            T::of_f64(p.self_coefficient(i)),
            fetch(source, v, width)?,
        );
        let (src, coef) = p.in_edges(i);
        for (&u, &c) in src.iter().zip(coef) {
            accumulate(acc, T::of_f64(c), fetch(source, u, width)?);
        }
    }
    Ok(LayerChunk {
        interval: iv.id,
        layer,
        epoch,
        kind: ChunkKind::Gathered,
        matrix: out,
    })
}

/// Backward Gather: row `u` is `self(u)·δ[u] + Σ_{u→v} coef(u→v)·δ[v]`,
/// i.e. the interval's rows of `Âᵀδ`, walking out-edges.
pub fn backward_gather<T: Scalar, S: RowSource<T> + ?Sized>(
    p: &Partition,
    iv: &VertexInterval,
    layer: usize,
    epoch: u32,
    width: usize,
    source: &S,
) -> Result<LayerChunk<T>, GnnError> {
    let mut out = Matrix::zeros(iv.len(), width);
    for (r, i) in iv.range().enumerate() {
        let u = p.owned()[i];
        let acc = out.row_mut(r);
        accumulate(
            acc,
            T::of_f64(p.self_coefficient(i)),
            fetch(source, u, width)?,
        );
        let (dst, coef) = p.out_edges(i);
        for (&v, &c) in dst.iter().zip(coef) {
            accumulate(acc, T::of_f64(c), fetch(source, v, width)?);
        }
    }
    Ok(LayerChunk {
        interval: iv.id,
        layer,
        epoch,
        kind: ChunkKind::Gradient,
        matrix: out,
    })
}

fn fetch<T: Scalar, S: RowSource<T> + ?Sized>(
    source: &S,
    v: VertexId,
    width: usize,
) -> Result<&[T], GnnError> {
    match source.row(v) {
        Some(r) if r.len() == width => Ok(r),
        _ => Err(GnnError::MissingValue { vertex: v }),
    }
}

fn accumulate<T: Scalar>(acc: &mut [T], c: T, row: &[T]) {
    for (a, &x) in acc.iter_mut().zip(row) {
        *a = *a + c * x;
    }
}

/// ApplyVertex: `σ(chunk·W)` on hidden layers, raw logits on the last one.
///
/// Pins `weight_version` for the chunk's (interval, epoch) and records the
/// forward context for the backward pass.
pub fn apply_vertex<T: Scalar>(
    chunk: &LayerChunk<T>,
    weights: &Matrix<T>,
    weight_version: u64,
    last_layer: bool,
    contexts: &mut ContextStore<T>,
) -> Result<LayerChunk<T>, GnnError> {
    contexts.pin(chunk.interval, chunk.epoch, weight_version)?;
    let pre = matmul(&chunk.matrix, weights)?;
    let out = if last_layer { pre.clone() } else { relu(&pre) };
    let pre_activation = (!contexts.rematerialize).then_some(pre);
    contexts.contexts.insert(
        (chunk.interval, chunk.layer, chunk.epoch),
        StashedContext {
            weight_version,
            gathered: chunk.matrix.clone(),
            pre_activation,
        },
    );
    Ok(LayerChunk {
        interval: chunk.interval,
        layer: chunk.layer,
        epoch: chunk.epoch,
        kind: ChunkKind::Activated,
        matrix: out,
    })
}

/// ApplyEdge for GCN is the identity.
pub fn apply_edge<T: Scalar>(chunk: LayerChunk<T>) -> LayerChunk<T> {
    chunk
}

/// Loss gradient of an interval's logits, normalised by the global mask size.
pub fn output_gradient<T: Scalar>(
    logits: &LayerChunk<T>,
    classes: &[u32],
    mask: &[bool],
    normalizer: usize,
) -> Result<LossOutput<T>, GnnError> {
    Ok(masked_cross_entropy(
        &logits.matrix,
        classes,
        mask,
        normalizer,
    )?)
}

/// ∇ApplyVertex: returns the interval's `∇W_ℓ = (ÂH)ᵀ·δ_post` and, when
/// requested, the downstream `δ_post·W_ℓᵀ`, with `δ_post = σ′(in_ℓ)⊙δ` on
/// hidden layers and `δ` on the output layer. Consumes the stashed context.
#[allow(clippy::too_many_arguments)]
pub fn grad_apply_vertex<T: Scalar>(
    contexts: &mut ContextStore<T>,
    interval: usize,
    layer: usize,
    epoch: u32,
    upstream: &Matrix<T>,
    weights: &Matrix<T>,
    weight_version: u64,
    last_layer: bool,
    want_downstream: bool,
) -> Result<(Matrix<T>, Option<Matrix<T>>), GnnError> {
    let ctx = contexts
        .contexts
        .get(&(interval, layer, epoch))
        .ok_or(GnnError::StashMissing {
            interval,
            layer,
            epoch,
        })?;
    if ctx.weight_version != weight_version {
        return Err(GnnError::VersionMismatch {
            interval,
            epoch,
            stashed: ctx.weight_version,
            got: weight_version,
        });
    }
    let post = if last_layer {
        upstream.clone()
    } else {
        let recomputed;
        let pre = match &ctx.pre_activation {
            Some(pre) => pre,
            None => {
                recomputed = matmul(&ctx.gathered, weights)?;
                &recomputed
            }
        };
        relu_backward(pre, upstream)?
    };
    let grad_w = ctx.gathered.matmul_tn(&post)?;
    let downstream = if want_downstream {
        Some(post.matmul_nt(weights)?)
    } else {
        None
    };
    contexts.contexts.remove(&(interval, layer, epoch));
    Ok((grad_w, downstream))
}

/// Scatter: one message per remote partition that needs any of the
/// interval's rows, carrying them in send-list order.
pub fn scatter<T: Scalar>(
    chunk: &LayerChunk<T>,
    p: &Partition,
    iv: &VertexInterval,
    direction: Direction,
) -> Result<Vec<GhostMessage<T>>, GnnError> {
    if chunk.matrix.rows() != iv.len() {
        return Err(GnnError::PlanMismatch {
            rows: chunk.matrix.rows(),
            expected: iv.len(),
        });
    }
    let mut out = Vec::new();
    for q in 0..p.num_partitions() {
        if q == p.id() {
            continue;
        }
        let list = match direction {
            Direction::Forward => p.forward_send(q),
            Direction::Backward => p.backward_send(q),
        };
        let vertices: Vec<VertexId> = list
            .iter()
            .copied()
            .filter(|&v| p.local_index(v).is_some_and(|i| iv.range().contains(&i)))
            .collect();
        if vertices.is_empty() {
            continue;
        }
        let cols = chunk.matrix.cols();
        let mut data = Vec::with_capacity(vertices.len() * cols);
        for &v in &vertices {
            let r = p.local_index(v).unwrap() - iv.start;
            data.extend_from_slice(chunk.matrix.row(r));
        }
        out.push(GhostMessage {
            from: p.id(),
            to: q,
            interval: chunk.interval,
            layer: chunk.layer,
            epoch: chunk.epoch,
            direction,
            rows: Matrix::from_vec(vertices.len(), cols, data)?,
            vertices,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::dense_oracle_forward;
    use crate::graph::{build_graph, partition_graph, split_intervals, symmetrize, Graph};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p2() -> (Graph, Partition) {
        let g = build_graph(&symmetrize(&[(0, 1)]).unwrap(), 2).unwrap();
        let p = partition_graph(&g, &[0, 0]).unwrap().remove(0);
        (g, p)
    }

    fn whole(p: &Partition) -> VertexInterval {
        VertexInterval {
            id: 0,
            start: 0,
            end: p.len(),
        }
    }

    fn random_graph(n: usize, m: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::new();
        while pairs.len() < m {
            let (u, v) = (rng.random_range(0..n as u32), rng.random_range(0..n as u32));
            if u != v {
                pairs.push((u, v));
            }
        }
        build_graph(&symmetrize(&pairs).unwrap(), n).unwrap()
    }

    fn random_matrix(r: usize, c: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Gathers every interval of every partition and reassembles by global id.
    fn gather_all(
        g: &Graph,
        h: &Matrix<f64>,
        parts: usize,
        k: usize,
        backward: bool,
    ) -> Matrix<f64> {
        let assignment: Vec<usize> = (0..g.num_vertices()).map(|v| (v * 7 + 3) % parts).collect();
        let mut out = Matrix::zeros(g.num_vertices(), h.cols());
        for mut p in partition_graph(g, &assignment).unwrap() {
            for iv in split_intervals(&mut p, k).unwrap() {
                let chunk = if backward {
                    backward_gather(&p, &iv, 0, 0, h.cols(), &DenseRows(h)).unwrap()
                } else {
                    gather(&p, &iv, 0, 0, h.cols(), &DenseRows(h)).unwrap()
                };
                for (r, i) in iv.range().enumerate() {
                    out.row_mut(p.owned()[i] as usize)
                        .copy_from_slice(chunk.matrix.row(r));
                }
            }
        }
        out
    }

    #[test]
    fn p2_gather_of_identity() {
        let (_, p) = p2();
        let h = Matrix::<f64>::identity(2);
        let c = gather(&p, &whole(&p), 0, 0, 2, &DenseRows(&h)).unwrap();
        assert_eq!(
            c.matrix,
            Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap()
        );
        let b = backward_gather(&p, &whole(&p), 0, 0, 2, &DenseRows(&h)).unwrap();
        assert_eq!(b.matrix, c.matrix);
    }

    #[test]
    fn triangle_rows_are_stochastic() {
        let g = build_graph(&symmetrize(&[(0, 1), (1, 2), (0, 2)]).unwrap(), 3).unwrap();
        let p = partition_graph(&g, &[0, 0, 0]).unwrap().remove(0);
        let ones = Matrix::<f64>::from_fn(3, 1, |_, _| 1.0);
        let c = gather(&p, &whole(&p), 0, 0, 1, &DenseRows(&ones)).unwrap();
        for &v in c.matrix.data() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gather_matches_dense_product() {
        let g = random_graph(30, 60, 5);
        let a = g.dense_normalized_adjacency(100).unwrap();
        let h = random_matrix(30, 4, 6);
        let dense = matmul(&a, &h).unwrap();
        assert!(gather_all(&g, &h, 3, 2, false).relative_error(&dense) <= 1e-5);
        let dense_t = matmul(&a.transpose(), &h).unwrap();
        assert!(gather_all(&g, &h, 3, 2, true).relative_error(&dense_t) <= 1e-5);
    }

    #[test]
    fn backward_gather_respects_direction() {
        // directed 0→1→2: Âᵀ differs from Â
        let g = build_graph(&[(0, 1), (1, 2)], 3).unwrap();
        let a = g.dense_normalized_adjacency(10).unwrap();
        let d = random_matrix(3, 2, 1);
        let got = gather_all(&g, &d, 2, 1, true);
        assert!(got.relative_error(&matmul(&a.transpose(), &d).unwrap()) < 1e-12);
        assert!(got.relative_error(&matmul(&a, &d).unwrap()) > 1e-3);
    }

    #[test]
    fn zero_delta_gives_zero() {
        let g = random_graph(12, 20, 2);
        let z = Matrix::<f64>::zeros(12, 3);
        assert_eq!(gather_all(&g, &z, 2, 2, true), z);
    }

    #[test]
    fn missing_ghost_is_an_error() {
        let (_, p) = p2();
        let short = Matrix::<f64>::zeros(1, 2);
        let err = gather(&p, &whole(&p), 0, 0, 2, &DenseRows(&short)).unwrap_err();
        assert_eq!(err, GnnError::MissingValue { vertex: 1 });
    }

    #[test]
    fn apply_vertex_examples() {
        let mut ctx = ContextStore::new(false);
        let chunk = LayerChunk {
            interval: 0,
            layer: 0,
            epoch: 0,
            kind: ChunkKind::Gathered,
            matrix: Matrix::<f64>::from_rows(&[[1.0, -1.0]]).unwrap(),
        };
        let out = apply_vertex(&chunk, &Matrix::identity(2), 1, false, &mut ctx).unwrap();
        assert_eq!(out.matrix, Matrix::from_rows(&[[1.0, 0.0]]).unwrap());
        assert_eq!(
            ctx.get(0, 0, 0).unwrap().pre_activation.as_ref().unwrap(),
            &chunk.matrix
        );

        // R1 by hand on P2 with X = I, W = [[1],[1]]
        let (_, p) = p2();
        let x = Matrix::<f64>::identity(2);
        let g = gather(&p, &whole(&p), 0, 0, 2, &DenseRows(&x)).unwrap();
        let w = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let mut ctx = ContextStore::new(true);
        let h = apply_vertex(&g, &w, 1, false, &mut ctx).unwrap();
        assert_eq!(h.matrix, Matrix::from_rows(&[[1.0], [1.0]]).unwrap());
        assert!(ctx.get(0, 0, 0).unwrap().pre_activation.is_none());

        let zero = apply_vertex(
            &g,
            &Matrix::zeros(2, 3),
            1,
            false,
            &mut ContextStore::new(false),
        )
        .unwrap();
        assert_eq!(zero.matrix, Matrix::zeros(2, 3));
    }

    #[test]
    fn version_pin_rejects_other_versions() {
        let mut ctx = ContextStore::new(false);
        let mut chunk = LayerChunk {
            interval: 3,
            layer: 0,
            epoch: 2,
            kind: ChunkKind::Gathered,
            matrix: Matrix::<f32>::zeros(1, 2),
        };
        apply_vertex(&chunk, &Matrix::identity(2), 7, false, &mut ctx).unwrap();
        chunk.layer = 1;
        let err = apply_vertex(&chunk, &Matrix::identity(2), 9, true, &mut ctx).unwrap_err();
        assert!(matches!(
            err,
            GnnError::VersionMismatch {
                stashed: 7,
                got: 9,
                ..
            }
        ));
        let err = grad_apply_vertex(
            &mut ctx,
            3,
            0,
            2,
            &Matrix::zeros(1, 2),
            &Matrix::identity(2),
            8,
            false,
            true,
        )
        .unwrap_err();
        assert!(matches!(err, GnnError::VersionMismatch { .. }));
        assert!(matches!(
            grad_apply_vertex(
                &mut ctx,
                4,
                0,
                2,
                &Matrix::zeros(1, 2),
                &Matrix::identity(2),
                7,
                false,
                true
            ),
            Err(GnnError::StashMissing { interval: 4, .. })
        ));
    }

    #[test]
    fn zero_delta_gives_zero_gradients() {
        let mut ctx = ContextStore::new(false);
        let chunk = LayerChunk {
            interval: 0,
            layer: 0,
            epoch: 0,
            kind: ChunkKind::Gathered,
            matrix: random_matrix(3, 4, 2),
        };
        let w = random_matrix(4, 2, 3);
        apply_vertex(&chunk, &w, 0, false, &mut ctx).unwrap();
        let (gw, down) =
            grad_apply_vertex(&mut ctx, 0, 0, 0, &Matrix::zeros(3, 2), &w, 0, false, true).unwrap();
        assert_eq!(gw, Matrix::zeros(4, 2));
        assert_eq!(down.unwrap(), Matrix::zeros(3, 4));
        assert!(ctx.is_empty());
    }

    #[test]
    fn remat_gives_identical_gradients() {
        let chunk = LayerChunk {
            interval: 0,
            layer: 0,
            epoch: 0,
            kind: ChunkKind::Gathered,
            matrix: random_matrix(5, 4, 8).cast::<f32>(),
        };
        let w = random_matrix(4, 3, 9).cast::<f32>();
        let up = random_matrix(5, 3, 10).cast::<f32>();
        let run = |remat| {
            let mut ctx = ContextStore::new(remat);
            apply_vertex(&chunk, &w, 0, false, &mut ctx).unwrap();
            grad_apply_vertex(&mut ctx, 0, 0, 0, &up, &w, 0, false, true).unwrap()
        };
        assert_eq!(run(true), run(false));
    }

    #[test]
    fn p2_two_layer_gradient_matches_finite_differences() {
        let (g, p) = p2();
        let x = Matrix::<f64>::from_rows(&[[1.0, 0.3], [-0.4, 0.8]]).unwrap();
        let w0 = Matrix::from_rows(&[[0.5, -0.2, 0.1], [0.3, 0.7, -0.6]]).unwrap();
        let w1 = Matrix::from_rows(&[[0.2, -0.5], [0.4, 0.1], [-0.3, 0.6]]).unwrap();
        let classes = [0u32, 1];
        let mask = [true, true];
        let iv = whole(&p);

        let kernel_grad = |w0: &Matrix<f64>, w1: &Matrix<f64>| {
            let mut ctx = ContextStore::new(false);
            let g0 = gather(&p, &iv, 0, 0, 2, &DenseRows(&x)).unwrap();
            let h1 = apply_vertex(&g0, w0, 0, false, &mut ctx).unwrap();
            let g1 = gather(&p, &iv, 1, 0, 3, &DenseRows(&h1.matrix)).unwrap();
            let z = apply_vertex(&g1, w1, 0, true, &mut ctx).unwrap();
            let loss = output_gradient(&z, &classes, &mask, 2).unwrap();
            let (_, d1) =
                grad_apply_vertex(&mut ctx, 0, 1, 0, &loss.grad, w1, 0, true, true).unwrap();
            let up = backward_gather(&p, &iv, 1, 0, 3, &DenseRows(&d1.unwrap())).unwrap();
            let (gw0, _) =
                grad_apply_vertex(&mut ctx, 0, 0, 0, &up.matrix, w0, 0, false, false).unwrap();
            (loss.loss, gw0)
        };
        let (_, analytic) = kernel_grad(&w0, &w1);

        let loss_at = |w0: &Matrix<f64>| {
            let f = dense_oracle_forward(&g, &x, &[w0.clone(), w1.clone()]).unwrap();
            masked_cross_entropy(f.logits(), &classes, &mask, 2)
                .unwrap()
                .loss
        };
        let h = 1e-5;
        let mut numeric = Matrix::zeros(2, 3);
        for i in 0..2 {
            for j in 0..3 {
                let mut plus = w0.clone();
                plus.set(i, j, w0.get(i, j) + h);
                let mut minus = w0.clone();
                minus.set(i, j, w0.get(i, j) - h);
                numeric.set(i, j, (loss_at(&plus) - loss_at(&minus)) / (2.0 * h));
            }
        }
        assert!(
            analytic.relative_error(&numeric) <= 1e-6,
            "{}",
            analytic.relative_error(&numeric)
        );
    }

    #[test]
    fn scatter_follows_the_plan() {
        let g = build_graph(&symmetrize(&[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap(), 4).unwrap();
        let parts = partition_graph(&g, &[0, 0, 1, 1]).unwrap();
        let iv = whole(&parts[0]);
        let chunk = LayerChunk {
            interval: 0,
            layer: 1,
            epoch: 0,
            kind: ChunkKind::Activated,
            matrix: Matrix::<f32>::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap(),
        };
        let msgs = scatter(&chunk, &parts[0], &iv, Direction::Forward).unwrap();
        assert_eq!(msgs.len(), 1);
        assert_eq!(msgs[0].to, 1);
        assert_eq!(msgs[0].vertices, [0, 1]);
        assert_eq!(msgs[0].rows, chunk.matrix);
        assert_eq!(msgs[0].rows.byte_len(), 2 * 3 * 4);

        let single = partition_graph(&g, &[0; 4]).unwrap();
        let iv = whole(&single[0]);
        let chunk = LayerChunk {
            matrix: Matrix::<f32>::zeros(4, 3),
            ..chunk
        };
        assert!(scatter(&chunk, &single[0], &iv, Direction::Forward)
            .unwrap()
            .is_empty());
        let bad = LayerChunk {
            matrix: Matrix::<f32>::zeros(3, 3),
            ..chunk
        };
        assert!(matches!(
            scatter(&bad, &single[0], &iv, Direction::Forward),
            Err(GnnError::PlanMismatch { .. })
        ));
    }

    #[test]
    fn apply_edge_is_identity() {
        let c = LayerChunk {
            interval: 1,
            layer: 0,
            epoch: 4,
            kind: ChunkKind::Scattered,
            matrix: random_matrix(2, 2, 4),
        };
        assert_eq!(apply_edge(c.clone()), c);
        let _ = vec![0u8];
    }
}
