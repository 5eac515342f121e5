use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{GraphError, VertexId};
use crate::tensor::Matrix;

/// Directed graph with both adjacency directions and per-edge `Â`
/// coefficients.
///
/// `in_*` arrays list, for each vertex, the sources of its in-edges (what a
/// Gather reads); `out_*` arrays list the targets of its out-edges (the
/// reverse adjacency used when gradients flow backwards). Neighbour lists are
/// sorted by vertex id.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_vertices: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<VertexId>,
    out_norm: Vec<f64>,
    in_offsets: Vec<usize>,
    in_sources: Vec<VertexId>,
    in_norm: Vec<f64>,
    self_norm: Vec<f64>,
}

/// Builds CSR and reverse CSR from directed edges.
pub fn build_graph(
    edges: &[(VertexId, VertexId)],
    num_vertices: usize,
) -> Result<Graph, GraphError> {
    Graph::build(edges, num_vertices)
}

/// Expands undirected pairs into both directions, dropping repeats.
pub fn symmetrize(edges: &[(VertexId, VertexId)]) -> Result<Vec<(VertexId, VertexId)>, GraphError> {
    let mut out = Vec::with_capacity(edges.len() * 2);
    for &(u, v) in edges {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        out.push((u, v));
        out.push((v, u));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn offsets_from_counts(counts: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    offsets.push(0);
    let mut acc = 0;
    for &c in counts {
        acc += c;
        offsets.push(acc);
    }
    offsets
}

impl Graph {
    pub fn build(edges: &[(VertexId, VertexId)], num_vertices: usize) -> Result<Self, GraphError> {
        for &(u, v) in edges {
            for x in [u, v] {
                if x as usize >= num_vertices {
                    return Err(GraphError::VertexOutOfRange {
                        vertex: x as u64,
                        num_vertices,
                    });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
        }
        let mut sorted = edges.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }

        let mut out_count = vec![0usize; num_vertices];
        let mut in_count = vec![0usize; num_vertices];
        for &(u, v) in &sorted {
            out_count[u as usize] += 1;
            in_count[v as usize] += 1;
        }
        let out_offsets = offsets_from_counts(&out_count);
        let in_offsets = offsets_from_counts(&in_count);

        // sorted by (u, v): out lists come out ordered by target
        let out_targets: Vec<VertexId> = sorted.iter().map(|&(_, v)| v).collect();
        let mut by_target = sorted.clone();
        by_target.sort_unstable_by_key(|&(u, v)| (v, u));
        let in_sources: Vec<VertexId> = by_target.iter().map(|&(u, _)| u).collect();

        let deg: Vec<f64> = in_count.iter().map(|&d| (d + 1) as f64).collect();
        let norm = |u: VertexId, v: VertexId| 1.0 / libm::sqrt(deg[u as usize] * deg[v as usize]);
        let out_norm = sorted.iter().map(|&(u, v)| norm(u, v)).collect();
        let in_norm = by_target.iter().map(|&(u, v)| norm(u, v)).collect();
        let self_norm = deg.iter().map(|d| 1.0 / d).collect();

        Ok(Self {
            num_vertices,
            out_offsets,
            out_targets,
            out_norm,
            in_offsets,
            in_sources,
            in_norm,
            self_norm,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.out_targets.len()
    }

    pub fn out_offsets(&self) -> &[usize] {
        &self.out_offsets
    }

    pub fn in_offsets(&self) -> &[usize] {
        &self.in_offsets
    }

    /// Targets of `v`'s out-edges and their coefficients.
    pub fn out_neighbors(&self, v: VertexId) -> (&[VertexId], &[f64]) {
        let r = self.out_offsets[v as usize]..self.out_offsets[v as usize + 1];
        (&self.out_targets[r.clone()], &self.out_norm[r])
    }

    /// Sources of `v`'s in-edges and their coefficients.
    pub fn in_neighbors(&self, v: VertexId) -> (&[VertexId], &[f64]) {
        let r = self.in_offsets[v as usize]..self.in_offsets[v as usize + 1];
        (&self.in_sources[r.clone()], &self.in_norm[r])
    }

    pub fn in_degree(&self, v: VertexId) -> usize {
        self.in_offsets[v as usize + 1] - self.in_offsets[v as usize]
    }

    pub fn self_coefficient(&self, v: VertexId) -> f64 {
        self.self_norm[v as usize]
    }

    /// Coefficient of `u→v`, if the edge exists.
    pub fn edge_coefficient(&self, u: VertexId, v: VertexId) -> Option<f64> {
        let (targets, norms) = self.out_neighbors(u);
        targets.binary_search(&v).ok().map(|i| norms[i])
    }

    /// All directed edges in (source, target) order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        (0..self.num_vertices).flat_map(move |u| {
            self.out_neighbors(u as VertexId)
                .0
                .iter()
                .map(move |&v| (u as VertexId, v))
        })
    }

    /// Dense `Â` with `Â[v][u] = coefficient(u→v)`; refuses beyond `limit`
    /// vertices.
    pub fn dense_normalized_adjacency(&self, limit: usize) -> Result<Matrix<f64>, GraphError> {
        let n = self.num_vertices;
        if n > limit {
            return Err(GraphError::TooLargeToDensify(n));
        }
        let mut a = Matrix::zeros(n, n);
        for v in 0..n {
            a.set(v, v, self.self_norm[v]);
            let (src, coef) = self.in_neighbors(v as VertexId);
            for (&u, &c) in src.iter().zip(coef) {
                a.set(v, u as usize, c);
            }
        }
        Ok(a)
    }

    /// Hop distance from `source` along out-edges (`None` if unreachable).
    pub fn hop_distances(&self, source: VertexId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.num_vertices];
        let mut queue = VecDeque::new();
        dist[source as usize] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize].unwrap();
            for &v in self.out_neighbors(u).0 {
                if dist[v as usize].is_none() {
                    dist[v as usize] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}
