use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::{Graph, GraphError, PartitionId, VertexId};

const NOT_LOCAL: u32 = u32::MAX;

/// One graph server's share of the graph.
///
/// Local vertex `i` is `owned()[i]`. Neighbour lists refer to global ids, so
/// a neighbour is either local (see [`Partition::local_index`]) or a ghost
/// owned by another partition.
///
/// The ghost inventory has four lists per remote partition `q`:
///
/// - `forward_send(q)`: owned vertices with an out-edge into `q`
/// - `forward_recv(q)`: `q`'s vertices with an out-edge into this partition
/// - `backward_send(q)`: owned vertices with an in-edge from `q`
/// - `backward_recv(q)`: `q`'s vertices with an in-edge from this partition
///
/// Each list is sorted by global id, and `p.forward_send(q) == q.forward_recv(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    id: PartitionId,
    owned: Vec<VertexId>,
    local_of: Vec<u32>,
    in_offsets: Vec<usize>,
    in_sources: Vec<VertexId>,
    in_norm: Vec<f64>,
    out_offsets: Vec<usize>,
    out_targets: Vec<VertexId>,
    out_norm: Vec<f64>,
    self_norm: Vec<f64>,
    forward_send: Vec<Vec<VertexId>>,
    forward_recv: Vec<Vec<VertexId>>,
    backward_send: Vec<Vec<VertexId>>,
    backward_recv: Vec<Vec<VertexId>>,
}

/// `assignment[v] = v mod parts`.
pub fn round_robin_assignment(num_vertices: usize, parts: usize) -> Vec<PartitionId> {
    (0..num_vertices).map(|v| v % parts.max(1)).collect()
}

/// Parses a parts file: one decimal partition id per line, line `i` for
/// vertex `i`.
pub fn parse_assignment(text: &str, num_vertices: usize) -> Result<Vec<PartitionId>, GraphError> {
    let mut out = Vec::with_capacity(num_vertices);
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_end_matches('\r');
        let id = t
            .parse::<usize>()
            .map_err(|_| GraphError::BadAssignmentLine {
                line: i + 1,
                text: t.to_string(),
            })?;
        out.push(id);
    }
    if out.len() != num_vertices {
        return Err(GraphError::AssignmentLength {
            expected: num_vertices,
            actual: out.len(),
        });
    }
    Ok(out)
}

/// Splits `g` by an external vertex→partition assignment.
pub fn partition_graph(
    g: &Graph,
    assignment: &[PartitionId],
) -> Result<Vec<Partition>, GraphError> {
    let n = g.num_vertices();
    if assignment.len() != n {
        return Err(GraphError::AssignmentLength {
            expected: n,
            actual: assignment.len(),
        });
    }
    if n == 0 {
        return Err(GraphError::EmptyPartition(0));
    }
    let parts = assignment.iter().max().map_or(0, |m| m + 1);
    let mut owned = vec![Vec::new(); parts];
    for (v, &p) in assignment.iter().enumerate() {
        owned[p].push(v as VertexId);
    }
    if let Some(p) = owned.iter().position(Vec::is_empty) {
        return Err(GraphError::NonDensePartitionIds(p));
    }

    let mut out = Vec::with_capacity(parts);
    for (p, owned) in owned.into_iter().enumerate() {
        if owned.is_empty() {
            return Err(GraphError::EmptyPartition(p));
        }
        let mut local_of = vec![NOT_LOCAL; n];
        for (i, &v) in owned.iter().enumerate() {
            local_of[v as usize] = i as u32;
        }
        let mut part = Partition {
            id: p,
            owned,
            local_of,
            in_offsets: Vec::new(),
            in_sources: Vec::new(),
            in_norm: Vec::new(),
            out_offsets: Vec::new(),
            out_targets: Vec::new(),
            out_norm: Vec::new(),
            self_norm: Vec::new(),
            forward_send: vec![Vec::new(); parts],
            forward_recv: vec![Vec::new(); parts],
            backward_send: vec![Vec::new(); parts],
            backward_recv: vec![Vec::new(); parts],
        };
        part.fill_adjacency(g);

        for &u in &part.owned {
            for &v in g.out_neighbors(u).0 {
                let q = assignment[v as usize];
                if q != p {
                    part.forward_send[q].push(u);
                    part.backward_recv[q].push(v);
                }
            }
            for &w in g.in_neighbors(u).0 {
                let q = assignment[w as usize];
                if q != p {
                    part.forward_recv[q].push(w);
                    part.backward_send[q].push(u);
                }
            }
        }
        for lists in [
            &mut part.forward_send,
            &mut part.forward_recv,
            &mut part.backward_send,
            &mut part.backward_recv,
        ] {
            for l in lists.iter_mut() {
                l.sort_unstable();
                l.dedup();
            }
        }
        out.push(part);
    }
    Ok(out)
}

impl Partition {
    fn fill_adjacency(&mut self, g: &Graph) {
        let mut in_offsets = vec![0];
        let mut out_offsets = vec![0];
        let (mut in_sources, mut in_norm, mut out_targets, mut out_norm) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &v in &self.owned {
            let (s, c) = g.in_neighbors(v);
            in_sources.extend_from_slice(s);
            in_norm.extend_from_slice(c);
            in_offsets.push(in_sources.len());
            let (t, c) = g.out_neighbors(v);
            out_targets.extend_from_slice(t);
            out_norm.extend_from_slice(c);
            out_offsets.push(out_targets.len());
        }
        self.self_norm = self.owned.iter().map(|&v| g.self_coefficient(v)).collect();
        self.in_offsets = in_offsets;
        self.in_sources = in_sources;
        self.in_norm = in_norm;
        self.out_offsets = out_offsets;
        self.out_targets = out_targets;
        self.out_norm = out_norm;
    }

    pub fn id(&self) -> PartitionId {
        self.id
    }

    pub fn num_partitions(&self) -> usize {
        self.forward_send.len()
    }

    pub fn owned(&self) -> &[VertexId] {
        &self.owned
    }

    pub fn len(&self) -> usize {
        self.owned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owned.is_empty()
    }

    pub fn local_index(&self, v: VertexId) -> Option<usize> {
        match self.local_of.get(v as usize) {
            Some(&i) if i != NOT_LOCAL => Some(i as usize),
            _ => None,
        }
    }

    pub fn owns(&self, v: VertexId) -> bool {
        self.local_index(v).is_some()
    }

    /// In-edges of local vertex `i` as (global sources, coefficients).
    pub fn in_edges(&self, i: usize) -> (&[VertexId], &[f64]) {
        let r = self.in_offsets[i]..self.in_offsets[i + 1];
        (&self.in_sources[r.clone()], &self.in_norm[r])
    }

    /// Out-edges of local vertex `i` as (global targets, coefficients).
    pub fn out_edges(&self, i: usize) -> (&[VertexId], &[f64]) {
        let r = self.out_offsets[i]..self.out_offsets[i + 1];
        (&self.out_targets[r.clone()], &self.out_norm[r])
    }

    pub fn self_coefficient(&self, i: usize) -> f64 {
        self.self_norm[i]
    }

    /// Number of in-edges over a local range.
    pub fn in_edge_count(&self, range: Range<usize>) -> usize {
        self.in_offsets[range.end] - self.in_offsets[range.start]
    }

    pub fn out_edge_count(&self, range: Range<usize>) -> usize {
        self.out_offsets[range.end] - self.out_offsets[range.start]
    }

    pub fn forward_send(&self, q: PartitionId) -> &[VertexId] {
        &self.forward_send[q]
    }

    pub fn forward_recv(&self, q: PartitionId) -> &[VertexId] {
        &self.forward_recv[q]
    }

    pub fn backward_send(&self, q: PartitionId) -> &[VertexId] {
        &self.backward_send[q]
    }

    pub fn backward_recv(&self, q: PartitionId) -> &[VertexId] {
        &self.backward_recv[q]
    }

    /// Ghost vertices this partition reads during forward Gathers.
    pub fn ghosts_in(&self) -> Vec<VertexId> {
        let mut all: Vec<VertexId> = self.forward_recv.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Re-orders the owned vertices; `order` must be a permutation of them.
    pub(crate) fn reorder(&mut self, order: Vec<VertexId>) {
        debug_assert_eq!(order.len(), self.owned.len());
        let old_local: Vec<usize> = order
            .iter()
            .map(|&v| self.local_index(v).expect("owned"))
            .collect();
        let mut in_offsets = vec![0];
        let mut out_offsets = vec![0];
        let (mut in_sources, mut in_norm, mut out_targets, mut out_norm) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &i in &old_local {
            let (s, c) = self.in_edges(i);
            in_sources.extend_from_slice(s);
            in_norm.extend_from_slice(c);
            in_offsets.push(in_sources.len());
            let (t, c) = self.out_edges(i);
            out_targets.extend_from_slice(t);
            out_norm.extend_from_slice(c);
            out_offsets.push(out_targets.len());
        }
        self.self_norm = old_local.iter().map(|&i| self.self_norm[i]).collect();
        for (i, &v) in order.iter().enumerate() {
            self.local_of[v as usize] = i as u32;
        }
        self.owned = order;
        self.in_offsets = in_offsets;
        self.in_sources = in_sources;
        self.in_norm = in_norm;
        self.out_offsets = out_offsets;
        self.out_targets = out_targets;
        self.out_norm = out_norm;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, symmetrize};
    use alloc::collections::BTreeSet;
    use proptest::prelude::*;

    fn cycle4() -> Graph {
        build_graph(&symmetrize(&[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap(), 4).unwrap()
    }

    #[test]
    fn four_cycle_cut() {
        let g = cycle4();
        let parts = partition_graph(&g, &[0, 0, 1, 1]).unwrap();
        let cross = g
            .edges()
            .filter(|&(u, v)| parts[0].owns(u) != parts[0].owns(v))
            .count();
        assert_eq!(cross, 4);
        assert_eq!(parts[0].ghosts_in(), [2, 3]);
        assert_eq!(parts[0].forward_send(1), [0, 1]);
        assert_eq!(parts[1].forward_recv(0), [0, 1]);
    }

    #[test]
    fn single_partition_has_no_ghosts() {
        let g = cycle4();
        let parts = partition_graph(&g, &[0; 4]).unwrap();
        assert_eq!(parts.len(), 1);
        assert!(parts[0].ghosts_in().is_empty());
        for v in 0..4u32 {
            let i = parts[0].local_index(v).unwrap();
            assert_eq!(parts[0].in_edges(i).0, g.in_neighbors(v).0);
            assert_eq!(parts[0].out_edges(i).0, g.out_neighbors(v).0);
        }
    }

    #[test]
    fn two_clique_split() {
        let g = build_graph(&symmetrize(&[(0, 1)]).unwrap(), 2).unwrap();
        let parts = partition_graph(&g, &[0, 1]).unwrap();
        assert_eq!(parts[0].forward_send(1), [0]);
        assert_eq!(parts[0].forward_recv(1), [1]);
        assert_eq!(parts[1].forward_send(0), [1]);
        assert_eq!(parts[1].forward_recv(0), [0]);
    }

    #[test]
    fn rejects_bad_assignments() {
        let g = cycle4();
        assert_eq!(
            partition_graph(&g, &[0, 0, 0]).unwrap_err(),
            GraphError::AssignmentLength {
                expected: 4,
                actual: 3
            }
        );
        assert_eq!(
            partition_graph(&g, &[0, 0, 2, 2]).unwrap_err(),
            GraphError::NonDensePartitionIds(1)
        );
    }

    #[test]
    fn parses_parts_text() {
        assert_eq!(parse_assignment("0\n0\n1\n1\n", 4).unwrap(), [0, 0, 1, 1]);
        assert_eq!(parse_assignment("0\n", 1).unwrap(), [0]);
        assert_eq!(
            parse_assignment("0\n0\n1\n", 4).unwrap_err(),
            GraphError::AssignmentLength {
                expected: 4,
                actual: 3
            }
        );
        assert!(matches!(
            parse_assignment("0\nx\n", 2).unwrap_err(),
            GraphError::BadAssignmentLine { line: 2, .. }
        ));
    }

    fn arb_case() -> impl Strategy<Value = (usize, Vec<(u32, u32)>, Vec<usize>)> {
        (3usize..30, 1usize..5).prop_flat_map(|(n, p)| {
            let edges = proptest::collection::vec((0..n as u32, 0..n as u32), 0..80);
            // first p vertices pin every id so assignments are dense
            let rest = proptest::collection::vec(0..p, n - p.min(n));
            (
                Just(n),
                edges,
                rest.prop_map(move |r| (0..p.min(n)).chain(r).collect()),
            )
        })
    }

    proptest! {
        #[test]
        fn partitions_reassemble((n, pairs, assignment) in arb_case()) {
            let mut edges: Vec<_> = pairs.into_iter().filter(|(u, v)| u != v).collect();
            edges.sort_unstable();
            edges.dedup();
            let g = build_graph(&edges, n).unwrap();
            let parts = partition_graph(&g, &assignment).unwrap();

            let mut owners = vec![0usize; n];
            let mut rebuilt = Vec::new();
            for p in &parts {
                for (i, &v) in p.owned().iter().enumerate() {
                    owners[v as usize] += 1;
                    for &w in p.in_edges(i).0 {
                        rebuilt.push((w, v));
                    }
                }
            }
            prop_assert!(owners.iter().all(|&c| c == 1));
            rebuilt.sort_unstable();
            prop_assert_eq!(&rebuilt, &edges);

            let cut_sources: BTreeSet<u32> = edges
                .iter()
                .filter(|&&(u, v)| assignment[u as usize] != assignment[v as usize])
                .map(|&(u, _)| u)
                .collect();
            let mut sent = BTreeSet::new();
            for p in &parts {
                for q in &parts {
                    prop_assert_eq!(p.forward_send(q.id()), q.forward_recv(p.id()));
                    prop_assert_eq!(p.backward_send(q.id()), q.backward_recv(p.id()));
                    sent.extend(p.forward_send(q.id()).iter().copied());
                }
            }
            prop_assert_eq!(sent, cut_sources);
        }
    }
}
