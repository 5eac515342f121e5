use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::{GraphError, Partition};

/// Contiguous range `[start, end)` of a partition's local vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexInterval {
    pub id: usize,
    pub start: usize,
    pub end: usize,
}

impl VertexInterval {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Directed edges between distinct intervals of the same partition.
pub fn inter_interval_edges(p: &Partition, intervals: &[VertexInterval]) -> usize {
    let membership = membership_of(p.len(), intervals);
    (0..p.len())
        .map(|i| {
            p.out_edges(i)
                .0
                .iter()
                .filter_map(|&v| p.local_index(v))
                .filter(|&j| membership[j] != membership[i])
                .count()
        })
        .sum()
}

fn membership_of(n: usize, intervals: &[VertexInterval]) -> Vec<usize> {
    let mut m = vec![0; n];
    for iv in intervals {
        for slot in &mut m[iv.range()] {
            *slot = iv.id;
        }
    }
    m
}

fn equal_cuts(n: usize, k: usize) -> Vec<VertexInterval> {
    let (base, rem) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|id| {
            let len = base + usize::from(id < rem);
            let iv = VertexInterval {
                id,
                start,
                end: start + len,
            };
            start += len;
            iv
        })
        .collect()
}

/// Cut edges incident to any of `vs` (local ids), each edge counted once.
fn incident_cut(p: &Partition, vs: &[usize], membership: &[usize]) -> usize {
    let mut edges = Vec::new();
    for &x in vs {
        for &v in p.out_edges(x).0 {
            if let Some(j) = p.local_index(v) {
                edges.push((x, j));
            }
        }
        for &u in p.in_edges(x).0 {
            if let Some(j) = p.local_index(u) {
                edges.push((j, x));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
        .iter()
        .filter(|&&(a, b)| membership[a] != membership[b])
        .count()
}

fn touches(p: &Partition, x: usize, other: usize, membership: &[usize]) -> bool {
    let hit = |v: &u32| p.local_index(*v).is_some_and(|j| membership[j] == other);
    p.out_edges(x).0.iter().any(hit) || p.in_edges(x).0.iter().any(hit)
}

/// Splits `p` into `k` equal-size intervals.
///
/// Starts from equal contiguous cuts in the current vertex order (larger
/// intervals first when `k` does not divide the vertex count), then makes one
/// pass over the boundaries, swapping vertex pairs across each boundary while
/// a swap strictly reduces the inter-interval edge count. The partition is
/// re-ordered so that every interval is again a contiguous local range.
pub fn split_intervals(p: &mut Partition, k: usize) -> Result<Vec<VertexInterval>, GraphError> {
    let n = p.len();
    if k == 0 || k > n {
        return Err(GraphError::TooManyIntervals {
            vertices: n,
            intervals: k,
        });
    }
    let intervals = equal_cuts(n, k);
    let mut membership = membership_of(n, &intervals);

    for (b, iv) in intervals.iter().enumerate().take(k.saturating_sub(1)) {
        let (a_id, b_id) = (b, b + 1);
        for _ in 0..iv.len() {
            let side = |id: usize, other: usize, membership: &[usize]| -> Vec<usize> {
                (0..n)
                    .filter(|&x| membership[x] == id && touches(p, x, other, membership))
                    .collect()
            };
            let left = side(a_id, b_id, &membership);
            let right = side(b_id, a_id, &membership);
            let mut best: Option<(isize, usize, usize)> = None;
            for &x in &left {
                for &y in &right {
                    let before = incident_cut(p, &[x, y], &membership) as isize;
                    membership[x] = b_id;
                    membership[y] = a_id;
                    let after = incident_cut(p, &[x, y], &membership) as isize;
                    membership[x] = a_id;
                    membership[y] = b_id;
                    let delta = after - before;
                    if delta < 0 && best.is_none_or(|(d, _, _)| delta < d) {
                        best = Some((delta, x, y));
                    }
                }
            }
            match best {
                Some((_, x, y)) => {
                    membership[x] = b_id;
                    membership[y] = a_id;
                }
                None => break,
            }
        }
    }

    let mut order = Vec::with_capacity(n);
    for iv in &intervals {
        order.extend(
            (0..n)
                .filter(|&i| membership[i] == iv.id)
                .map(|i| p.owned()[i]),
        );
    }
    p.reorder(order);
    Ok(intervals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, partition_graph, symmetrize};
    use proptest::prelude::*;

    fn single(edges: &[(u32, u32)], n: usize) -> Partition {
        let g = build_graph(&symmetrize(edges).unwrap(), n).unwrap();
        partition_graph(&g, &vec![0; n]).unwrap().remove(0)
    }

    #[test]
    fn sizes_follow_remainder_rule() {
        let mut p = single(&[], 100);
        let sizes: Vec<_> = split_intervals(&mut p, 4)
            .unwrap()
            .iter()
            .map(|i| i.len())
            .collect();
        assert_eq!(sizes, [25, 25, 25, 25]);
        let mut p = single(&[], 10);
        let sizes: Vec<_> = split_intervals(&mut p, 3)
            .unwrap()
            .iter()
            .map(|i| i.len())
            .collect();
        assert_eq!(sizes, [4, 3, 3]);
    }

    #[test]
    fn path_split_matches_brute_force() {
        let path: Vec<(u32, u32)> = (0..7).map(|i| (i, i + 1)).collect();
        let mut p = single(&path, 8);
        let ivs = split_intervals(&mut p, 2).unwrap();
        let ours = inter_interval_edges(&p, &ivs);
        // every contiguous two-way split of the identity order
        let reference = single(&path, 8);
        let brute = (1..8)
            .map(|cut| {
                let ivs = [
                    VertexInterval {
                        id: 0,
                        start: 0,
                        end: cut,
                    },
                    VertexInterval {
                        id: 1,
                        start: cut,
                        end: 8,
                    },
                ];
                inter_interval_edges(&reference, &ivs)
            })
            .min()
            .unwrap();
        assert_eq!(brute, 2);
        assert_eq!(ours, brute);
    }

    #[test]
    fn swaps_repair_a_bad_order() {
        // two triangles {0,1,4} and {2,3,5}: identity cut at 3 splits both
        let mut p = single(&[(0, 1), (1, 4), (0, 4), (2, 3), (3, 5), (2, 5)], 6);
        let naive = inter_interval_edges(&p, &equal_cuts(6, 2));
        let ivs = split_intervals(&mut p, 2).unwrap();
        assert!(inter_interval_edges(&p, &ivs) < naive);
        assert_eq!(inter_interval_edges(&p, &ivs), 0);
    }

    #[test]
    fn rejects_too_many_intervals() {
        let mut p = single(&[], 3);
        assert!(split_intervals(&mut p, 4).is_err());
        assert!(split_intervals(&mut p, 0).is_err());
    }

    proptest! {
        #[test]
        fn intervals_cover_and_never_worsen(
            n in 2usize..30,
            pairs in proptest::collection::vec((0u32..30, 0u32..30), 0..60),
            k in 1usize..6,
        ) {
            let edges: Vec<_> = pairs.into_iter()
                .filter(|&(u, v)| u != v && (u as usize) < n && (v as usize) < n)
                .collect();
            let k = k.min(n);
            let mut p = single(&edges, n);
            let naive = inter_interval_edges(&p, &equal_cuts(n, k));
            let mut q = p.clone();
            let ivs = split_intervals(&mut p, k).unwrap();
            prop_assert_eq!(ivs.first().unwrap().start, 0);
            prop_assert_eq!(ivs.last().unwrap().end, n);
            prop_assert!(ivs.windows(2).all(|w| w[0].end == w[1].start));
            let (min, max) = ivs.iter().fold((usize::MAX, 0), |(a, b), i| (a.min(i.len()), b.max(i.len())));
            prop_assert!(max - min <= 1);
            prop_assert!(inter_interval_edges(&p, &ivs) <= naive);
            // deterministic
            let again = split_intervals(&mut q, k).unwrap();
            prop_assert_eq!(&again, &ivs);
            prop_assert_eq!(q.owned(), p.owned());
        }
    }
}
