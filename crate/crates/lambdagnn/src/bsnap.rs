//! Binary dataset files.
//!
//! * `graph.bsnap`: `(u32 src, u32 dst)` pairs, each undirected edge once.
//! * `features.bsnap`: `u32 numFeats`, then `numFeats` `f32` per vertex.
//! * `labels.bsnap`: `u32 numLabels`, then one `u32` label per vertex.
//!
//! Everything is little-endian. Loaders reject malformed input; they never
//! truncate or pad.

use std::fs;
use std::path::{Path, PathBuf};

use lambdagnn_core::graph::{build_graph, symmetrize, Graph, VertexId};
use lambdagnn_core::tensor::Matrix;

use crate::IoError;

fn read(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn format(path: &Path, detail: String) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        detail,
    }
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes(b[i..i + 4].try_into().unwrap())
}

pub fn parse_edges(bytes: &[u8], num_vertices: usize) -> Result<Vec<(VertexId, VertexId)>, String> {
    if !bytes.len().is_multiple_of(8) {
        return Err(format!(
            "{} bytes is not a whole number of 8-byte edges",
            bytes.len()
        ));
    }
    let mut edges = Vec::with_capacity(bytes.len() / 8);
    for (k, pair) in bytes.chunks_exact(8).enumerate() {
        let (u, v) = (u32_at(pair, 0), u32_at(pair, 4));
        if u as usize >= num_vertices || v as usize >= num_vertices {
            return Err(format!(
                "edge {k} ({u}, {v}) names a vertex ≥ {num_vertices}"
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn encode_edges(edges: &[(VertexId, VertexId)]) -> Vec<u8> {
    edges
        .iter()
        .flat_map(|&(u, v)| u.to_le_bytes().into_iter().chain(v.to_le_bytes()))
        .collect()
}

pub fn parse_features(bytes: &[u8], num_vertices: usize) -> Result<Matrix<f32>, String> {
    if bytes.len() < 4 {
        return Err(format!(
            "expected a 4-byte header, found {} bytes",
            bytes.len()
        ));
    }
    let f = u32_at(bytes, 0) as usize;
    let expected = num_vertices
        .checked_mul(f)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| format!("{num_vertices} × {f} features overflows"))?;
    let body = &bytes[4..];
    if body.len() != expected {
        return Err(format!(
            "expected {expected} body bytes for {num_vertices} vertices × {f} features, found {}",
            body.len()
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_vec(num_vertices, f, data).map_err(|e| e.to_string())
}

pub fn encode_features(m: &Matrix<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + m.byte_len());
    out.extend((m.cols() as u32).to_le_bytes());
    for x in m.data() {
        out.extend(x.to_le_bytes());
    }
    out
}

/// Labels and the declared class count.
pub fn parse_labels(
    bytes: &[u8],
    num_vertices: Option<usize>,
) -> Result<(Vec<u32>, usize), String> {
    if bytes.len() < 4 || !bytes.len().is_multiple_of(4) {
        return Err(format!(
            "{} bytes is not a header plus whole u32 labels",
            bytes.len()
        ));
    }
    let classes = u32_at(bytes, 0) as usize;
    let labels: Vec<u32> = bytes[4..].chunks_exact(4).map(|c| u32_at(c, 0)).collect();
    if let Some(n) = num_vertices {
        if labels.len() != n {
            return Err(format!(
                "expected {} bytes for {n} labels, found {}",
                4 + 4 * n,
                bytes.len()
            ));
        }
    }
    if let Some((v, l)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= classes)
    {
        return Err(format!(
            "vertex {v} has label {l} but numLabels is {classes}"
        ));
    }
    Ok((labels, classes))
}

pub fn encode_labels(labels: &[u32], classes: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * labels.len());
    out.extend((classes as u32).to_le_bytes());
    for l in labels {
        out.extend(l.to_le_bytes());
    }
    out
}

/// Raw edge pairs as stored.
pub fn load_graph_bsnap(
    path: &Path,
    num_vertices: usize,
) -> Result<Vec<(VertexId, VertexId)>, IoError> {
    parse_edges(&read(path)?, num_vertices).map_err(|d| format(path, d))
}

pub fn load_features_bsnap(path: &Path, num_vertices: usize) -> Result<Matrix<f32>, IoError> {
    parse_features(&read(path)?, num_vertices).map_err(|d| format(path, d))
}

pub fn load_labels_bsnap(
    path: &Path,
    num_vertices: Option<usize>,
) -> Result<(Vec<u32>, usize), IoError> {
    parse_labels(&read(path)?, num_vertices).map_err(|d| format(path, d))
}

pub fn write_graph_bsnap(path: &Path, edges: &[(VertexId, VertexId)]) -> Result<(), IoError> {
    write(path, &encode_edges(edges))
}

pub fn write_features_bsnap(path: &Path, m: &Matrix<f32>) -> Result<(), IoError> {
    write(path, &encode_features(m))
}

pub fn write_labels_bsnap(path: &Path, labels: &[u32], classes: usize) -> Result<(), IoError> {
    write(path, &encode_labels(labels, classes))
}

/// `v`'s one-hot row per vertex.
pub fn one_hot(labels: &[u32], classes: usize) -> Matrix<f32> {
    Matrix::from_fn(labels.len(), classes, |i, j| {
        if labels[i] as usize == j {
            1.0
        } else {
            0.0
        }
    })
}

pub fn load_parts(path: &Path, num_vertices: usize) -> Result<Vec<usize>, IoError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| format(path, e.to_string()))?;
    lambdagnn_core::graph::parse_assignment(&text, num_vertices)
        .map_err(|e| format(path, e.to_string()))
}

/// A dataset directory: `graph.bsnap`, `features.bsnap`, `labels.bsnap`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsnapDataset {
    pub graph: Graph,
    pub features: Matrix<f32>,
    pub labels: Vec<u32>,
    pub num_classes: usize,
}

pub fn load_dataset(dir: &Path) -> Result<BsnapDataset, IoError> {
    let at = |name: &str| -> PathBuf { dir.join(name) };
    let (labels, num_classes) = load_labels_bsnap(&at("labels.bsnap"), None)?;
    let n = labels.len();
    let features = load_features_bsnap(&at("features.bsnap"), n)?;
    let gpath = at("graph.bsnap");
    let edges = load_graph_bsnap(&gpath, n)?;
    let both = symmetrize(&edges).map_err(|e| format(&gpath, e.to_string()))?;
    let graph = build_graph(&both, n).map_err(|e| format(&gpath, e.to_string()))?;
    Ok(BsnapDataset {
        graph,
        features,
        labels,
        num_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_pairs() {
        let b = [0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0];
        assert_eq!(parse_edges(&b, 2).unwrap(), vec![(0, 1), (1, 0)]);
        assert!(parse_edges(&[], 0).unwrap().is_empty());
        assert!(parse_edges(&[0; 9], 5).is_err());
        assert!(parse_edges(&b, 1).is_err());
    }

    #[test]
    fn features_2x2() {
        let m = Matrix::from_rows(&[[1.0f32, 2.0], [3.0, 4.0]]).unwrap();
        let b = encode_features(&m);
        assert_eq!(&b[..4], &[2, 0, 0, 0]);
        assert_eq!(parse_features(&b, 2).unwrap(), m);
        let err = parse_features(&b[..b.len() - 1], 2).unwrap_err();
        assert!(
            err.contains("expected 16") && err.contains("found 15"),
            "{err}"
        );
    }

    #[test]
    fn labels_in_range() {
        let b = encode_labels(&[0, 2, 1], 3);
        assert_eq!(parse_labels(&b, Some(3)).unwrap(), (vec![0, 2, 1], 3));
        assert!(parse_labels(&encode_labels(&[3], 3), None).is_err());
        assert!(parse_labels(&b, Some(4)).is_err());
        assert_eq!(one_hot(&[1], 3).row(0), &[0.0, 1.0, 0.0]);
    }
}
