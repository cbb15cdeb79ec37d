//! Mapping between [`Graph`] and the NPZ key layout of the public citation
//! dataset archives.
//!
//! | key | content |
//! |-----|---------|
//! | `adj_data`, `adj_indices`, `adj_indptr`, `adj_shape` | adjacency in CSR form |
//! | `attr_matrix` (alias `features`) | dense `n x d` features |
//! | `attr_data`, `attr_indices`, `attr_indptr`, `attr_shape` | sparse features, densified on load |
//! | `labels` | class ids (1-D) or one-hot rows (2-D) |
//! | `idx_train`, `idx_val`, `idx_test` | split as index lists |
//! | `train_mask`, `val_mask`, `test_mask` | split as boolean masks (used when `idx_*` are absent) |
//! | `n_classes` | optional scalar; defaults to `max(label) + 1` |
//! | `name` | optional UTF-8 bytes |

use std::path::Path;

use super::npy::NdArray;
use super::npz::{parse_npz, write_npz, NpzArchive};
use super::{Graph, Split};
use crate::error::{Error, Result};
use crate::tensor::{CsrMatrix, DenseMatrix};

fn require<'a>(archive: &'a NpzArchive, key: &str) -> Result<&'a NdArray> {
    archive.get(key).ok_or_else(|| Error::Schema(key.to_string()))
}

fn shape2(archive: &NpzArchive, key: &str) -> Result<(usize, usize)> {
    match require(archive, key)?.to_index_vec()?.as_slice() {
        &[r, c] => Ok((r, c)),
        other => Err(Error::Validation(format!("{key} must hold two values, got {other:?}"))),
    }
}

fn load_csr(archive: &NpzArchive, prefix: &str) -> Result<CsrMatrix> {
    let key = |s: &str| format!("{prefix}_{s}");
    let values = require(archive, &key("data"))?.to_f64_vec();
    let indices = require(archive, &key("indices"))?.to_index_vec()?;
    let indptr = require(archive, &key("indptr"))?.to_index_vec()?;
    let (rows, cols) = shape2(archive, &key("shape"))?;
    CsrMatrix::new(rows, cols, indptr, indices, values)
        .map_err(|e| Error::Validation(format!("{prefix} matrix: {e}")))
}

fn load_features(archive: &NpzArchive, n: usize) -> Result<DenseMatrix> {
    let dense = archive.get("attr_matrix").or_else(|| archive.get("features"));
    if let Some(a) = dense {
        return match a.shape() {
            &[r, c] => DenseMatrix::from_vec(r, c, a.to_f64_vec()),
            // An empty (n x 0) feature matrix may be flattened by some writers.
            &[0] if n == 0 => Ok(DenseMatrix::zeros(0, 0)),
            s => Err(Error::Validation(format!("attr_matrix must be 2-D, got shape {s:?}"))),
        };
    }
    if archive.contains_key("attr_data") {
        return Ok(load_csr(archive, "attr")?.to_dense());
    }
    Err(Error::Schema("attr_matrix".into()))
}

fn load_labels(archive: &NpzArchive) -> Result<(Vec<usize>, Option<usize>)> {
    let a = require(archive, "labels")?;
    match a.shape() {
        [_] => Ok((a.to_index_vec()?, None)),
        &[n, c] => {
            let m = DenseMatrix::from_vec(n, c, a.to_f64_vec())?;
            Ok((m.argmax_rows(), Some(c)))
        }
        s => Err(Error::Validation(format!("labels must be 1-D or 2-D, got shape {s:?}"))),
    }
}

fn load_split(archive: &NpzArchive, n: usize) -> Result<Split> {
    let parts = ["train", "val", "test"];
    let lists = if parts.iter().all(|p| archive.contains_key(&format!("idx_{p}"))) {
        parts
            .iter()
            .map(|p| require(archive, &format!("idx_{p}"))?.to_index_vec())
            .collect::<Result<Vec<_>>>()?
    } else if parts.iter().any(|p| archive.contains_key(&format!("{p}_mask"))) {
        parts
            .iter()
            .map(|p| {
                let key = format!("{p}_mask");
                let mask = require(archive, &key)?;
                if mask.len() != n {
                    return Err(Error::Validation(format!(
                        "{key} has {} entries for {n} nodes",
                        mask.len()
                    )));
                }
                Ok(mask
                    .to_f64_vec()
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, _)| i)
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let missing = parts
            .iter()
            .map(|p| format!("idx_{p}"))
            .find(|k| !archive.contains_key(k))
            .unwrap_or_else(|| "idx_train".into());
        return Err(Error::Schema(missing));
    };
    let [mut train, mut val, mut test]: [Vec<usize>; 3] = lists.try_into().expect("three parts");
    for l in [&mut train, &mut val, &mut test] {
        l.sort_unstable();
    }
    Split::new(train, val, test, n)
}

/// Builds a validated [`Graph`] from archive contents.
pub fn load_graph(archive: &NpzArchive) -> Result<Graph> {
    let adjacency = load_csr(archive, "adj")?;
    let n = adjacency.rows();
    let features = load_features(archive, n)?;
    let (labels, onehot_classes) = load_labels(archive)?;
    let n_classes = match archive.get("n_classes") {
        Some(a) => match a.to_index_vec()?.as_slice() {
            &[c] => c,
            _ => return Err(Error::Validation("n_classes must be a scalar".into())),
        },
        None => onehot_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1)),
    };
    let split = load_split(archive, n)?;
    let name = match archive.get("name") {
        Some(a) => String::from_utf8(a.raw().to_vec())
            .map_err(|_| Error::Validation("name is not valid UTF-8".into()))?,
        None => String::new(),
    };
    Graph::new(name, adjacency, features, labels, n_classes, split)
}

fn index_array(v: &[usize]) -> NdArray {
    let as_i64: Vec<i64> = v.iter().map(|&i| i as i64).collect();
    NdArray::from_i64(vec![v.len()], &as_i64).expect("length matches shape")
}

/// Serializes a graph to deflate-compressed NPZ bytes. Output is a pure
/// function of the graph.
pub fn save_graph(g: &Graph) -> Vec<u8> {
    let a = g.adjacency();
    let x = g.features();
    let mut archive = NpzArchive::new();
    let mut put = |k: &str, v: NdArray| {
        archive.insert(k.to_string(), v);
    };
    put("adj_data", NdArray::from_f64(vec![a.nnz()], a.values()).expect("shape"));
    put("adj_indices", index_array(a.indices()));
    put("adj_indptr", index_array(a.indptr()));
    put("adj_shape", index_array(&[a.rows(), a.cols()]));
    put("attr_matrix", NdArray::from_f64(vec![x.rows(), x.cols()], x.data()).expect("shape"));
    put("labels", index_array(g.labels()));
    put("n_classes", NdArray::from_i64(vec![], &[g.n_classes() as i64]).expect("shape"));
    put("idx_train", index_array(g.split().train()));
    put("idx_val", index_array(g.split().val()));
    put("idx_test", index_array(g.split().test()));
    put("name", NdArray::from_u8(vec![g.name().len()], g.name().as_bytes()).expect("shape"));
    write_npz(&archive, true)
}

/// Loads a graph from an `.npz` file; an archive without a `name` entry takes
/// the file stem as its name.
pub fn read_graph_file(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let g = load_graph(&parse_npz(&bytes)?)?;
    if g.name().is_empty() {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(g.with_name(stem));
    }
    Ok(g)
}

pub fn write_graph_file(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, save_graph(g))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Graph {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        let x = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]).unwrap();
        Graph::new("path3", a, x, vec![0, 1, 0], 2, Split::new(vec![0], vec![1], vec![2], 3).unwrap()).unwrap()
    }

    #[test]
    fn round_trip_and_determinism() {
        let g = fixture();
        let bytes = save_graph(&g);
        let back = load_graph(&parse_npz(&bytes).unwrap()).unwrap();
        assert_eq!(back, g);
        assert_eq!((back.n_nodes(), back.n_features(), back.n_classes()), (3, 2, 2));
        assert_eq!(save_graph(&back), bytes);
    }

    #[test]
    fn missing_key_is_named() {
        let mut archive = parse_npz(&save_graph(&fixture())).unwrap();
        archive.remove("adj_indptr");
        match load_graph(&archive) {
            Err(Error::Schema(k)) => assert_eq!(k, "adj_indptr"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn masks_and_onehot_labels() {
        let mut archive = parse_npz(&save_graph(&fixture())).unwrap();
        for k in ["idx_train", "idx_val", "idx_test", "n_classes"] {
            archive.remove(k);
        }
        archive.insert("train_mask".into(), NdArray::from_bool(vec![3], &[true, false, false]).unwrap());
        archive.insert("val_mask".into(), NdArray::from_bool(vec![3], &[false, true, false]).unwrap());
        archive.insert("test_mask".into(), NdArray::from_bool(vec![3], &[false, false, true]).unwrap());
        archive.insert(
            "labels".into(),
            NdArray::from_f64(vec![3, 3], &[1., 0., 0., 0., 1., 0., 1., 0., 0.]).unwrap(),
        );
        let g = load_graph(&archive).unwrap();
        assert_eq!(g.labels(), &[0, 1, 0]);
        assert_eq!(g.n_classes(), 3);
        assert_eq!(g.split().test(), &[2]);
    }

    #[test]
    fn overlapping_masks_rejected() {
        let mut archive = parse_npz(&save_graph(&fixture())).unwrap();
        archive.insert("idx_test".into(), index_array(&[0, 2]));
        assert!(matches!(load_graph(&archive), Err(Error::Validation(_))));
    }

    #[test]
    fn sparse_features_densified() {
        let mut archive = parse_npz(&save_graph(&fixture())).unwrap();
        archive.remove("attr_matrix");
        let x = CsrMatrix::from_dense(fixture().features());
        archive.insert("attr_data".into(), NdArray::from_f64(vec![x.nnz()], x.values()).unwrap());
        archive.insert("attr_indices".into(), index_array(x.indices()));
        archive.insert("attr_indptr".into(), index_array(x.indptr()));
        archive.insert("attr_shape".into(), index_array(&[3, 2]));
        assert_eq!(load_graph(&archive).unwrap().features(), fixture().features());
    }
}
