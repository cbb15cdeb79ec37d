//! Datasets: the immutable [`Graph`] container, its fixed [`Split`], NPY/NPZ
//! serialization and synthetic fixture generators.

mod dataset;
pub mod npy;
pub mod npz;
mod synthetic;

pub use dataset::{load_graph, read_graph_file, save_graph, write_graph_file};
pub use npy::{parse_npy, DType, NdArray};
pub use npz::{parse_npz, write_npz, write_zip, NpzArchive};
pub use synthetic::{separable_graph, synthetic_graph};

use crate::error::{Error, Result};
use crate::tensor::{CsrMatrix, DenseMatrix};

/// Fixed train/validation/test node partition.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

impl Split {
    /// Each list must be sorted and duplicate-free, the lists pairwise
    /// disjoint, and every index below `n`.
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>, n: usize) -> Result<Self> {
        let mut owner = vec![None; n];
        for (part, idx) in [("train", &train), ("val", &val), ("test", &test)] {
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "{part} indices must be sorted and duplicate-free"
                )));
            }
            for &i in idx.iter() {
                let slot = owner.get_mut(i).ok_or_else(|| {
                    Error::Validation(format!("{part} index {i} out of range for {n} nodes"))
                })?;
                if let Some(other) = *slot {
                    return Err(Error::Validation(format!(
                        "node {i} appears in both {other} and {part} splits"
                    )));
                }
                *slot = Some(part);
            }
        }
        Ok(Self { train, val, test })
    }

    /// Sorts and deduplicates each list before validating.
    pub fn from_unsorted(mut train: Vec<usize>, mut val: Vec<usize>, mut test: Vec<usize>, n: usize) -> Result<Self> {
        for v in [&mut train, &mut val, &mut test] {
            v.sort_unstable();
            v.dedup();
        }
        Self::new(train, val, test, n)
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn val(&self) -> &[usize] {
        &self.val
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// A node-classification dataset. Construction validates every invariant,
/// so a `Graph` value is always well formed.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    name: String,
    adjacency: CsrMatrix,
    features: DenseMatrix,
    labels: Vec<usize>,
    n_classes: usize,
    split: Split,
}

impl Graph {
    pub fn new(
        name: impl Into<String>,
        adjacency: CsrMatrix,
        features: DenseMatrix,
        labels: Vec<usize>,
        n_classes: usize,
        split: Split,
    ) -> Result<Self> {
        let n = adjacency.rows();
        if !adjacency.is_square() {
            return Err(Error::Validation(format!(
                "adjacency must be square, got {}x{}",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        if adjacency.values().iter().any(|&v| v < 0.0) {
            return Err(Error::Validation("adjacency values must be non-negative".into()));
        }
        if features.rows() != n {
            return Err(Error::Validation(format!(
                "features have {} rows but the graph has {n} nodes",
                features.rows()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Validation("features contain non-finite values".into()));
        }
        if labels.len() != n {
            return Err(Error::Validation(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if n > 0 && n_classes == 0 {
            return Err(Error::Validation("n_classes must be positive".into()));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(Error::Validation(format!(
                "label {l} of node {i} outside [0, {n_classes})"
            )));
        }
        // Re-run the split checks against this graph's size.
        let split = Split::new(split.train, split.val, split.test, n)?;
        Ok(Self {
            name: name.into(),
            adjacency,
            features,
            labels,
            n_classes,
            split,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let adjacency = self.adjacency.permute_symmetric(perm)?;
        let features = self.features.select_rows(perm);
        let labels = perm.iter().map(|&p| self.labels[p]).collect();
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let remap = |idx: &[usize]| idx.iter().map(|&i| inverse[i]).collect::<Vec<_>>();
        let split = Split::from_unsorted(
            remap(&self.split.train),
            remap(&self.split.val),
            remap(&self.split.test),
            perm.len(),
        )?;
        Self::new(self.name.clone(), adjacency, features, labels, self.n_classes, split)
    }
}
