use rand::Rng as _;

use super::{Graph, Split};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::tensor::{CsrMatrix, DenseMatrix};

fn check_sizes(n: usize, n_classes: usize) -> Result<()> {
    if n_classes < 2 || n < n_classes {
        return Err(Error::Config(format!(
            "synthetic graph needs n >= C >= 2, got n={n}, C={n_classes}"
        )));
    }
    Ok(())
}

/// 60/20/20 split by node index.
fn index_split(n: usize) -> Split {
    let n_train = n * 3 / 5;
    let n_val = n / 5;
    Split::new(
        (0..n_train).collect(),
        (n_train..n_train + n_val).collect(),
        (n_train + n_val..n).collect(),
        n,
    )
    .expect("contiguous ranges are a valid split")
}

fn undirected(n: usize, mut keep: impl FnMut(usize, usize) -> bool) -> CsrMatrix {
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if keep(i, j) {
                triplets.push((i, j, 1.0));
                triplets.push((j, i, 1.0));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets).expect("indices in range")
}

/// Erdos-Renyi graph with `n` nodes, uniform random unit-norm features of
/// width `d`, round-robin labels over `n_classes` classes and a 60/20/20 split
/// by index. Fully determined by `seed`.
pub fn synthetic_graph(n: usize, d: usize, n_classes: usize, edge_prob: f64, seed: u64) -> Result<Graph> {
    check_sizes(n, n_classes)?;
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Config(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = stream(seed, Stream::Data);
    let adjacency = undirected(n, |_, _| rng.gen::<f64>() < edge_prob);
    let mut features = DenseMatrix::zeros(n, d);
    for i in 0..n {
        let row = features.row_mut(i);
        row.iter_mut().for_each(|v| *v = rng.gen::<f64>());
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let labels = (0..n).map(|i| i % n_classes).collect();
    Graph::new(
        format!("synthetic-n{n}-d{d}-c{n_classes}-s{seed}"),
        adjacency,
        features,
        labels,
        n_classes,
        index_split(n),
    )
}

/// A fixture a linear classifier separates perfectly: edges only join nodes
/// of the same class, and features are the class indicator plus small
/// non-negative noise over `2 * n_classes` columns.
pub fn separable_graph(n: usize, n_classes: usize, seed: u64) -> Result<Graph> {
    check_sizes(n, n_classes)?;
    let mut rng = stream(seed, Stream::Data);
    let labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    let adjacency = undirected(n, |i, j| labels[i] == labels[j] && rng.gen::<f64>() < 0.2);
    let d = 2 * n_classes;
    let mut features = DenseMatrix::zeros(n, d);
    for (i, &l) in labels.iter().enumerate() {
        for v in features.row_mut(i) {
            *v = 0.1 * rng.gen::<f64>();
        }
        features.set(i, l, 1.0);
    }
    Graph::new(
        format!("separable-n{n}-c{n_classes}-s{seed}"),
        adjacency,
        features,
        labels,
        n_classes,
        index_split(n),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_probability_has_no_edges() {
        assert_eq!(synthetic_graph(20, 4, 2, 0.0, 1).unwrap().adjacency().nnz(), 0);
    }

    #[test]
    fn deterministic_and_symmetric() {
        let a = synthetic_graph(50, 8, 3, 0.1, 7).unwrap();
        assert_eq!(a, synthetic_graph(50, 8, 3, 0.1, 7).unwrap());
        assert_ne!(a, synthetic_graph(50, 8, 3, 0.1, 8).unwrap());
        assert!(a.adjacency().is_symmetric());
        assert!(a.adjacency().nnz() > 0);
        assert_eq!(a.split().sizes(), (30, 10, 10));
    }

    #[test]
    fn bad_parameters() {
        for (n, c, p) in [(1, 2, 0.1), (5, 1, 0.1), (5, 6, 0.1), (5, 2, 1.5), (5, 2, -0.1)] {
            assert!(matches!(synthetic_graph(n, 3, c, p, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn separable_edges_stay_within_class() {
        let g = separable_graph(60, 3, 0).unwrap();
        let a = g.adjacency();
        for i in 0..60 {
            for &j in a.row(i).0 {
                assert_eq!(g.labels()[i], g.labels()[j]);
            }
        }
    }
}
