//! `convert` (text inputs to NPZ) and `inspect` (dataset statistics).
//!
//! Input formats. In every file `#` starts a comment, blank lines are
//! skipped, and fields are separated by whitespace or commas.
//!
//! - edges: `src dst [weight]` per line, 0-based node ids, weight 1 when
//!   omitted. Each line is one directed entry `(src, dst)`; repeated pairs are
//!   summed. Models symmetrize the adjacency themselves.
//! - labels: one integer class id per line; line `i` is node `i`.
//! - features (optional): one row of floats per node. Without it every
//!   node gets a one-hot identity feature.
//! - splits (optional): `node part` per line with part one of `train`,
//!   `val`, `test`. Nodes not listed are in no part.
//!
//! The node count is the number of labels; edge endpoints must be below it.

use std::fs;
use std::path::Path;

use gallery_core::graph::{Graph, Split};
use gallery_core::tensor::{CsrMatrix, DenseMatrix};
use gallery_core::{Error, Result};
use serde::Serialize;

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn field<T: std::str::FromStr>(file: &str, line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("{file} line {line}: cannot parse '{s}'")))
}

pub fn parse_edges(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    records(text)
        .map(|(line, f)| match f[..] {
            [s, d] => Ok((field("edges", line, s)?, field("edges", line, d)?, 1.0)),
            [s, d, w] => Ok((field("edges", line, s)?, field("edges", line, d)?, field("edges", line, w)?)),
            _ => Err(Error::Format(format!("edges line {line}: expected 'src dst [weight]'"))),
        })
        .collect()
}

pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    records(text)
        .map(|(line, f)| match f[..] {
            [v] => field("labels", line, v),
            _ => Err(Error::Format(format!("labels line {line}: expected one class id"))),
        })
        .collect()
}

pub fn parse_features(text: &str) -> Result<DenseMatrix> {
    let rows: Vec<Vec<f64>> = records(text)
        .map(|(line, f)| f.iter().map(|v| field("features", line, v)).collect())
        .collect::<Result<_>>()?;
    DenseMatrix::from_rows(&rows).map_err(|e| Error::Format(format!("features: {e}")))
}

pub fn parse_splits(text: &str, n: usize) -> Result<Split> {
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (line, f) in records(text) {
        let [node, part] = f[..] else {
            return Err(Error::Format(format!("splits line {line}: expected 'node part'")));
        };
        let node: usize = field("splits", line, node)?;
        match part {
            "train" => train.push(node),
            "val" => val.push(node),
            "test" => test.push(node),
            other => return Err(Error::Format(format!("splits line {line}: unknown part '{other}'"))),
        }
    }
    for v in [&mut train, &mut val, &mut test] {
        v.sort_unstable();
    }
    Split::new(train, val, test, n)
}

/// Paths of the text inputs to [`convert`].
#[derive(Clone, Debug)]
pub struct ConvertInputs<'a> {
    pub edges: &'a Path,
    pub labels: &'a Path,
    pub features: Option<&'a Path>,
    pub splits: Option<&'a Path>,
    pub name: Option<&'a str>,
}

/// Assembles a graph from text inputs.
pub fn convert(inputs: &ConvertInputs<'_>) -> Result<Graph> {
    let read = |p: &Path| fs::read_to_string(p).map_err(Error::from);
    let labels = parse_labels(&read(inputs.labels)?)?;
    let n = labels.len();
    let edges = parse_edges(&read(inputs.edges)?)?;
    if let Some(&(s, d, _)) = edges.iter().find(|&&(s, d, _)| s >= n || d >= n) {
        return Err(Error::Validation(format!("edge ({s}, {d}) refers to a node outside 0..{n}")));
    }
    let adjacency = CsrMatrix::from_triplets(n, n, &edges)?;
    let features = match inputs.features {
        Some(p) => parse_features(&read(p)?)?,
        None => DenseMatrix::identity(n),
    };
    let split = match inputs.splits {
        Some(p) => parse_splits(&read(p)?, n)?,
        None => Split::new(vec![], vec![], vec![], n)?,
    };
    let n_classes = labels.iter().max().map_or(1, |m| m + 1);
    let name = inputs
        .name
        .map(str::to_string)
        .or_else(|| inputs.edges.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    Graph::new(name, adjacency, features, labels, n_classes, split)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphStats {
    pub name: String,
    pub nodes: usize,
    pub nnz: usize,
    pub features: usize,
    pub classes: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub symmetric: bool,
    pub self_loops: usize,
    pub isolated: usize,
    pub class_counts: Vec<usize>,
}

pub fn inspect(g: &Graph) -> GraphStats {
    let a = g.adjacency();
    let n = g.n_nodes();
    let mut touched = vec![false; n];
    let mut self_loops = 0;
    for r in 0..n {
        for &c in a.row(r).0 {
            if c == r {
                self_loops += 1;
            } else {
                touched[r] = true;
                touched[c] = true;
            }
        }
    }
    let mut class_counts = vec![0; g.n_classes()];
    for &l in g.labels() {
        class_counts[l] += 1;
    }
    let (train, val, test) = g.split().sizes();
    GraphStats {
        name: g.name().to_string(),
        nodes: n,
        nnz: a.nnz(),
        features: g.n_features(),
        classes: g.n_classes(),
        train,
        val,
        test,
        symmetric: a.is_symmetric(),
        self_loops,
        isolated: touched.iter().filter(|t| !**t).count(),
        class_counts,
    }
}

impl GraphStats {
    pub fn to_text(&self) -> String {
        let counts: Vec<String> = self.class_counts.iter().map(|c| c.to_string()).collect();
        format!(
            "name: {}\nnodes: {}\nnnz: {}\nfeatures: {}\nclasses: {}\nsplit: train={} val={} test={}\n\
             symmetric: {}\nself_loops: {}\nisolated: {}\nclass_counts: {}\n",
            self.name,
            self.nodes,
            self.nnz,
            self.features,
            self.classes,
            self.train,
            self.val,
            self.test,
            self.symmetric,
            self.self_loops,
            self.isolated,
            counts.join(",")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsers_accept_comments_and_commas() {
        let e = parse_edges("# header\n0 1\n1,2, 0.5\n\n2 0 # tail\n").unwrap();
        assert_eq!(e, vec![(0, 1, 1.0), (1, 2, 0.5), (2, 0, 1.0)]);
        assert_eq!(parse_labels("1\n0\n# x\n2\n").unwrap(), vec![1, 0, 2]);
        let x = parse_features("1 2\n3,4\n").unwrap();
        assert_eq!(x.shape(), (2, 2));
        let s = parse_splits("2 test\n0 train\n1 val\n", 3).unwrap();
        assert_eq!(s.sizes(), (1, 1, 1));
    }

    #[test]
    fn malformed_lines_are_format_errors() {
        assert!(matches!(parse_edges("0 1 2 3"), Err(Error::Format(_))));
        assert!(matches!(parse_edges("a b"), Err(Error::Format(_))));
        assert!(matches!(parse_labels("1 2"), Err(Error::Format(_))));
        assert!(matches!(parse_features("1 2\n3"), Err(Error::Format(_))));
        assert!(matches!(parse_splits("0 holdout", 2), Err(Error::Format(_))));
        assert!(matches!(parse_splits("0 train\n0 test", 2), Err(Error::Validation(_))));
    }
}
