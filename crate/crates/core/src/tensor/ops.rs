//! Backend-independent numerical kernels.
//!
//! Every kernel computes each output row with a fixed, sequential reduction
//! order, so the parallel and sequential builds produce identical bits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CsrMatrix, DenseMatrix};
use crate::error::{Error, Result};
use crate::par;

/// `a * b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::dim(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let (n, m) = (a.rows(), b.cols());
    let mut out = DenseMatrix::zeros(n, m);
    par::for_each_row(out.data_mut(), m, |i, row| {
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    });
    Ok(out)
}

/// `aᵀ * b` without materializing the transpose.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::dim(
            "matmul_tn",
            format!("{:?}ᵀ x {:?}", a.shape(), b.shape()),
        ));
    }
    let (n, m) = (a.cols(), b.cols());
    let mut out = DenseMatrix::zeros(n, m);
    par::for_each_row(out.data_mut(), m, |k, row| {
        for i in 0..a.rows() {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for (o, &bij) in row.iter_mut().zip(b.row(i)) {
                *o += aik * bij;
            }
        }
    });
    Ok(out)
}

/// `a * bᵀ` without materializing the transpose.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::dim(
            "matmul_nt",
            format!("{:?} x {:?}ᵀ", a.shape(), b.shape()),
        ));
    }
    let (n, m) = (a.rows(), b.rows());
    let mut out = DenseMatrix::zeros(n, m);
    par::for_each_row(out.data_mut(), m, |i, row| {
        let ai = a.row(i);
        for (j, o) in row.iter_mut().enumerate() {
            *o = ai.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
        }
    });
    Ok(out)
}

/// Sparse-times-dense product `s * x`.
pub fn spmm(s: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if s.cols() != x.rows() {
        return Err(Error::dim(
            "spmm",
            format!("{:?} x {:?}", s.shape(), x.shape()),
        ));
    }
    let m = x.cols();
    let mut out = DenseMatrix::zeros(s.rows(), m);
    par::for_each_row(out.data_mut(), m, |r, row| {
        let (idx, vals) = s.row(r);
        for (&c, &v) in idx.iter().zip(vals) {
            for (o, &xc) in row.iter_mut().zip(x.row(c)) {
                *o += v * xc;
            }
        }
    });
    Ok(out)
}

/// Softmax along each row, with the row maximum subtracted first.
pub fn row_softmax(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    par::for_each_row(out.data_mut(), x.cols(), |_, row| softmax_in_place(row));
    out
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Log-softmax of one row.
pub(crate) fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    row.iter().map(|v| v - lse).collect()
}

/// Softmax computed independently within each segment of an edge-aligned
/// score array. `segment_of[e]` names the segment (destination node) of edge `e`.
pub fn segment_softmax(scores: &[f64], segment_of: &[usize], n_segments: usize) -> Result<Vec<f64>> {
    if scores.len() != segment_of.len() {
        return Err(Error::dim(
            "segment_softmax",
            format!("{} scores, {} segment ids", scores.len(), segment_of.len()),
        ));
    }
    let mut max = vec![f64::NEG_INFINITY; n_segments];
    for (&s, &seg) in scores.iter().zip(segment_of) {
        if seg >= n_segments {
            return Err(Error::Validation(format!(
                "segment id {seg} out of range for {n_segments} segments"
            )));
        }
        max[seg] = max[seg].max(s);
    }
    let mut out: Vec<f64> = scores
        .iter()
        .zip(segment_of)
        .map(|(&s, &seg)| (s - max[seg]).exp())
        .collect();
    let mut total = vec![0.0; n_segments];
    for (&w, &seg) in out.iter().zip(segment_of) {
        total[seg] += w;
    }
    for (w, &seg) in out.iter_mut().zip(segment_of) {
        *w /= total[seg];
    }
    Ok(out)
}

/// Elementwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu,
    LeakyRelu(f64),
    Identity,
}

impl Activation {
    pub fn validate(self) -> Result<Self> {
        if let Activation::LeakyRelu(slope) = self {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(Error::Config(format!(
                    "leaky_relu slope must lie in (0, 1), got {slope}"
                )));
            }
        }
        Ok(self)
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Elu => {
                if v > 0.0 {
                    v
                } else {
                    v.exp_m1()
                }
            }
            Activation::LeakyRelu(slope) => {
                if v > 0.0 {
                    v
                } else {
                    slope * v
                }
            }
            Activation::Identity => v,
        }
    }

    /// Derivative at `v`; the ReLU subgradient at 0 is 0.
    #[inline]
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if v > 0.0 {
                    1.0
                } else {
                    v.exp()
                }
            }
            Activation::LeakyRelu(slope) => {
                if v > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

pub fn activation(x: &DenseMatrix, kind: Activation) -> DenseMatrix {
    x.map(|v| kind.apply(v))
}

/// Inverted dropout. Returns the output together with the scaled keep-mask
/// (entries are `0` or `1/(1-rate)`), or `None` when nothing was dropped.
pub fn dropout<R: Rng + ?Sized>(
    x: &DenseMatrix,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(DenseMatrix, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.data().len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((DenseMatrix::from_vec(x.rows(), x.cols(), data)?, Some(mask)))
}
