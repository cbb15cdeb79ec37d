//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] records every kernel applied during one forward pass. Trainable
//! weights live in a [`ParamStore`] outside the tape; [`Tape::param`] copies a
//! weight onto the tape as a leaf, and [`Tape::backward`] adds the resulting
//! gradients into the store. The tape is consumed by one backward pass unless
//! it was created with [`Tape::retained`].

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{ops, Activation, Context, CsrMatrix, DenseMatrix, EdgeIndex};

/// A trainable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
    /// Whether L2 weight decay applies to this parameter.
    pub decay: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: DenseMatrix, decay: bool) -> Self {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
            decay,
        }
    }
}

/// Ordered, named collection of parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a parameter and returns its slot.
    pub fn push(&mut self, p: Parameter) -> usize {
        self.params.push(p);
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, slot: usize) -> &Parameter {
        &self.params[slot]
    }

    pub fn get_mut(&mut self, slot: usize) -> &mut Parameter {
        &mut self.params[slot]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn slot_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> std::slice::IterMut<'_, Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        zero_grad(self);
    }

    /// Copies of every parameter value, in slot order.
    pub fn snapshot(&self) -> Vec<DenseMatrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[DenseMatrix]) {
        for (p, v) in self.params.iter_mut().zip(values) {
            p.value = v.clone();
        }
    }
}

/// Resets every gradient to zero.
pub fn zero_grad(params: &mut ParamStore) {
    for p in params.iter_mut() {
        p.grad.fill(0.0);
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf { slot: Option<usize> },
    Constant,
    MatMul(Var, Var),
    SpMM(Arc<CsrMatrix>, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Activation(Var, Activation),
    Dropout(Var, Vec<f64>),
    SoftmaxCrossEntropy {
        logits: Var,
        rows: Vec<usize>,
        labels: Vec<usize>,
        probs: DenseMatrix,
    },
    SegmentSoftmax {
        scores: Var,
        segments: Arc<[usize]>,
    },
    Concat(Vec<Var>),
    Mean(Vec<Var>),
    GatherRows(Var, Arc<[usize]>),
    EdgeAggregate {
        weights: Var,
        x: Var,
        edges: Arc<EdgeIndex>,
    },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: DenseMatrix,
    requires_grad: bool,
    op: Op,
}

/// Recorded forward computation.
#[derive(Debug)]
pub struct Tape {
    ctx: Context,
    nodes: Vec<Node>,
    grads: Vec<Option<DenseMatrix>>,
    retain: bool,
    consumed: bool,
}

impl Tape {
    pub fn new(ctx: Context) -> Self {
        Self {
            ctx,
            nodes: Vec::new(),
            grads: Vec::new(),
            retain: false,
            consumed: false,
        }
    }

    /// A tape that allows repeated backward passes.
    pub fn retained(ctx: Context) -> Self {
        Self {
            retain: true,
            ..Self::new(ctx)
        }
    }

    pub fn context(&self) -> Context {
        self.ctx
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass w.r.t. `v` (zeros if `v` received none).
    pub fn grad(&self, v: Var) -> DenseMatrix {
        self.grads
            .get(v.0)
            .and_then(|g| g.clone())
            .unwrap_or_else(|| {
                let (r, c) = self.nodes[v.0].value.shape();
                DenseMatrix::zeros(r, c)
            })
    }

    fn push(&mut self, value: DenseMatrix, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf variable not backed by a parameter.
    pub fn variable(&mut self, value: DenseMatrix, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf { slot: None })
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, false, Op::Constant)
    }

    /// Places parameter `slot` of `store` on the tape.
    pub fn param(&mut self, store: &ParamStore, slot: usize) -> Var {
        self.push(store.get(slot).value.clone(), true, Op::Leaf { slot: Some(slot) })
    }

    /// Records a forward-only kernel. Fails if any input needs a gradient,
    /// since such an op has no backward rule.
    pub fn opaque(&mut self, name: &str, inputs: &[Var], value: DenseMatrix) -> Result<Var> {
        if inputs.iter().any(|&v| self.rg(v)) {
            return Err(Error::UnsupportedOp(name.to_string()));
        }
        Ok(self.push(value, false, Op::Constant))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, rg, Op::MatMul(a, b)))
    }

    /// `s * x` with a constant sparse operand, dispatched on the tape's backend.
    pub fn spmm(&mut self, s: &Arc<CsrMatrix>, x: Var) -> Result<Var> {
        let value = self.ctx.spmm(s, self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(value, rg, Op::SpMM(Arc::clone(s), x)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, rg, Op::Add(a, b)))
    }

    /// Adds a `1 x cols` bias row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::dim(
                "add_bias",
                format!("{:?} + {:?}", xv.shape(), bv.shape()),
            ));
        }
        let mut value = xv.clone();
        let b = bv.row(0).to_vec();
        for r in 0..value.rows() {
            for (v, bb) in value.row_mut(r).iter_mut().zip(&b) {
                *v += bb;
            }
        }
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(value, rg, Op::AddBias(x, bias)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, rg, Op::Mul(a, b)))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let kind = kind.validate()?;
        let value = ops::activation(self.value(x), kind);
        let rg = self.rg(x);
        Ok(self.push(value, rg, Op::Activation(x, kind)))
    }

    /// Inverted dropout; a no-op (returns `x`) at inference or with rate 0.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        rng: &mut R,
        training: bool,
    ) -> Result<Var> {
        let (value, mask) = ops::dropout(self.value(x), rate, rng, training)?;
        match mask {
            None => Ok(x),
            Some(mask) => {
                let rg = self.rg(x);
                Ok(self.push(value, rg, Op::Dropout(x, mask)))
            }
        }
    }

    /// Mean over `rows` of `-log softmax(logits)[row, labels[row]]`, fused so the
    /// backward rule is `(p - y) / |rows|`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize], rows: &[usize]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::Contract("cross-entropy over an empty node set".into()));
        }
        let lv = self.value(logits);
        if labels.len() != lv.rows() {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!("{} labels for {} logit rows", labels.len(), lv.rows()),
            ));
        }
        let mut probs = DenseMatrix::zeros(rows.len(), lv.cols());
        let mut picked = Vec::with_capacity(rows.len());
        let mut loss = 0.0;
        for (k, &r) in rows.iter().enumerate() {
            if r >= lv.rows() {
                return Err(Error::Validation(format!("row index {r} out of range")));
            }
            let y = labels[r];
            if y >= lv.cols() {
                return Err(Error::Validation(format!(
                    "label {y} out of range for {} classes",
                    lv.cols()
                )));
            }
            let logp = ops::log_softmax_row(lv.row(r));
            loss -= logp[y];
            for (p, lp) in probs.row_mut(k).iter_mut().zip(&logp) {
                *p = lp.exp();
            }
            picked.push(y);
        }
        loss /= rows.len() as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            DenseMatrix::scalar(loss),
            rg,
            Op::SoftmaxCrossEntropy {
                logits,
                rows: rows.to_vec(),
                labels: picked,
                probs,
            },
        ))
    }

    /// Softmax of an `E x 1` score column within each segment.
    pub fn segment_softmax(&mut self, scores: Var, segments: &Arc<[usize]>, n_segments: usize) -> Result<Var> {
        let sv = self.value(scores);
        if sv.cols() != 1 {
            return Err(Error::dim("segment_softmax", format!("{:?}", sv.shape())));
        }
        let out = ops::segment_softmax(sv.data(), segments, n_segments)?;
        let rg = self.rg(scores);
        Ok(self.push(
            DenseMatrix::column(out),
            rg,
            Op::SegmentSoftmax {
                scores,
                segments: Arc::clone(segments),
            },
        ))
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&v| self.value(v).rows())
            .ok_or_else(|| Error::Contract("concat of nothing".into()))?;
        if parts.iter().any(|&v| self.value(v).rows() != rows) {
            return Err(Error::dim("concat", "row counts differ"));
        }
        let cols: usize = parts.iter().map(|&v| self.value(v).cols()).sum();
        let mut value = DenseMatrix::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                value.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let rg = parts.iter().any(|&v| self.rg(v));
        Ok(self.push(value, rg, Op::Concat(parts.to_vec())))
    }

    /// Elementwise mean of equally shaped inputs (head averaging).
    pub fn mean(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("mean of nothing".into()))?;
        let mut value = self.value(first).clone();
        for &p in &parts[1..] {
            value.add_assign(self.value(p))?;
        }
        let value = value.scale(1.0 / parts.len() as f64);
        let rg = parts.iter().any(|&v| self.rg(v));
        Ok(self.push(value, rg, Op::Mean(parts.to_vec())))
    }

    /// Rows `index[k]` of `x`, stacked.
    pub fn gather_rows(&mut self, x: Var, index: &Arc<[usize]>) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::Validation(format!(
                "gather index {bad} out of range for {} rows",
                xv.rows()
            )));
        }
        let value = xv.select_rows(index);
        let rg = self.rg(x);
        Ok(self.push(value, rg, Op::GatherRows(x, Arc::clone(index))))
    }

    /// Weighted neighborhood sum `out[dst] += w[e] * x[src]`; `weights` is `E x 1`.
    pub fn edge_aggregate(&mut self, edges: &Arc<EdgeIndex>, weights: Var, x: Var) -> Result<Var> {
        let w = self.value(weights);
        if w.cols() != 1 {
            return Err(Error::dim("edge_aggregate", format!("weights {:?}", w.shape())));
        }
        let value = self.ctx.edge_aggregate(edges, w.data(), self.value(x))?;
        let rg = self.rg(weights) || self.rg(x);
        Ok(self.push(
            value,
            rg,
            Op::EdgeAggregate {
                weights,
                x,
                edges: Arc::clone(edges),
            },
        ))
    }

    /// Sum of all entries, as a `1 x 1` value.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = DenseMatrix::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(value, rg, Op::Sum(x))
    }

    /// Backpropagates from a scalar `loss`, adding parameter gradients into `params`.
    pub fn backward(&mut self, loss: Var, params: &mut ParamStore) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        self.backward_with(loss, DenseMatrix::scalar(1.0), params)
    }

    /// Backpropagates an explicit upstream gradient `seed` from `root`.
    pub fn backward_with(&mut self, root: Var, seed: DenseMatrix, params: &mut ParamStore) -> Result<()> {
        if self.consumed && !self.retain {
            return Err(Error::Contract(
                "tape already consumed by a backward pass".into(),
            ));
        }
        if seed.shape() != self.value(root).shape() {
            return Err(Error::dim(
                "backward",
                format!("seed {:?} for value {:?}", seed.shape(), self.value(root).shape()),
            ));
        }
        self.consumed = true;
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(seed);

        for id in (0..=root.0).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }

        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { slot: Some(slot) } = node.op {
                if let Some(g) = &grads[id] {
                    params.get_mut(slot).grad.add_assign(g)?;
                }
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, id: usize, g: &DenseMatrix, grads: &mut [Option<DenseMatrix>]) -> Result<()> {
        let node = &self.nodes[id];
        let mut send = |v: Var, contrib: DenseMatrix| -> Result<()> {
            if !self.nodes[v.0].requires_grad {
                return Ok(());
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contrib),
                slot @ None => {
                    *slot = Some(contrib);
                    Ok(())
                }
            }
        };
        match &node.op {
            Op::Leaf { .. } | Op::Constant => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    send(*a, ops::matmul_nt(g, self.value(*b))?)?;
                }
                if self.rg(*b) {
                    send(*b, ops::matmul_tn(self.value(*a), g)?)?;
                }
            }
            Op::SpMM(s, x) => {
                send(*x, self.ctx.spmm_transposed(s, g)?)?;
            }
            Op::Add(a, b) => {
                send(*a, g.clone())?;
                send(*b, g.clone())?;
            }
            Op::AddBias(x, b) => {
                send(*x, g.clone())?;
                if self.rg(*b) {
                    let mut col = vec![0.0; g.cols()];
                    for r in 0..g.rows() {
                        for (c, v) in col.iter_mut().zip(g.row(r)) {
                            *c += v;
                        }
                    }
                    send(*b, DenseMatrix::row_vector(col))?;
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    send(*a, g.hadamard(self.value(*b))?)?;
                }
                if self.rg(*b) {
                    send(*b, g.hadamard(self.value(*a))?)?;
                }
            }
            Op::Activation(x, kind) => {
                let input = self.value(*x);
                let data = g
                    .data()
                    .iter()
                    .zip(input.data())
                    .map(|(gv, &xv)| gv * kind.derivative(xv))
                    .collect();
                send(*x, DenseMatrix::from_vec(g.rows(), g.cols(), data)?)?;
            }
            Op::Dropout(x, mask) => {
                let data = g.data().iter().zip(mask).map(|(gv, m)| gv * m).collect();
                send(*x, DenseMatrix::from_vec(g.rows(), g.cols(), data)?)?;
            }
            Op::SoftmaxCrossEntropy {
                logits,
                rows,
                labels,
                probs,
            } => {
                let scale = g.get(0, 0) / rows.len() as f64;
                let (n, c) = self.value(*logits).shape();
                let mut out = DenseMatrix::zeros(n, c);
                for (k, (&r, &y)) in rows.iter().zip(labels).enumerate() {
                    let dst = out.row_mut(r);
                    for (d, p) in dst.iter_mut().zip(probs.row(k)) {
                        *d += scale * p;
                    }
                    dst[y] -= scale;
                }
                send(*logits, out)?;
            }
            Op::SegmentSoftmax { scores, segments } => {
                let y = node.value.data();
                let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; n_seg];
                for ((&yi, gi), &s) in y.iter().zip(g.data()).zip(segments.iter()) {
                    dot[s] += yi * gi;
                }
                let data = y
                    .iter()
                    .zip(g.data())
                    .zip(segments.iter())
                    .map(|((&yi, gi), &s)| yi * (gi - dot[s]))
                    .collect();
                send(*scores, DenseMatrix::column(data))?;
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let cols = self.value(p).cols();
                    if self.rg(p) {
                        let mut part = DenseMatrix::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            part.row_mut(r).copy_from_slice(&g.row(r)[off..off + cols]);
                        }
                        send(p, part)?;
                    }
                    off += cols;
                }
            }
            Op::Mean(parts) => {
                let share = g.scale(1.0 / parts.len() as f64);
                for &p in parts {
                    send(p, share.clone())?;
                }
            }
            Op::GatherRows(x, index) => {
                let (n, c) = self.value(*x).shape();
                let mut out = DenseMatrix::zeros(n, c);
                for (k, &i) in index.iter().enumerate() {
                    for (d, v) in out.row_mut(i).iter_mut().zip(g.row(k)) {
                        *d += v;
                    }
                }
                send(*x, out)?;
            }
            Op::EdgeAggregate { weights, x, edges } => {
                let w = self.value(*weights).data();
                if self.rg(*x) {
                    send(*x, self.ctx.edge_aggregate_transposed(edges, w, g)?)?;
                }
                if self.rg(*weights) {
                    send(*weights, DenseMatrix::column(edges.edge_dots(g, self.value(*x))))?;
                }
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                send(*x, DenseMatrix::filled(r, c, g.get(0, 0)))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::BackendId;

    fn tape() -> Tape {
        Tape::new(Context::new(BackendId::Sparse))
    }

    #[test]
    fn relu_subgradient() {
        let mut t = tape();
        let mut store = ParamStore::new();
        let x = t.variable(DenseMatrix::row_vector(vec![-1.0, 2.0]), true);
        let y = t.activation(x, Activation::Relu).unwrap();
        t.backward_with(y, DenseMatrix::row_vector(vec![1.0, 1.0]), &mut store)
            .unwrap();
        assert_eq!(t.grad(x).data(), &[0.0, 1.0]);

        let mut t = tape();
        let x = t.variable(DenseMatrix::row_vector(vec![0.0]), true);
        let y = t.activation(x, Activation::Relu).unwrap();
        let s = t.sum(y);
        t.backward(s, &mut store).unwrap();
        assert_eq!(t.grad(x).data(), &[0.0]);
    }

    #[test]
    fn square_sum_gradient() {
        let mut t = tape();
        let x = t.variable(DenseMatrix::row_vector(vec![1.0, 2.0, 3.0]), true);
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        t.backward(s, &mut ParamStore::new()).unwrap();
        assert_eq!(t.grad(x).data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn constant_loss_leaves_grads_zero() {
        let mut store = ParamStore::new();
        store.push(Parameter::new("w", DenseMatrix::filled(2, 2, 1.0), false));
        let mut t = tape();
        let c = t.constant(DenseMatrix::filled(1, 3, 2.0));
        let s = t.sum(c);
        t.backward(s, &mut store).unwrap();
        assert_eq!(store.get(0).grad, DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn linear_loss_gradient_independent_of_value() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let mut grads = Vec::new();
        for x0 in [0.0, 5.0] {
            let mut store = ParamStore::new();
            let slot = store.push(Parameter::new("x", DenseMatrix::filled(2, 1, x0), false));
            let mut t = tape();
            let av = t.constant(a.clone());
            let xv = t.param(&store, slot);
            let y = t.matmul(av, xv).unwrap();
            let s = t.sum(y);
            t.backward(s, &mut store).unwrap();
            grads.push(store.get(slot).grad.clone());
        }
        assert_eq!(grads[0], grads[1]);
        assert_eq!(grads[0].data(), &[4.0, 1.0]);
    }

    #[test]
    fn backward_contract_errors() {
        let mut store = ParamStore::new();
        let mut t = tape();
        let x = t.variable(DenseMatrix::row_vector(vec![1.0, 2.0]), true);
        assert!(matches!(t.backward(x, &mut store), Err(Error::Contract(_))));
        let s = t.sum(x);
        t.backward(s, &mut store).unwrap();
        assert!(matches!(t.backward(s, &mut store), Err(Error::Contract(_))));

        let mut r = Tape::retained(Context::default());
        let x = r.variable(DenseMatrix::row_vector(vec![1.0]), true);
        let s = r.sum(x);
        r.backward(s, &mut store).unwrap();
        r.backward(s, &mut store).unwrap();
    }

    #[test]
    fn opaque_op_rejects_gradients() {
        let mut t = tape();
        let x = t.variable(DenseMatrix::scalar(1.0), true);
        let c = t.constant(DenseMatrix::scalar(1.0));
        assert!(matches!(
            t.opaque("argmax", &[x], DenseMatrix::scalar(0.0)),
            Err(Error::UnsupportedOp(_))
        ));
        assert!(t.opaque("argmax", &[c], DenseMatrix::scalar(0.0)).is_ok());
    }

    #[test]
    fn gradients_accumulate_and_zero() {
        let mut store = ParamStore::new();
        let slot = store.push(Parameter::new("w", DenseMatrix::row_vector(vec![1.0, -2.0]), false));
        let run = |store: &mut ParamStore| {
            let mut t = tape();
            let w = t.param(store, slot);
            let sq = t.mul(w, w).unwrap();
            let s = t.sum(sq);
            t.backward(s, store).unwrap();
        };
        run(&mut store);
        let single = store.get(slot).grad.clone();
        run(&mut store);
        assert_eq!(store.get(slot).grad, single.scale(2.0));
        zero_grad(&mut store);
        assert_eq!(store.get(slot).grad, DenseMatrix::zeros(1, 2));
        zero_grad(&mut store);
        assert_eq!(store.get(slot).grad, DenseMatrix::zeros(1, 2));
        run(&mut store);
        assert_eq!(store.get(slot).grad, single);
    }

    #[test]
    fn same_variable_used_twice_sums_contributions() {
        let mut t = tape();
        let x = t.variable(DenseMatrix::row_vector(vec![3.0]), true);
        let y = t.add(x, x).unwrap();
        let s = t.sum(y);
        t.backward(s, &mut ParamStore::new()).unwrap();
        assert_eq!(t.grad(x).data(), &[2.0]);
    }
}
