use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Adam with classic L2 regularization: `g + wd * theta` feeds the moment
/// estimates for every parameter whose `decay` flag is set.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl Adam {
    /// Zero moments shaped like `params`.
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<DenseMatrix> = params
            .iter()
            .map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Rebuilds optimizer state from saved moments.
    pub fn from_state(t: u64, m: Vec<DenseMatrix>, v: Vec<DenseMatrix>) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::Validation("first and second moments differ in shape".into()));
        }
        Ok(Self {
            t,
            m,
            v,
            ..Self::new(&ParamStore::new())
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[DenseMatrix], &[DenseMatrix]) {
        (&self.m, &self.v)
    }

    /// One update from the gradients currently stored in `params`.
    pub fn step(&mut self, params: &mut ParamStore, lr: f64, weight_decay: f64) -> Result<()> {
        if params.len() != self.m.len()
            || params.iter().zip(&self.m).any(|(p, m)| p.value.shape() != m.shape())
        {
            return Err(Error::Contract("optimizer state does not match the parameters".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let wd = if p.decay { weight_decay } else { 0.0 };
            let theta = p.value.data_mut();
            let grad = p.grad.data();
            for i in 0..theta.len() {
                let g = grad[i] + wd * theta[i];
                let mi = &mut m.data_mut()[i];
                *mi = b1 * *mi + (1.0 - b1) * g;
                let vi = &mut v.data_mut()[i];
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                let m_hat = m.data()[i] / c1;
                let v_hat = v.data()[i] / c2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
