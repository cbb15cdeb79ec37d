//! Binary checkpoints of a built model and its optimizer.
//!
//! All integers are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       8     magic b"GGCKPT\0\0"
//! 8       4     u32 format version (1)
//! 12      8     u64 header length H
//! 20      H     UTF-8 JSON header: {"model": ModelConfig, "backend", "in_dim",
//!               "n_classes", "epoch"}
//! ..      4     u32 parameter count P
//!               P times:
//!                 u16 name length, name bytes (UTF-8)
//!                 u64 rows, u64 cols, u8 decay flag
//!                 rows*cols f64 values, row-major
//! ..      1     u8 optimizer flag (0 = absent, 1 = present)
//!               if present: u64 step count, then for each parameter in order
//!               its first-moment values followed by its second-moment values
//! ```

use serde::{Deserialize, Serialize};

use super::Adam;
use crate::autodiff::{ParamStore, Parameter};
use crate::error::{Error, Result};
use crate::gallery::{Model, ModelConfig};
use crate::tensor::{BackendId, DenseMatrix};

pub const MAGIC: &[u8; 8] = b"GGCKPT\0\0";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    backend: BackendId,
    in_dim: usize,
    n_classes: usize,
    epoch: usize,
}

/// Everything needed to rebuild a trained model and continue training it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub backend: BackendId,
    pub in_dim: usize,
    pub n_classes: usize,
    /// Last completed epoch.
    pub epoch: usize,
    pub params: ParamStore,
    pub optimizer: Option<Adam>,
}

impl Checkpoint {
    pub fn capture(model: &Model, optimizer: Option<&Adam>, epoch: usize) -> Result<Self> {
        let (Some(in_dim), Some(n_classes)) = (model.in_dim(), model.n_classes()) else {
            return Err(Error::Lifecycle("checkpoint of an unbuilt model".into()));
        };
        let mut params = model.params().clone();
        params.zero_grad();
        Ok(Self {
            model: model.config().clone(),
            backend: model.backend(),
            in_dim,
            n_classes,
            epoch,
            params,
            optimizer: optimizer.cloned(),
        })
    }

    /// Copies the stored parameters into `model`, which must have been built
    /// with the same configuration and dimensions.
    pub fn apply(&self, model: &mut Model) -> Result<()> {
        if model.config() != &self.model {
            return Err(Error::Validation("checkpoint was written for a different model configuration".into()));
        }
        let store = model.params_mut();
        if store.len() != self.params.len()
            || store
                .iter()
                .zip(self.params.iter())
                .any(|(a, b)| a.name != b.name || a.value.shape() != b.value.shape())
        {
            return Err(Error::Validation("checkpoint parameters do not match the model".into()));
        }
        *store = self.params.clone();
        store.zero_grad();
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            model: self.model.clone(),
            backend: self.backend,
            in_dim: self.in_dim,
            n_classes: self.n_classes,
            epoch: self.epoch,
        })
        .expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        let put = |out: &mut Vec<u8>, m: &DenseMatrix| {
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        for p in self.params.iter() {
            out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.value.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(p.value.cols() as u64).to_le_bytes());
            out.push(u8::from(p.decay));
            put(&mut out, &p.value);
        }
        match &self.optimizer {
            None => out.push(0),
            Some(opt) => {
                out.push(1);
                out.extend_from_slice(&opt.steps().to_le_bytes());
                let (m, v) = opt.moments();
                for (a, b) in m.iter().zip(v) {
                    put(&mut out, a);
                    put(&mut out, b);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let hlen = r.u64()? as usize;
        let header: Header = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
        header.model.validate()?;
        let count = r.u32()? as usize;
        let mut params = ParamStore::new();
        let mut shapes = Vec::with_capacity(count);
        for _ in 0..count {
            let nlen = r.u16()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec())
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let decay = match r.take(1)?[0] {
                0 => false,
                1 => true,
                b => return Err(Error::Format(format!("bad decay flag {b}"))),
            };
            let value = r.matrix(rows, cols)?;
            shapes.push((rows, cols));
            params.push(Parameter::new(name, value, decay));
        }
        let optimizer = match r.take(1)?[0] {
            0 => None,
            1 => {
                let t = r.u64()?;
                let mut m = Vec::with_capacity(count);
                let mut v = Vec::with_capacity(count);
                for &(rows, cols) in &shapes {
                    m.push(r.matrix(rows, cols)?);
                    v.push(r.matrix(rows, cols)?);
                }
                Some(Adam::from_state(t, m, v)?)
            }
            b => return Err(Error::Format(format!("bad optimizer flag {b}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            model: header.model,
            backend: header.backend,
            in_dim: header.in_dim,
            n_classes: header.n_classes,
            epoch: header.epoch,
            params,
            optimizer,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("parameter shape overflows".into()))?;
        let data = self
            .take(n)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        DenseMatrix::from_vec(rows, cols, data)
    }
}
