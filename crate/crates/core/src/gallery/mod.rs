//! The model gallery: GCN, SGC and GAT behind one lifecycle,
//! `process(graph) -> build() -> train -> test`.

mod model;

pub use model::{AttentionMap, Model};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Activation, BackendId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Sgc,
    Gat,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gcn, ModelKind::Sgc, ModelKind::Gat];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Sgc => "sgc",
            ModelKind::Gat => "gat",
        }
    }

    pub fn default_config(self) -> ModelConfig {
        ModelConfig::new(self)
    }

    /// A model with this kind's default configuration.
    pub fn create(self, backend: BackendId) -> Model {
        Model::new(self.default_config(), backend).expect("default configurations are valid")
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        gallery_lookup(s)
    }
}

/// Case-insensitive registry lookup.
pub fn gallery_lookup(name: &str) -> Result<ModelKind> {
    let key = name.trim().to_ascii_lowercase();
    ModelKind::ALL
        .into_iter()
        .find(|k| k.as_str() == key)
        .ok_or_else(|| Error::NotFound {
            kind: "model",
            name: name.to_string(),
            available: ModelKind::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", "),
        })
}

/// Architecture hyperparameters.
///
/// `hidden_dims` lists hidden layer widths (per head for GAT) and is empty
/// for SGC. `heads` is GAT-only and has one entry per layer including the
/// output layer. `k_hops` is SGC-only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden_dims: Vec<usize>,
    pub heads: Vec<usize>,
    pub dropout: f64,
    pub attn_dropout: f64,
    pub k_hops: Option<usize>,
    /// Nonlinearity after each hidden layer.
    pub activation: Activation,
    /// LeakyReLU slope of GAT attention scores.
    pub negative_slope: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        let base = Self {
            kind,
            hidden_dims: Vec::new(),
            heads: Vec::new(),
            dropout: 0.0,
            attn_dropout: 0.0,
            k_hops: None,
            activation: Activation::Identity,
            negative_slope: 0.2,
            seed: 0,
        };
        match kind {
            ModelKind::Gcn => Self {
                hidden_dims: vec![16],
                dropout: 0.5,
                activation: Activation::Relu,
                ..base
            },
            ModelKind::Sgc => Self {
                k_hops: Some(2),
                ..base
            },
            ModelKind::Gat => Self {
                hidden_dims: vec![8],
                heads: vec![8, 1],
                dropout: 0.6,
                attn_dropout: 0.6,
                activation: Activation::Elu,
                ..base
            },
        }
    }

    /// Defaults with per-dataset adjustments (GAT averages 8 output heads on PubMed).
    pub fn for_dataset(kind: ModelKind, dataset: &str) -> Self {
        let mut c = Self::new(kind);
        if kind == ModelKind::Gat && dataset.eq_ignore_ascii_case("pubmed") {
            c.heads = vec![8, 8];
        }
        c
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Disables every source of randomness in the forward pass.
    pub fn without_dropout(mut self) -> Self {
        self.dropout = 0.0;
        self.attn_dropout = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.kind)));
        for (name, p) in [("dropout", self.dropout), ("attn_dropout", self.attn_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1)"));
            }
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        self.activation.validate()?;
        match self.kind {
            ModelKind::Gcn => {
                if !self.heads.is_empty() || self.k_hops.is_some() {
                    return bad("heads and k_hops do not apply".into());
                }
            }
            ModelKind::Sgc => {
                if !self.hidden_dims.is_empty() || !self.heads.is_empty() {
                    return bad("SGC has no hidden layers or heads".into());
                }
                if self.k_hops.is_none() {
                    return bad("k_hops is required".into());
                }
            }
            ModelKind::Gat => {
                if self.heads.len() != self.hidden_dims.len() + 1 {
                    return bad(format!(
                        "{} head counts for {} layers",
                        self.heads.len(),
                        self.hidden_dims.len() + 1
                    ));
                }
                if self.heads.contains(&0) {
                    return bad("head counts must be positive".into());
                }
                if self.k_hops.is_some() {
                    return bad("k_hops does not apply".into());
                }
                Activation::LeakyRelu(self.negative_slope).validate()?;
            }
        }
        if self.kind != ModelKind::Gat && self.attn_dropout != 0.0 {
            return bad("attn_dropout applies to GAT only".into());
        }
        Ok(())
    }
}
