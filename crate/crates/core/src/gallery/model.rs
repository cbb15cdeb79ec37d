use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::Rng as _;

use super::{ModelConfig, ModelKind};
use crate::autodiff::{ParamStore, Parameter, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::pipeline::{self, EvalReport, History, TrainConfig};
use crate::rng::{stream, Rng, Stream};
use crate::tensor::{Activation, BackendId, Context, DenseMatrix, EdgeIndex};
use crate::transforms::{self, NormCache, NormalizedAdjacency};

/// Per-edge attention coefficients keyed `(layer, head)`.
pub type AttentionMap = Vec<((usize, usize), Vec<f64>)>;

/// Inputs cached by [`Model::process`].
#[derive(Clone, Debug)]
struct Processed {
    key: u64,
    s: Arc<NormalizedAdjacency>,
    /// Row-normalized `X`, or `S^k X` for SGC.
    features: Arc<DenseMatrix>,
    edges: Option<GatEdges>,
    n_classes: usize,
}

#[derive(Clone, Debug)]
struct GatEdges {
    index: Arc<EdgeIndex>,
    dst: Arc<[usize]>,
    src: Arc<[usize]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Dims {
    in_dim: usize,
    n_classes: usize,
}

/// A gallery model: configuration, execution context, cached inputs and
/// parameters.
#[derive(Clone)]
pub struct Model {
    config: ModelConfig,
    ctx: Context,
    cache: Option<Arc<NormCache>>,
    processed: Option<Processed>,
    dims: Option<Dims>,
    params: ParamStore,
}

fn graph_key(g: &Graph) -> u64 {
    let mut h = DefaultHasher::new();
    g.adjacency().fingerprint().hash(&mut h);
    g.features().shape().hash(&mut h);
    for v in g.features().data() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches shape")
}

impl Model {
    pub fn new(config: ModelConfig, backend: BackendId) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            ctx: Context::new(backend),
            cache: None,
            processed: None,
            dims: None,
            params: ParamStore::new(),
        })
    }

    /// Shares normalized adjacency operators with other models using `cache`.
    pub fn with_cache(mut self, cache: Arc<NormCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn context(&self) -> Context {
        self.ctx
    }

    pub fn backend(&self) -> BackendId {
        self.ctx.backend()
    }

    /// Switches the kernel backend. Only allowed before [`Model::build`];
    /// a built model keeps the backend it was built for.
    pub fn set_backend(&mut self, id: BackendId) -> Result<BackendId> {
        if self.is_built() && id != self.ctx.backend() {
            return Err(Error::Lifecycle(
                "cannot switch backend after build; create a new model instead".into(),
            ));
        }
        Ok(self.ctx.set_backend(id))
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn is_processed(&self) -> bool {
        self.processed.is_some()
    }

    pub fn is_built(&self) -> bool {
        self.dims.is_some()
    }

    /// The cached propagation operator `S`.
    pub fn operator(&self) -> Option<&NormalizedAdjacency> {
        self.processed.as_ref().map(|p| p.s.as_ref())
    }

    /// The cached model input: row-normalized features, or `S^k X` for SGC.
    pub fn inputs(&self) -> Option<&DenseMatrix> {
        self.processed.as_ref().map(|p| p.features.as_ref())
    }

    /// Caches the transformed inputs of `graph`. Calling it again with the
    /// same graph keeps the existing cache.
    pub fn process(&mut self, graph: &Graph) -> Result<&mut Self> {
        let key = graph_key(graph);
        if self.processed.as_ref().is_some_and(|p| p.key == key) {
            return Ok(self);
        }
        let s = match &self.cache {
            Some(c) => c.get_or_compute(graph.adjacency())?,
            None => Arc::new(transforms::normalize_pipeline(graph.adjacency())?),
        };
        let x = transforms::row_normalize_features(graph.features());
        let features = match self.config.kind {
            ModelKind::Sgc => {
                let k = self.config.k_hops.unwrap_or(0);
                transforms::sgc_precompute_in(&self.ctx, &s, &x, k)?
            }
            _ => x,
        };
        let edges = match self.config.kind {
            ModelKind::Gat => {
                let index = EdgeIndex::from_pattern(&s.matrix)?;
                Some(GatEdges {
                    dst: index.dst().into(),
                    src: index.src().into(),
                    index: Arc::new(index),
                })
            }
            _ => None,
        };
        self.processed = Some(Processed {
            key,
            s,
            features: Arc::new(features),
            edges,
            n_classes: graph.n_classes(),
        });
        Ok(self)
    }

    /// Allocates parameters for the processed graph's input width and class count.
    pub fn build(&mut self) -> Result<&mut Self> {
        let p = self
            .processed
            .as_ref()
            .ok_or_else(|| Error::Lifecycle("build called before process".into()))?;
        let (in_dim, n_classes) = (p.features.cols(), p.n_classes);
        self.build_with(in_dim, n_classes)
    }

    /// Allocates Glorot-uniform weights and zero biases, seeded by `config.seed`.
    pub fn build_with(&mut self, in_dim: usize, n_classes: usize) -> Result<&mut Self> {
        if self.processed.is_none() {
            return Err(Error::Lifecycle("build called before process".into()));
        }
        if n_classes == 0 {
            return Err(Error::Config("n_classes must be positive".into()));
        }
        let mut rng = stream(self.config.seed, Stream::Init);
        let mut params = ParamStore::new();
        let zeros = |c: usize| DenseMatrix::zeros(1, c);
        match self.config.kind {
            ModelKind::Gcn => {
                let dims: Vec<usize> = std::iter::once(in_dim)
                    .chain(self.config.hidden_dims.iter().copied())
                    .chain(std::iter::once(n_classes))
                    .collect();
                for (l, w) in dims.windows(2).enumerate() {
                    params.push(Parameter::new(format!("w{l}"), glorot(w[0], w[1], &mut rng), l == 0));
                    params.push(Parameter::new(format!("b{l}"), zeros(w[1]), false));
                }
            }
            ModelKind::Sgc => {
                params.push(Parameter::new("w", glorot(in_dim, n_classes, &mut rng), true));
                params.push(Parameter::new("b", zeros(n_classes), true));
            }
            ModelKind::Gat => {
                let mut width = in_dim;
                let n_layers = self.config.heads.len();
                for (l, &heads) in self.config.heads.iter().enumerate() {
                    let last = l + 1 == n_layers;
                    let f = if last { n_classes } else { self.config.hidden_dims[l] };
                    for h in 0..heads {
                        params.push(Parameter::new(format!("w{l}_h{h}"), glorot(width, f, &mut rng), true));
                        params.push(Parameter::new(format!("a_src{l}_h{h}"), glorot(f, 1, &mut rng), true));
                        params.push(Parameter::new(format!("a_dst{l}_h{h}"), glorot(f, 1, &mut rng), true));
                    }
                    let out = if last { f } else { heads * f };
                    params.push(Parameter::new(format!("b{l}"), zeros(out), false));
                    width = out;
                }
            }
        }
        self.params = params;
        self.dims = Some(Dims { in_dim, n_classes });
        Ok(self)
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.dims.map(|d| d.n_classes)
    }

    pub fn in_dim(&self) -> Option<usize> {
        self.dims.map(|d| d.in_dim)
    }

    /// A fresh tape on this model's context.
    pub fn tape(&self) -> Tape {
        Tape::new(self.ctx)
    }

    /// Records the forward pass on `tape` and returns the raw logits
    /// (`n x C`). `rng` drives dropout and is untouched when `training` is false.
    pub fn forward(&self, tape: &mut Tape, training: bool, rng: &mut Rng) -> Result<Var> {
        let p = self
            .processed
            .as_ref()
            .ok_or_else(|| Error::Lifecycle("forward called before process".into()))?;
        let dims = self
            .dims
            .ok_or_else(|| Error::Lifecycle("forward called before build".into()))?;
        if p.features.cols() != dims.in_dim {
            return Err(Error::dim(
                "forward",
                format!("model built for {} input features, graph has {}", dims.in_dim, p.features.cols()),
            ));
        }
        let x = tape.constant(p.features.as_ref().clone());
        match self.config.kind {
            ModelKind::Gcn => self.forward_gcn(tape, p, x, training, rng),
            ModelKind::Sgc => self.forward_sgc(tape, x, training, rng),
            ModelKind::Gat => self.forward_gat(tape, p, x, training, rng, None),
        }
    }

    /// Inference-mode logits.
    pub fn logits(&self) -> Result<DenseMatrix> {
        let mut tape = self.tape();
        let mut rng = stream(self.config.seed, Stream::Dropout);
        let out = self.forward(&mut tape, false, &mut rng)?;
        Ok(tape.value(out).clone())
    }

    fn slot(&self, name: &str) -> usize {
        self.params.slot_of(name).expect("parameter allocated by build")
    }

    fn param(&self, tape: &mut Tape, name: &str) -> Var {
        tape.param(&self.params, self.slot(name))
    }

    /// `Z = S act(S X W0 + b0) W1 + b1`, generalized to any number of hidden layers.
    fn forward_gcn(&self, tape: &mut Tape, p: &Processed, x: Var, training: bool, rng: &mut Rng) -> Result<Var> {
        let n_layers = self.config.hidden_dims.len() + 1;
        let mut h = x;
        for l in 0..n_layers {
            h = tape.dropout(h, self.config.dropout, rng, training)?;
            let w = self.param(tape, &format!("w{l}"));
            let b = self.param(tape, &format!("b{l}"));
            h = tape.matmul(h, w)?;
            h = tape.spmm(&p.s.matrix, h)?;
            h = tape.add_bias(h, b)?;
            if l + 1 < n_layers {
                h = tape.activation(h, self.config.activation)?;
            }
        }
        Ok(h)
    }

    /// `Z = (S^k X) W + b` on the precomputed features.
    fn forward_sgc(&self, tape: &mut Tape, x: Var, training: bool, rng: &mut Rng) -> Result<Var> {
        let h = tape.dropout(x, self.config.dropout, rng, training)?;
        let w = self.param(tape, "w");
        let b = self.param(tape, "b");
        let z = tape.matmul(h, w)?;
        tape.add_bias(z, b)
    }

    /// Multi-head attention layers. For edge `j -> i` (segment `i`) the score is
    /// `LeakyReLU(a_src . W h_i + a_dst . W h_j)`, normalized over the segment.
    /// Hidden layers concatenate heads and apply the configured activation;
    /// the output layer averages heads.
    fn forward_gat(
        &self,
        tape: &mut Tape,
        p: &Processed,
        x: Var,
        training: bool,
        rng: &mut Rng,
        mut record: Option<&mut AttentionMap>,
    ) -> Result<Var> {
        let edges = p.edges.as_ref().expect("GAT models cache an edge index");
        let n = p.features.rows();
        let n_layers = self.config.heads.len();
        let mut h = x;
        for (l, &heads) in self.config.heads.iter().enumerate() {
            let last = l + 1 == n_layers;
            let input = tape.dropout(h, self.config.dropout, rng, training)?;
            let mut outs = Vec::with_capacity(heads);
            for k in 0..heads {
                let w = self.param(tape, &format!("w{l}_h{k}"));
                let a_src = self.param(tape, &format!("a_src{l}_h{k}"));
                let a_dst = self.param(tape, &format!("a_dst{l}_h{k}"));
                let wh = tape.matmul(input, w)?;
                let s_self = tape.matmul(wh, a_src)?;
                let s_neigh = tape.matmul(wh, a_dst)?;
                let e_self = tape.gather_rows(s_self, &edges.dst)?;
                let e_neigh = tape.gather_rows(s_neigh, &edges.src)?;
                let e = tape.add(e_self, e_neigh)?;
                let e = tape.activation(e, Activation::LeakyRelu(self.config.negative_slope))?;
                let alpha = tape.segment_softmax(e, &edges.dst, n)?;
                if let Some(r) = record.as_deref_mut() {
                    r.push(((l, k), tape.value(alpha).data().to_vec()));
                }
                let alpha = tape.dropout(alpha, self.config.attn_dropout, rng, training)?;
                outs.push(tape.edge_aggregate(&edges.index, alpha, wh)?);
            }
            let b = self.param(tape, &format!("b{l}"));
            h = if last {
                let m = tape.mean(&outs)?;
                tape.add_bias(m, b)?
            } else {
                let c = tape.concat(&outs)?;
                let c = tape.add_bias(c, b)?;
                tape.activation(c, self.config.activation)?
            };
        }
        Ok(h)
    }

    /// Inference-mode attention coefficients of every GAT head, keyed
    /// `(layer, head)`, each aligned with the edge order of [`EdgeIndex`].
    pub fn attention(&self) -> Result<AttentionMap> {
        if self.config.kind != ModelKind::Gat {
            return Err(Error::Contract("attention weights exist only for GAT".into()));
        }
        let p = self
            .processed
            .as_ref()
            .ok_or_else(|| Error::Lifecycle("attention requested before process".into()))?;
        if self.dims.is_none() {
            return Err(Error::Lifecycle("attention requested before build".into()));
        }
        let mut tape = self.tape();
        let mut rng = stream(self.config.seed, Stream::Dropout);
        let x = tape.constant(p.features.as_ref().clone());
        let mut out = Vec::new();
        self.forward_gat(&mut tape, p, x, false, &mut rng, Some(&mut out))?;
        Ok(out)
    }

    /// Trains on `graph`'s split; see [`pipeline::train`].
    pub fn train(&mut self, graph: &Graph, cfg: &TrainConfig) -> Result<History> {
        pipeline::train(self, graph, cfg)
    }

    /// Evaluates on `indices`; see [`pipeline::evaluate`].
    pub fn test(&self, graph: &Graph, indices: &[usize]) -> Result<EvalReport> {
        pipeline::evaluate(self, graph, indices)
    }
}
