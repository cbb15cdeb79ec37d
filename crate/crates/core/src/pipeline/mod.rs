//! Full-batch training and evaluation.

mod adam;
pub mod checkpoint;

pub use adam::Adam;
pub use checkpoint::Checkpoint;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::gallery::{Model, ModelKind};
use crate::graph::Graph;
use crate::rng::{stream, Stream};
use crate::tensor::{ops::log_softmax_row, DenseMatrix};

/// Validation metric used for early stopping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    ValLoss,
    ValAccuracy,
}

impl Monitor {
    pub fn as_str(self) -> &'static str {
        match self {
            Monitor::ValLoss => "val_loss",
            Monitor::ValAccuracy => "val_accuracy",
        }
    }

    /// Strict improvement, no minimum delta.
    pub fn improves(self, candidate: f64, best: f64) -> bool {
        match self {
            Monitor::ValLoss => candidate < best,
            Monitor::ValAccuracy => candidate > best,
        }
    }

    fn worst(self) -> f64 {
        match self {
            Monitor::ValLoss => f64::INFINITY,
            Monitor::ValAccuracy => f64::NEG_INFINITY,
        }
    }

    fn pick(self, r: &EpochRecord) -> f64 {
        match self {
            Monitor::ValLoss => r.val_loss,
            Monitor::ValAccuracy => r.val_acc,
        }
    }
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Monitor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "val_loss" => Ok(Monitor::ValLoss),
            "val_accuracy" | "val_acc" => Ok(Monitor::ValAccuracy),
            other => Err(Error::Config(format!(
                "unknown monitor '{other}' (available: val_loss, val_accuracy)"
            ))),
        }
    }
}

/// Optimization settings. `patience == 0` disables early stopping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    /// L2 coefficient applied to parameters flagged for decay.
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub monitor: Monitor,
    pub seed: u64,
}

impl TrainConfig {
    pub fn gcn() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 5e-4,
            max_epochs: 200,
            patience: 10,
            monitor: Monitor::ValLoss,
            seed: 0,
        }
    }

    pub fn sgc(weight_decay: f64) -> Self {
        Self {
            lr: 0.2,
            weight_decay,
            max_epochs: 100,
            patience: 0,
            monitor: Monitor::ValAccuracy,
            seed: 0,
        }
    }

    pub fn gat() -> Self {
        Self {
            lr: 0.005,
            weight_decay: 5e-4,
            max_epochs: 1000,
            patience: 100,
            monitor: Monitor::ValAccuracy,
            seed: 0,
        }
    }

    /// Recipe for `kind` on the named dataset.
    pub fn for_dataset(kind: ModelKind, dataset: &str) -> Self {
        let d = dataset.to_ascii_lowercase();
        match kind {
            ModelKind::Gcn => Self::gcn(),
            ModelKind::Sgc => Self::sgc(sgc_weight_decay(&d)),
            ModelKind::Gat if d == "pubmed" => Self {
                weight_decay: 1e-3,
                ..Self::gat()
            },
            ModelKind::Gat => Self::gat(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Default SGC weight decay per dataset; other datasets get the Cora value.
pub fn sgc_weight_decay(dataset: &str) -> f64 {
    match dataset.to_ascii_lowercase().as_str() {
        "citeseer" => 1e-4,
        _ => 2e-5,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Per-epoch metrics. Epoch numbers are 1-based; `best_epoch` is 0 only for
/// an empty history.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl History {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub loss: f64,
    pub n_evaluated: usize,
    pub n_correct: usize,
}

/// Mean over `mask` of `-log softmax(logits)[i, labels[i]]`, recorded on the tape.
pub fn masked_cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize], mask: &[usize]) -> Result<Var> {
    tape.softmax_cross_entropy(logits, labels, mask)
}

/// Loss and accuracy of fixed logits over `indices`. Ties in the argmax go to
/// the lowest class index.
pub fn score(logits: &DenseMatrix, labels: &[usize], indices: &[usize]) -> Result<EvalReport> {
    if indices.is_empty() {
        return Err(Error::Contract("evaluation over an empty node set".into()));
    }
    if labels.len() != logits.rows() {
        return Err(Error::dim("score", format!("{} labels for {} rows", labels.len(), logits.rows())));
    }
    let pred = logits.argmax_rows();
    let mut loss = 0.0;
    let mut correct = 0;
    for &i in indices {
        let label = *labels
            .get(i)
            .ok_or_else(|| Error::Validation(format!("node index {i} out of range")))?;
        if label >= logits.cols() {
            return Err(Error::Validation(format!("label {label} has no logit column")));
        }
        loss -= log_softmax_row(logits.row(i))[label];
        if pred[i] == label {
            correct += 1;
        }
    }
    Ok(EvalReport {
        accuracy: correct as f64 / indices.len() as f64,
        loss: loss / indices.len() as f64,
        n_evaluated: indices.len(),
        n_correct: correct,
    })
}

/// Inference-mode evaluation of `model` on `indices` of `graph`.
pub fn evaluate(model: &Model, graph: &Graph, indices: &[usize]) -> Result<EvalReport> {
    if indices.is_empty() {
        return Err(Error::Contract("evaluation over an empty node set".into()));
    }
    score(&model.logits()?, graph.labels(), indices)
}

/// Trains `model` with a fresh optimizer; see [`train_from`].
pub fn train(model: &mut Model, graph: &Graph, cfg: &TrainConfig) -> Result<History> {
    if !model.is_built() {
        return Err(Error::Lifecycle("train called before build".into()));
    }
    let mut opt = Adam::new(model.params());
    train_from(model, graph, cfg, &mut opt, 0)
}

/// Runs epochs `start_epoch + 1 ..= cfg.max_epochs`: training-mode forward,
/// masked loss on the train split, backward, Adam step, then inference on
/// the validation split. Stops after `cfg.patience` epochs without strict
/// improvement of the monitored metric and restores the best parameters.
pub fn train_from(
    model: &mut Model,
    graph: &Graph,
    cfg: &TrainConfig,
    opt: &mut Adam,
    start_epoch: usize,
) -> Result<History> {
    cfg.validate()?;
    if !model.is_built() {
        return Err(Error::Lifecycle("train called before build".into()));
    }
    let split = graph.split();
    if split.train().is_empty() || split.val().is_empty() {
        return Err(Error::Contract("train and validation splits must be non-empty".into()));
    }
    model.process(graph)?;
    let labels = graph.labels();
    let mut rng = stream(cfg.seed, Stream::Dropout);
    let mut history = History::default();
    let mut best_value = cfg.monitor.worst();
    let mut best_params = model.params().snapshot();
    let mut since_best = 0;

    for epoch in start_epoch + 1..=cfg.max_epochs {
        let mut tape = model.tape();
        let logits = model.forward(&mut tape, true, &mut rng)?;
        let loss = masked_cross_entropy(&mut tape, logits, labels, split.train())?;
        let train_loss = tape.value(loss).get(0, 0);
        if !train_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: train_loss });
        }
        let train_acc = score(tape.value(logits), labels, split.train())?.accuracy;
        let params = model.params_mut();
        params.zero_grad();
        tape.backward(loss, params)?;
        opt.step(params, cfg.lr, cfg.weight_decay)?;

        let val = evaluate(model, graph, split.val())?;
        if !val.loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: val.loss });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss: val.loss,
            val_acc: val.accuracy,
        };
        let value = cfg.monitor.pick(&record);
        history.records.push(record);
        history.stopped_epoch = epoch;
        if cfg.monitor.improves(value, best_value) {
            best_value = value;
            history.best_epoch = epoch;
            best_params = model.params().snapshot();
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                break;
            }
        }
    }
    if history.best_epoch > 0 {
        model.params_mut().restore(&best_params);
    }
    model.params_mut().zero_grad();
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = DenseMatrix::zeros(3, 7);
        let r = score(&logits, &[0, 3, 6], &[0, 1, 2]).unwrap();
        assert!((r.loss - 7f64.ln()).abs() < 1e-12);
        // All ties resolve to class 0.
        assert_eq!(r.n_correct, 1);
    }

    #[test]
    fn confident_logits_give_small_loss() {
        let logits = DenseMatrix::from_rows(&[[50.0, 0.0], [0.0, 50.0]]).unwrap();
        let r = score(&logits, &[0, 1], &[0, 1]).unwrap();
        assert!(r.loss < 1e-20);
        assert_eq!(r.accuracy, 1.0);
        let r = score(&logits, &[1, 0], &[0, 1]).unwrap();
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn mixed_logits_match_direct_formula() {
        let logits = DenseMatrix::from_rows(&[[1.0, 2.0, 0.5], [0.3, -1.0, 2.0], [0.0, 0.0, 1.0]]).unwrap();
        let labels = [1, 0, 2];
        let mut expect = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            let row = logits.row(i);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            expect += -(row[l].exp() / z).ln();
        }
        expect /= 3.0;
        let r = score(&logits, &labels, &[0, 1, 2]).unwrap();
        assert!((r.loss - expect).abs() < 1e-12);
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_indices_rejected() {
        assert!(matches!(score(&DenseMatrix::zeros(1, 2), &[0], &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn monitor_is_strict() {
        assert!(!Monitor::ValLoss.improves(1.0, 1.0));
        assert!(Monitor::ValLoss.improves(0.9, 1.0));
        assert!(!Monitor::ValAccuracy.improves(0.5, 0.5));
        assert_eq!("val_accuracy".parse::<Monitor>().unwrap(), Monitor::ValAccuracy);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { lr: 0.0, ..TrainConfig::gcn() }.validate().is_err());
        assert!(TrainConfig { max_epochs: 0, ..TrainConfig::gcn() }.validate().is_err());
        assert_eq!(TrainConfig::for_dataset(ModelKind::Gat, "PubMed").weight_decay, 1e-3);
    }
}
