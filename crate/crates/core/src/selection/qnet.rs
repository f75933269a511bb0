use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;

use super::dataset::QualityDataset;
use super::features::{FeatureVector, FEATURE_DIM, FEATURE_SCHEMA};
use crate::error::{Error, Result};
use crate::learncore::{load_model, save_model, softmax, train_supervised, Mlp, SupervisedData, TrainHyper, TrainReport};
use crate::rng::{self, tag};

pub const EMBEDDING_DIM: usize = 32;

/// Quality-bin classifier; its hidden layer is the frame embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct QNet {
    pub mlp: Mlp,
    pub bins: usize,
}

impl QNet {
    pub fn zeros(bins: usize) -> Result<Self> {
        Self::check_bins(bins)?;
        Ok(QNet { mlp: Mlp::zeros(&[FEATURE_DIM, EMBEDDING_DIM, bins])?, bins })
    }

    pub fn random(bins: usize, seed: u64) -> Result<Self> {
        Self::check_bins(bins)?;
        let mlp = Mlp::new(&[FEATURE_DIM, EMBEDDING_DIM, bins], 1.0, &mut rng::stream(seed, &[tag::TRAIN, 1]))?;
        Ok(QNet { mlp, bins })
    }

    fn check_bins(bins: usize) -> Result<()> {
        if bins < 2 {
            return Err(Error::Config(format!("need at least 2 quality bins, got {bins}")));
        }
        Ok(())
    }

    /// Logits and the post-activation hidden units.
    pub fn embed(&self, feat: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut t = self.mlp.forward_trace(feat)?;
        let logits = t.acts.pop().unwrap();
        let emb = t.acts.pop().unwrap();
        Ok((logits, emb))
    }

    pub fn posterior(&self, feat: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.mlp.forward(feat)?))
    }

    /// Argmax bin, ties to the lower bin.
    pub fn predict_bin(&self, feat: &[f64]) -> Result<usize> {
        let logits = self.mlp.forward(feat)?;
        Ok(argmax(&logits))
    }

    pub fn header(&self) -> String {
        format!("[qnet] bins={} features={} schema={}", self.bins, FEATURE_DIM, FEATURE_SCHEMA)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_model(path, &self.mlp, &[self.header()])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (mlp, comments) = load_model(path)?;
        let header = comments
            .iter()
            .find(|c| c.starts_with("[qnet]"))
            .ok_or_else(|| Error::Version(format!("{} has no [qnet] header", path.display())))?;
        let mut bins = None;
        for kv in header["[qnet]".len()..].split_whitespace() {
            match kv.split_once('=') {
                Some(("bins", v)) => bins = v.parse::<usize>().ok(),
                Some(("features", v)) if v != FEATURE_DIM.to_string() => {
                    return Err(Error::Version(format!("model expects {v} features, this build uses {FEATURE_DIM}")))
                }
                Some(("schema", v)) if v != FEATURE_SCHEMA.to_string() => {
                    return Err(Error::Version(format!("feature schema {v} is not supported")))
                }
                _ => {}
            }
        }
        let bins = bins.ok_or_else(|| Error::Version("[qnet] header lacks bins".into()))?;
        if mlp.sizes() != [FEATURE_DIM, EMBEDDING_DIM, bins] {
            return Err(Error::Shape(format!("qnet layer sizes {:?} do not match its header", mlp.sizes())));
        }
        Ok(QNet { mlp, bins })
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Logits and embedding of one feature vector.
pub fn qnet_embed(model: &QNet, feat: &FeatureVector) -> Result<(Vec<f64>, Vec<f64>)> {
    model.embed(feat.as_slice())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QNetHyper {
    pub train: TrainHyper,
    /// Share of world seeds held out for model selection.
    pub validation_share: f64,
    pub seed: u64,
}

impl Default for QNetHyper {
    fn default() -> Self {
        QNetHyper { train: TrainHyper { learning_rate: 3e-3, batch_size: 32, epochs: 40, clip_norm: Some(5.0) }, validation_share: 0.1, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QNetReport {
    pub train: TrainReport,
    pub train_rows: usize,
    pub validation_rows: usize,
    /// Argmax accuracy on the validation rows (training rows if none).
    pub validation_accuracy: f64,
}

/// Fits a QNet with cross-entropy, holding out whole worlds for validation
/// and keeping the parameters with the best validation loss.
pub fn train_qnet(data: &QualityDataset, hyper: &QNetHyper) -> Result<(QNet, QNetReport)> {
    if data.records.is_empty() {
        return Err(Error::DegenerateData("quality dataset is empty".into()));
    }
    let labels: BTreeSet<usize> = data.records.iter().map(|r| r.bin).collect();
    if labels.len() < 2 {
        return Err(Error::DegenerateData(format!("quality dataset has a single label {:?}", labels)));
    }
    if let Some(&b) = labels.iter().find(|&&b| b >= data.bins) {
        return Err(Error::Bounds { index: b, len: data.bins });
    }
    if !(0.0..1.0).contains(&hyper.validation_share) {
        return Err(Error::Config(format!("validation share must lie in [0, 1), got {}", hyper.validation_share)));
    }

    let mut worlds: Vec<u64> = data.records.iter().map(|r| r.world_seed).collect::<BTreeSet<_>>().into_iter().collect();
    let mut split_rng = rng::stream(hyper.seed, &[tag::TRAIN, 2]);
    worlds.shuffle(&mut split_rng);
    let n_val = if worlds.len() < 2 { 0 } else { ((worlds.len() as f64 * hyper.validation_share).round() as usize).max(1) };
    let val_worlds: BTreeSet<u64> = worlds[..n_val].iter().copied().collect();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, r) in data.records.iter().enumerate() {
        if val_worlds.contains(&r.world_seed) {
            val.push(i);
        } else {
            train.push(i);
        }
    }

    let sup = SupervisedData::Classes {
        inputs: data.records.iter().map(|r| r.features.0.to_vec()).collect(),
        labels: data.records.iter().map(|r| r.bin).collect(),
    };
    let mut net = QNet::random(data.bins, hyper.seed)?;
    let report = train_supervised(&mut net.mlp, &sup, &train, &val, &hyper.train, &mut rng::stream(hyper.seed, &[tag::TRAIN, 3]))?;
    let eval = if val.is_empty() { &train } else { &val };
    let correct = eval
        .iter()
        .map(|&i| net.predict_bin(&data.records[i].features.0).map(|b| usize::from(b == data.records[i].bin)))
        .sum::<Result<usize>>()?;
    let accuracy = correct as f64 / eval.len() as f64;
    Ok((net, QNetReport { train: report, train_rows: train.len(), validation_rows: val.len(), validation_accuracy: accuracy }))
}
