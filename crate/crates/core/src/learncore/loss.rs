use super::mlp::{Grads, Mlp};
use crate::error::{Error, Result};

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// One transition for the clipped policy objective. The network output is
/// `actions` logits followed by one value estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoSample {
    pub state: Vec<f64>,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
    /// Actions that may be chosen in this state; `None` means all.
    pub valid: Option<Vec<bool>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoCoeffs {
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
}

impl Default for PpoCoeffs {
    fn default() -> Self {
        PpoCoeffs { clip: 0.2, value: 0.5, entropy: 0.01 }
    }
}

pub enum Objective<'a> {
    /// Mean softmax cross-entropy of logits against class labels.
    CrossEntropy { inputs: &'a [Vec<f64>], labels: &'a [usize] },
    /// Mean over samples of the summed squared error.
    Mse { inputs: &'a [Vec<f64>], targets: &'a [Vec<f64>] },
    /// Mean of `-min(r A, clip(r) A) + c_v (R - V)^2 - c_e H`.
    PpoSurrogate { samples: &'a [PpoSample], coeffs: PpoCoeffs },
}

impl Objective<'_> {
    fn len(&self) -> usize {
        match self {
            Objective::CrossEntropy { inputs, .. } | Objective::Mse { inputs, .. } => inputs.len(),
            Objective::PpoSurrogate { samples, .. } => samples.len(),
        }
    }

    fn check(&self, m: &Mlp) -> Result<()> {
        if self.len() == 0 {
            return Err(Error::DegenerateData("empty batch".into()));
        }
        match self {
            Objective::CrossEntropy { inputs, labels } => {
                if labels.len() != inputs.len() {
                    return Err(Error::Shape("labels and inputs differ in length".into()));
                }
                if let Some(&l) = labels.iter().find(|&&l| l >= m.output_size()) {
                    return Err(Error::Bounds { index: l, len: m.output_size() });
                }
            }
            Objective::Mse { inputs, targets } => {
                if targets.len() != inputs.len() {
                    return Err(Error::Shape("targets and inputs differ in length".into()));
                }
                if targets.iter().any(|t| t.len() != m.output_size()) {
                    return Err(Error::Shape("target width differs from network output".into()));
                }
            }
            Objective::PpoSurrogate { samples, .. } => {
                let actions = m.output_size().checked_sub(1).filter(|&a| a > 0);
                let actions = actions.ok_or_else(|| Error::Shape("policy network needs at least two outputs".into()))?;
                for s in samples.iter() {
                    if s.action >= actions {
                        return Err(Error::Bounds { index: s.action, len: actions });
                    }
                    if let Some(v) = &s.valid {
                        if v.len() != actions || !v[s.action] {
                            return Err(Error::Domain("sampled action is not valid in its state".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn masked_logits(logits: &[f64], valid: Option<&Vec<bool>>) -> Vec<f64> {
    match valid {
        None => logits.to_vec(),
        Some(v) => logits.iter().zip(v).map(|(&l, &ok)| if ok { l } else { f64::NEG_INFINITY }).collect(),
    }
}

/// Per-sample loss and gradient with respect to the network output.
fn sample_loss(obj: &Objective, i: usize, out: &[f64]) -> (f64, Vec<f64>) {
    match obj {
        Objective::CrossEntropy { labels, .. } => {
            let p = softmax(out);
            let loss = -log_softmax(out)[labels[i]];
            let mut d = p;
            d[labels[i]] -= 1.0;
            (loss, d)
        }
        Objective::Mse { targets, .. } => {
            let t = &targets[i];
            let loss = out.iter().zip(t).map(|(o, t)| (o - t) * (o - t)).sum();
            (loss, out.iter().zip(t).map(|(o, t)| 2.0 * (o - t)).collect())
        }
        Objective::PpoSurrogate { samples, coeffs } => {
            let s = &samples[i];
            let n = out.len() - 1;
            let logits = masked_logits(&out[..n], s.valid.as_ref());
            let p = softmax(&logits);
            let logp = log_softmax(&logits);
            let value = out[n];
            let mut d = vec![0.0; n + 1];

            let ratio = (logp[s.action] - s.old_log_prob).exp();
            let a = s.advantage;
            let unclipped = ratio * a;
            let clipped = ratio.clamp(1.0 - coeffs.clip, 1.0 + coeffs.clip) * a;
            let policy_loss = -unclipped.min(clipped);
            // gradient flows only when the unclipped term is the active minimum
            let active = unclipped <= clipped;
            if active {
                // d(-r A)/dz_k = -r A (1[k=a] - p_k)
                for k in 0..n {
                    let ind = if k == s.action { 1.0 } else { 0.0 };
                    d[k] += -ratio * a * (ind - p[k]);
                }
            }

            // H = -sum p log p, dH/dz_k = -p_k (log p_k + H)
            let terms: Vec<(f64, f64)> = p.iter().zip(&logp).filter(|(pk, _)| **pk > 0.0).map(|(a, b)| (*a, *b)).collect();
            let entropy: f64 = -terms.iter().map(|(pk, lk)| pk * lk).sum::<f64>();
            for k in 0..n {
                if p[k] > 0.0 {
                    d[k] += coeffs.entropy * p[k] * (logp[k] + entropy);
                }
            }

            let err = value - s.ret;
            d[n] = 2.0 * coeffs.value * err;
            (policy_loss + coeffs.value * err * err - coeffs.entropy * entropy, d)
        }
    }
}

fn input<'a>(obj: &'a Objective, i: usize) -> &'a [f64] {
    match obj {
        Objective::CrossEntropy { inputs, .. } | Objective::Mse { inputs, .. } => &inputs[i],
        Objective::PpoSurrogate { samples, .. } => &samples[i].state,
    }
}

/// Batch-mean loss and its parameter gradients.
pub fn loss_and_grad(m: &Mlp, obj: &Objective) -> Result<(f64, Grads)> {
    obj.check(m)?;
    let n = obj.len();
    let mut grads = Grads::zeros_like(m);
    let mut total = 0.0;
    for i in 0..n {
        let trace = m.forward_trace(input(obj, i))?;
        let (loss, d) = sample_loss(obj, i, trace.output());
        total += loss;
        m.backward(&trace, &d, &mut grads);
    }
    let loss = total / n as f64;
    grads.scale(1.0 / n as f64);
    if !loss.is_finite() || grads.values().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite loss or gradient".into()));
    }
    Ok((loss, grads))
}

pub fn loss_value(m: &Mlp, obj: &Objective) -> Result<f64> {
    obj.check(m)?;
    let n = obj.len();
    let mut total = 0.0;
    for i in 0..n {
        let out = m.forward(input(obj, i))?;
        total += sample_loss(obj, i, &out).0;
    }
    let loss = total / n as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite loss".into()));
    }
    Ok(loss)
}
