use std::path::Path;

use rand::Rng;

use crate::annotator::AnnotationType;
use crate::error::{Error, Result};
use crate::learncore::{load_model, log_softmax, save_model, Mlp};
use crate::rng::{self, tag};
use crate::selection::{FEATURE_DIM, FEATURE_SCHEMA};

pub const HIDDEN: usize = 64;

/// Frame features, QNet bin posterior, step `g / G_max` and episode cost
/// `tc / θ_mask`, concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyState(pub Vec<f64>);

impl PolicyState {
    pub fn new(features: &[f64], posterior: &[f64], step: usize, g_max: usize, episode_cost: f64, mask_cost: f64) -> Result<Self> {
        if features.len() != FEATURE_DIM {
            return Err(Error::Shape(format!("expected {FEATURE_DIM} features, got {}", features.len())));
        }
        let total: f64 = posterior.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!("posterior sums to {total}")));
        }
        if g_max == 0 || mask_cost <= 0.0 {
            return Err(Error::Config("G_max and the mask cost must be positive".into()));
        }
        let mut v = Vec::with_capacity(features.len() + posterior.len() + 2);
        v.extend_from_slice(features);
        v.extend_from_slice(posterior);
        v.push(step as f64 / g_max as f64);
        v.push(episode_cost / mask_cost);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite policy state".into()));
        }
        Ok(PolicyState(v))
    }

    pub fn dim(bins: usize) -> usize {
        FEATURE_DIM + bins + 2
    }
}

/// Actor-critic network: a tanh trunk feeding `L` action logits and one
/// value output.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyModel {
    pub mlp: Mlp,
    pub actions: Vec<AnnotationType>,
    pub bins: usize,
}

impl PolicyModel {
    pub fn new(actions: &[AnnotationType], bins: usize, seed: u64) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Config("action pool is empty".into()));
        }
        let sizes = [PolicyState::dim(bins), HIDDEN, actions.len() + 1];
        let mut mlp = Mlp::new(&sizes, 1.0, &mut rng::stream(seed, &[tag::POLICY, 0]))?;
        // start from a near-uniform policy and a zero value estimate
        let last = mlp.layers_mut().last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w *= 0.01);
        Ok(PolicyModel { mlp, actions: actions.to_vec(), bins })
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// Action logits and the value estimate.
    pub fn evaluate(&self, state: &PolicyState) -> Result<(Vec<f64>, f64)> {
        let mut out = self.mlp.forward(&state.0)?;
        let value = out.pop().unwrap();
        Ok((out, value))
    }

    pub fn value(&self, state: &PolicyState) -> Result<f64> {
        Ok(self.evaluate(state)?.1)
    }

    /// Highest-logit action, ties to the smaller index.
    pub fn greedy(&self, state: &PolicyState) -> Result<usize> {
        let (logits, _) = self.evaluate(state)?;
        Ok(crate::selection::argmax_index(&logits))
    }

    /// Samples an action; returns it with its log-probability and the value.
    pub fn sample<R: Rng + ?Sized>(&self, state: &PolicyState, rng: &mut R) -> Result<(usize, f64, f64)> {
        let (logits, value) = self.evaluate(state)?;
        let logp = log_softmax(&logits);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = logp.len() - 1;
        for (i, lp) in logp.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                chosen = i;
                break;
            }
        }
        Ok((chosen, logp[chosen], value))
    }

    pub fn header(&self) -> String {
        let names: Vec<String> = self.actions.iter().map(|a| a.to_string()).collect();
        format!("[policy] actions={} bins={} features={} schema={}", names.join(","), self.bins, FEATURE_DIM, FEATURE_SCHEMA)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_model(path, &self.mlp, &[self.header()])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (mlp, comments) = load_model(path)?;
        let header = comments
            .iter()
            .find(|c| c.starts_with("[policy]"))
            .ok_or_else(|| Error::Version(format!("{} has no [policy] header", path.display())))?;
        let (mut actions, mut bins) = (None, None);
        for kv in header["[policy]".len()..].split_whitespace() {
            match kv.split_once('=') {
                Some(("actions", v)) => actions = Some(v.split(',').map(str::parse).collect::<Result<Vec<AnnotationType>>>()?),
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
        let actions = actions.ok_or_else(|| Error::Version("[policy] header lacks actions".into()))?;
        let bins = bins.ok_or_else(|| Error::Version("[policy] header lacks bins".into()))?;
        if mlp.input_size() != PolicyState::dim(bins) || mlp.output_size() != actions.len() + 1 {
            return Err(Error::Shape(format!("policy layer sizes {:?} do not match its header", mlp.sizes())));
        }
        Ok(PolicyModel { mlp, actions, bins })
    }
}

/// Quality improvement per second of cumulative annotation cost.
pub fn reward(sq_next: f64, sq_cur: f64, tc: f64) -> Result<f64> {
    if !(tc > 0.0) {
        return Err(Error::Domain(format!("cumulative cost must be positive, got {tc}")));
    }
    Ok((sq_next - sq_cur) / tc)
}

/// Ranking score `pv · γ^t / θ_a + c` of a video at iteration `t`.
pub fn rank_score(pv: f64, t: usize, theta_a: f64, gamma: f64, c: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(theta_a > 0.0) {
        return Err(Error::Domain(format!("annotation cost must be positive, got {theta_a}")));
    }
    Ok(pv * gamma.powi(t as i32) / theta_a + c)
}
