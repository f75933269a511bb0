use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::learncore::{loss_and_grad, Adam, Mlp, Objective, PpoCoeffs, PpoSample};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoHyper {
    pub clip: f64,
    /// Discount within an episode.
    pub gamma: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub episodes_per_update: usize,
    pub updates: usize,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    /// Standardise advantages within each update batch.
    pub normalize_advantages: bool,
    pub seed: u64,
}

impl Default for PpoHyper {
    fn default() -> Self {
        PpoHyper {
            clip: 0.2,
            gamma: 0.95,
            entropy_coef: 0.01,
            value_coef: 0.5,
            epochs: 4,
            minibatch: 64,
            episodes_per_update: 32,
            updates: 30,
            learning_rate: 3e-3,
            max_grad_norm: 1.0,
            normalize_advantages: true,
            seed: 0,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::Config(format!("clip must lie in (0, 1), got {}", self.clip)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("discount must lie in (0, 1], got {}", self.gamma)));
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return Err(Error::Config("loss coefficients must be non-negative".into()));
        }
        if self.epochs == 0 || self.minibatch == 0 || self.episodes_per_update == 0 {
            return Err(Error::Config("epochs, minibatch and episodes per update must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.max_grad_norm > 0.0) {
            return Err(Error::Config("learning rate and gradient clip must be positive".into()));
        }
        Ok(())
    }

    pub fn coeffs(&self) -> PpoCoeffs {
        PpoCoeffs { clip: self.clip, value: self.value_coef, entropy: self.entropy_coef }
    }

    pub fn optimizer(&self, net: &Mlp) -> Adam {
        Adam::new(net, self.learning_rate).with_clip(Some(self.max_grad_norm))
    }
}

/// Discounted reward-to-go of one episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoStats {
    pub samples: usize,
    pub mean_loss: f64,
    pub mean_return: f64,
}

/// Clipped-surrogate update on complete episodes. On a numeric failure the
/// network is left as it was.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut Mlp,
    opt: &mut Adam,
    episodes: &[Vec<Transition>],
    hyper: &PpoHyper,
    rng: &mut R,
) -> Result<PpoStats> {
    hyper.validate()?;
    if episodes.is_empty() || episodes.iter().any(|e| e.is_empty()) {
        return Err(Error::State("PPO needs at least one complete episode".into()));
    }
    if episodes.iter().any(|e| !e.last().unwrap().done) {
        return Err(Error::State("episode does not end in a terminal transition".into()));
    }
    let mut samples = Vec::new();
    let mut returns_sum = 0.0;
    for ep in episodes {
        let rewards: Vec<f64> = ep.iter().map(|t| t.reward).collect();
        let rets = discounted_returns(&rewards, hyper.gamma);
        returns_sum += rets[0];
        for (t, ret) in ep.iter().zip(rets) {
            samples.push(PpoSample {
                state: t.state.clone(),
                action: t.action,
                old_log_prob: t.log_prob,
                advantage: ret - t.value,
                ret,
                valid: None,
            });
        }
    }
    if hyper.normalize_advantages && samples.len() > 1 {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
        let std = (samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n).sqrt();
        for s in &mut samples {
            s.advantage = if std > 1e-12 { (s.advantage - mean) / std } else { 0.0 };
        }
    }

    let mut work = net.clone();
    let mut work_opt = opt.clone();
    let coeffs = hyper.coeffs();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let (mut loss_sum, mut batches) = (0.0, 0usize);
    for _ in 0..hyper.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(hyper.minibatch) {
            let batch: Vec<PpoSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (loss, grads) = loss_and_grad(&work, &Objective::PpoSurrogate { samples: &batch, coeffs })?;
            work_opt.step(&mut work, &grads)?;
            loss_sum += loss;
            batches += 1;
        }
    }
    *net = work;
    *opt = work_opt;
    Ok(PpoStats { samples: samples.len(), mean_loss: loss_sum / batches as f64, mean_return: returns_sum / episodes.len() as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learncore::log_softmax;
    use crate::rng::stream;

    #[test]
    fn returns_are_discounted() {
        let r = discounted_returns(&[1.0, 0.0, 2.0], 0.5);
        assert_eq!(r, vec![1.5, 1.0, 2.0]);
    }

    #[test]
    fn clip_arithmetic() {
        // a single sample with ratio 10 and advantage 1 contributes 1 + ε
        let net = Mlp::zeros(&[1, 3]).unwrap();
        let old = log_softmax(&[0.0, 0.0])[0] - 10f64.ln();
        let s = PpoSample { state: vec![0.0], action: 0, old_log_prob: old, advantage: 1.0, ret: 0.0, valid: None };
        let coeffs = PpoCoeffs { clip: 0.2, value: 0.0, entropy: 0.0 };
        let loss = crate::learncore::loss_value(&net, &Objective::PpoSurrogate { samples: &[s], coeffs }).unwrap();
        assert!((loss + 1.2).abs() < 1e-12);
    }

    #[test]
    fn zero_advantage_zero_entropy_keeps_parameters() {
        let mut net = Mlp::new(&[2, 4, 3], 1.0, &mut stream(1, &[])).unwrap();
        let before = net.clone();
        let out = net.forward(&[0.5, -0.5]).unwrap();
        let lp = log_softmax(&out[..2]);
        let ep = vec![Transition { state: vec![0.5, -0.5], action: 1, log_prob: lp[1], reward: out[2], value: out[2], done: true }];
        let hyper = PpoHyper { entropy_coef: 0.0, normalize_advantages: false, ..PpoHyper::default() };
        let mut opt = hyper.optimizer(&net);
        ppo_update(&mut net, &mut opt, &[ep], &hyper, &mut stream(2, &[])).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn incomplete_episodes_are_rejected() {
        let mut net = Mlp::zeros(&[1, 3]).unwrap();
        let hyper = PpoHyper::default();
        let mut opt = hyper.optimizer(&net);
        let t = Transition { state: vec![0.0], action: 0, log_prob: 0.0, reward: 0.0, value: 0.0, done: false };
        assert!(ppo_update(&mut net, &mut opt, &[vec![t]], &hyper, &mut stream(0, &[])).is_err());
        assert!(ppo_update(&mut net, &mut opt, &[], &hyper, &mut stream(0, &[])).is_err());
    }

    /// State bit says which of two actions pays 1.
    pub(crate) fn bandit_optimal_rate(seed: u64, updates: usize) -> f64 {
        let mut net = Mlp::new(&[2, 16, 3], 1.0, &mut stream(seed, &[1])).unwrap();
        let hyper = PpoHyper { episodes_per_update: 32, minibatch: 32, ..PpoHyper::default() };
        let mut opt = hyper.optimizer(&net);
        let mut rng = stream(seed, &[2]);
        let state = |b: usize| vec![b as f64, 1.0 - b as f64];
        for _ in 0..updates {
            let eps: Vec<Vec<Transition>> = (0..hyper.episodes_per_update)
                .map(|_| {
                    let b = rng.random_range(0..2usize);
                    let out = net.forward(&state(b)).unwrap();
                    let lp = log_softmax(&out[..2]);
                    let a = usize::from(rng.random::<f64>() >= lp[0].exp());
                    vec![Transition { state: state(b), action: a, log_prob: lp[a], reward: f64::from(u8::from(a == b)), value: out[2], done: true }]
                })
                .collect();
            ppo_update(&mut net, &mut opt, &eps, &hyper, &mut rng).unwrap();
        }
        let p = |b: usize| log_softmax(&net.forward(&state(b)).unwrap()[..2])[b].exp();
        0.5 * (p(0) + p(1))
    }

    #[test]
    fn learns_the_diagnostic_bandit() {
        let rate = (0..2).map(|s| bandit_optimal_rate(s, 60)).sum::<f64>() / 2.0;
        assert!(rate >= 0.9, "optimal-action rate {rate}");
    }
}
