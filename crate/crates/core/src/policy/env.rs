use rand::Rng;

use super::model::{reward, PolicyModel, PolicyState};
use crate::annotator::{annotate, AnnotationType, AnnotatorModel, CostModel};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::jf;
use crate::propagation::AnnotatedSet;
use crate::rng;
use crate::selection::{extract_features, QNet};
use crate::synthworld::Video;

/// Stable numeric code of an annotation type, used in random stream paths.
pub fn action_code(a: AnnotationType) -> u64 {
    match a {
        AnnotationType::ClickBatch(k) => k as u64,
        AnnotationType::MaskDraw => 1 << 32,
        AnnotationType::Box => (1 << 32) + 1,
    }
}

/// The annotation game on one selected frame of a session. Nothing here
/// mutates the session; [`play_episode`] returns the frame's final mask.
#[derive(Clone, Copy)]
pub struct FrameEnv<'a> {
    pub video: &'a Video,
    pub object: usize,
    pub frame: usize,
    /// Session predictions; `preds[frame]` is the starting mask.
    pub preds: &'a [Mask],
    pub k: &'a AnnotatedSet,
    pub qnet: Option<&'a QNet>,
    pub actions: &'a [AnnotationType],
    pub annotator: &'a AnnotatorModel,
    pub cost: &'a CostModel,
    pub g_max: usize,
    pub tol: f64,
    /// Seed of the annotator streams; step `g` of action `a` on frame `f`
    /// always uses the stream `(seed, [f, g, code(a)])`.
    pub annotator_seed: u64,
}

/// Progress within one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    pub step: usize,
    pub cost: f64,
    pub mask: Mask,
    pub sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub mask: Mask,
    pub sq: f64,
    pub cost: f64,
    pub reward: f64,
}

impl<'a> FrameEnv<'a> {
    pub fn gt(&self) -> &'a Mask {
        &self.video.gt[self.object][self.frame]
    }

    pub fn validate(&self) -> Result<()> {
        if self.actions.is_empty() {
            return Err(Error::Config("action pool is empty".into()));
        }
        if self.g_max == 0 {
            return Err(Error::Config("G_max must be at least 1".into()));
        }
        if self.frame >= self.preds.len() {
            return Err(Error::Bounds { index: self.frame, len: self.preds.len() });
        }
        Ok(())
    }

    pub fn start(&self) -> Result<EpisodeState> {
        let mask = self.preds[self.frame].clone();
        let sq = jf(&mask, self.gt(), self.tol)?;
        Ok(EpisodeState { step: 0, cost: 0.0, mask, sq })
    }

    /// Policy input for the current episode state.
    pub fn state(&self, st: &EpisodeState) -> Result<PolicyState> {
        let qnet = self.qnet.ok_or_else(|| Error::Config("this type selector needs a QNet".into()))?;
        let mut preds = self.preds.to_vec();
        preds[self.frame] = st.mask.clone();
        let feats = extract_features(self.video, self.object, self.frame, &preds, self.k)?;
        let posterior = qnet.posterior(feats.as_slice())?;
        PolicyState::new(feats.as_slice(), &posterior, st.step, self.g_max, st.cost, self.cost.seconds_per_mask_draw)
    }

    /// Result of taking action `index` in `st`. Deterministic: the same
    /// state and action always give the same outcome.
    pub fn outcome(&self, st: &EpisodeState, index: usize) -> Result<StepOutcome> {
        let a = *self.actions.get(index).ok_or(Error::Bounds { index, len: self.actions.len() })?;
        let mut rng = rng::stream(self.annotator_seed, &[self.frame as u64, st.step as u64, action_code(a)]);
        let (mask, cost) = annotate(a, Some(&st.mask), self.gt(), self.annotator, self.cost, &mut rng)?;
        let sq = jf(&mask, self.gt(), self.tol)?;
        let tc = st.cost + cost;
        Ok(StepOutcome { reward: reward(sq, st.sq, tc)?, mask, sq, cost })
    }
}

/// An action choice with optional log-probability and value estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
}

impl Choice {
    pub fn plain(action: usize) -> Self {
        Choice { action, log_prob: 0.0, value: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub transitions: Vec<super::ppo::Transition>,
    pub actions: Vec<AnnotationType>,
    pub mask: Mask,
    pub cost: f64,
    pub sq_start: f64,
    pub sq_end: f64,
}

/// Plays the game until a mask is drawn, `G_max` steps are taken or the
/// optional budget is spent. `choose` sees the episode state and, when the
/// environment has a QNet, the policy state.
pub fn play_episode(
    env: &FrameEnv,
    budget: Option<f64>,
    mut choose: impl FnMut(&FrameEnv, &EpisodeState, Option<&PolicyState>) -> Result<Choice>,
) -> Result<Episode> {
    env.validate()?;
    let mut st = env.start()?;
    let sq_start = st.sq;
    let mut transitions = Vec::new();
    let mut actions = Vec::new();
    loop {
        let ps = match env.qnet {
            Some(_) => Some(env.state(&st)?),
            None => None,
        };
        let c = choose(env, &st, ps.as_ref())?;
        let out = env.outcome(&st, c.action)?;
        let a = env.actions[c.action];
        st = EpisodeState { step: st.step + 1, cost: st.cost + out.cost, mask: out.mask, sq: out.sq };
        let done = a == AnnotationType::MaskDraw || st.step >= env.g_max || budget.is_some_and(|b| st.cost >= b);
        if !out.reward.is_finite() {
            return Err(Error::Numeric("non-finite reward".into()));
        }
        transitions.push(super::ppo::Transition {
            state: ps.map(|p| p.0).unwrap_or_default(),
            action: c.action,
            log_prob: c.log_prob,
            reward: out.reward,
            value: c.value,
            done,
        });
        actions.push(a);
        if done {
            break;
        }
    }
    Ok(Episode { transitions, actions, sq_start, sq_end: st.sq, cost: st.cost, mask: st.mask })
}

/// Training episode: actions are sampled from the policy.
pub fn run_episode<R: Rng + ?Sized>(env: &FrameEnv, model: &PolicyModel, rng: &mut R) -> Result<Episode> {
    if env.qnet.is_none() {
        return Err(Error::Config("policy episodes need a QNet".into()));
    }
    if model.actions.as_slice() != env.actions {
        return Err(Error::Config("policy was trained on a different action pool".into()));
    }
    play_episode(env, None, |_, _, ps| {
        let (action, log_prob, value) = model.sample(ps.expect("state with QNet"), rng)?;
        Ok(Choice { action, log_prob, value })
    })
}
