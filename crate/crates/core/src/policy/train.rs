use super::baselines::{TypeDataset, TypeRecord, TypeSelector};
use super::env::{play_episode, run_episode, Choice, FrameEnv};
use super::model::PolicyModel;
use super::ppo::{ppo_update, PpoHyper};
use crate::error::{Error, Result};
use crate::harness::{LoopConfig, Models, SessionState};
use crate::rng::{self, tag};
use crate::selection::{argmax_index, FrameSelector, QNet};
use crate::synthworld::{generate_video, WorldConfig};

/// Inputs shared by policy training and type-dataset simulation.
#[derive(Clone, Copy)]
pub struct PolicyTraining<'a> {
    pub worlds: &'a [WorldConfig],
    pub qnet: &'a QNet,
    pub frames: FrameSelector,
    pub cfg: &'a LoopConfig,
    /// Iterations per simulated session; `None` uses `min(10, N / 4)`.
    pub iterations: Option<usize>,
}

/// Rolls simulated sessions over the worlds, cycling through them, and calls
/// `visit` on every selected frame until it returns `false`. Sessions move
/// on with drawn masks whatever `visit` does.
fn for_each_frame(setup: &PolicyTraining, seed: u64, mut visit: impl FnMut(&FrameEnv, u64) -> Result<bool>) -> Result<()> {
    if setup.worlds.is_empty() {
        return Err(Error::Config("training needs at least one world".into()));
    }
    let videos = setup.worlds.iter().map(generate_video).collect::<Result<Vec<_>>>()?;
    let models = Models { qnet: Some(setup.qnet.clone()), ..Models::default() };
    for pass in 0u64.. {
        let cfg = LoopConfig { seed: rng::derive_seed(seed, &[tag::TRAIN, pass]), ..setup.cfg.clone() };
        for (video, world) in videos.iter().zip(setup.worlds) {
            let n = video.n_frames();
            let iterations = setup.iterations.unwrap_or((n / 4).min(10)).clamp(1, n - 1);
            for object in 0..video.n_objects() {
                let mut s = SessionState::start(video, world.seed, object, &cfg)?;
                for _ in 0..iterations {
                    let frame = s.select_frame(setup.frames, Some(setup.qnet), &cfg)?;
                    if !visit(&s.env(frame, Some(setup.qnet), &cfg), world.seed)? {
                        return Ok(());
                    }
                    s.annotate_frame(frame, TypeSelector::MaskOnly, &models, &cfg, None)?;
                }
            }
        }
    }
    unreachable!("the pass loop only ends through `visit`")
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyReport {
    /// Mean episode return of each update batch.
    pub mean_returns: Vec<f64>,
    pub episodes: usize,
}

/// PPO on annotation games played at the frames a simulated annotation loop
/// selects. Deterministic given `hyper.seed`.
pub fn train_policy(setup: &PolicyTraining, hyper: &PpoHyper) -> Result<(PolicyModel, PolicyReport)> {
    hyper.validate()?;
    setup.cfg.validate()?;
    let mut model = PolicyModel::new(&setup.cfg.actions, setup.qnet.bins, hyper.seed)?;
    let mut opt = hyper.optimizer(&model.mlp);
    let mut sample_rng = rng::stream(hyper.seed, &[tag::POLICY, 1]);
    let mut update_rng = rng::stream(hyper.seed, &[tag::POLICY, 2]);
    let mut batch = Vec::new();
    let mut report = PolicyReport { mean_returns: Vec::new(), episodes: 0 };
    if hyper.updates > 0 {
        for_each_frame(setup, hyper.seed, |env, _| {
            let ep = run_episode(env, &model, &mut sample_rng)?;
            batch.push(ep.transitions);
            report.episodes += 1;
            if batch.len() == hyper.episodes_per_update {
                let stats = ppo_update(&mut model.mlp, &mut opt, &batch, hyper, &mut update_rng)?;
                report.mean_returns.push(stats.mean_return);
                batch.clear();
            }
            Ok(report.mean_returns.len() < hyper.updates)
        })?;
    }
    Ok((model, report))
}

/// States visited by oracle-played annotation games, each labelled with the
/// J&F change of every action and the oracle's choice.
pub fn simulate_type_dataset(setup: &PolicyTraining, episodes: usize, seed: u64) -> Result<TypeDataset> {
    setup.cfg.validate()?;
    let mut records = Vec::new();
    let mut played = 0;
    if episodes > 0 {
        for_each_frame(setup, seed, |env, world_seed| {
            play_episode(env, None, |env, st, ps| {
                let outcomes = (0..env.actions.len()).map(|i| env.outcome(st, i)).collect::<Result<Vec<_>>>()?;
                let rewards: Vec<f64> = outcomes.iter().map(|o| o.reward).collect();
                let oracle = argmax_index(&rewards);
                records.push(TypeRecord {
                    state: ps.expect("state with QNet").clone(),
                    improvements: outcomes.iter().map(|o| o.sq - st.sq).collect(),
                    oracle,
                    world_seed,
                });
                Ok(Choice::plain(oracle))
            })?;
            played += 1;
            Ok(played < episodes)
        })?;
    }
    Ok(TypeDataset { actions: setup.cfg.actions.clone(), records })
}
