use super::config::{ExperimentConfig, RunMode};
use super::session::{run_collection, run_session, LoopConfig, Method, Models};
use crate::error::{Error, Result};
use crate::learncore::TrainHyper;
use crate::metrics::Curve;
use crate::policy::{simulate_type_dataset, train_at_baselines, train_policy, AtModels, PolicyModel, PolicyReport, PolicyTraining, PpoHyper};
use crate::rng::{self, tag};
use crate::selection::{simulate_quality_dataset, train_qnet, QNet, QNetHyper, QNetReport, SelectionMode, SimulationSetup};
use crate::synthworld::{generate_video, Video};

fn training_seed(cfg: &ExperimentConfig, what: u64) -> u64 {
    rng::derive_seed(cfg.seed, &[tag::TRAIN, what])
}

/// Simulates the quality dataset on the training worlds and fits a QNet.
pub fn train_qnet_for(cfg: &ExperimentConfig) -> Result<(QNet, QNetReport)> {
    let setup = SimulationSetup {
        annotator: cfg.loop_cfg.annotator,
        propagation: cfg.loop_cfg.propagation,
        tol: cfg.loop_cfg.tol,
        iterations: None,
    };
    let modes = [SelectionMode::Random, SelectionMode::Oracle];
    let data = simulate_quality_dataset(&cfg.training_worlds(), cfg.training.bins, &modes, &setup, training_seed(cfg, 1))?;
    let mut hyper = QNetHyper { seed: training_seed(cfg, 2), ..QNetHyper::default() };
    hyper.train.epochs = cfg.training.qnet_epochs;
    train_qnet(&data, &hyper)
}

fn policy_setup<'a>(cfg: &'a ExperimentConfig, worlds: &'a [crate::synthworld::WorldConfig], qnet: &'a QNet) -> PolicyTraining<'a> {
    PolicyTraining { worlds, qnet, frames: cfg.training.frames, cfg: &cfg.loop_cfg, iterations: None }
}

/// PPO training of the type-selection policy on the training worlds.
pub fn train_policy_for(cfg: &ExperimentConfig, qnet: &QNet) -> Result<(PolicyModel, PolicyReport)> {
    let worlds = cfg.training_worlds();
    let hyper = PpoHyper {
        updates: cfg.training.ppo_updates,
        episodes_per_update: cfg.training.ppo_episodes,
        seed: training_seed(cfg, 3),
        ..PpoHyper::default()
    };
    train_policy(&policy_setup(cfg, &worlds, qnet), &hyper)
}

/// Fits the regression and classification type baselines on oracle-played
/// games.
pub fn train_at_for(cfg: &ExperimentConfig, qnet: &QNet) -> Result<AtModels> {
    let worlds = cfg.training_worlds();
    let seed = training_seed(cfg, 4);
    let data = simulate_type_dataset(&policy_setup(cfg, &worlds, qnet), cfg.training.type_episodes, seed)?;
    let hyper = TrainHyper { learning_rate: 3e-3, batch_size: 32, epochs: 60, clip_norm: Some(5.0) };
    train_at_baselines(&data, &hyper, seed)
}

/// Loads the configured model files and trains whatever the methods still
/// need.
pub fn prepare_models(cfg: &ExperimentConfig) -> Result<Models> {
    let (mut q, mut p, mut at) = (false, false, false);
    for m in &cfg.methods {
        let n = m.needs();
        q |= n.0 || n.1 || n.2;
        p |= n.1;
        at |= n.2;
    }
    let mut models = Models::default();
    if q {
        models.qnet = Some(match &cfg.models.qnet {
            Some(path) => QNet::load(path)?,
            None => train_qnet_for(cfg)?.0,
        });
    }
    let qnet = models.qnet.as_ref();
    if p {
        models.policy = Some(match &cfg.models.policy {
            Some(path) => PolicyModel::load(path)?,
            None => train_policy_for(cfg, qnet.expect("policy methods need a QNet"))?.0,
        });
    }
    if at {
        models.at = Some(match &cfg.models.at {
            Some(stem) => {
                let dir = stem.parent().unwrap_or(std::path::Path::new("."));
                let name = stem.file_name().and_then(|s| s.to_str()).ok_or_else(|| Error::Config(format!("bad model stem {}", stem.display())))?;
                AtModels::load(dir, name)?
            }
            None => train_at_for(cfg, qnet.expect("type baselines need a QNet"))?,
        });
    }
    if let Some(policy) = &models.policy {
        if policy.actions != cfg.loop_cfg.actions {
            return Err(Error::Config("policy model was trained on a different action pool".into()));
        }
    }
    Ok(models)
}

/// Mean J&F curve of one method under one replicate seed.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodCurve {
    pub method: Method,
    pub seed: u64,
    pub curve: Curve,
}

/// Loop configuration of replicate `seed`.
pub fn replicate_config(cfg: &ExperimentConfig, seed: u64) -> LoopConfig {
    LoopConfig { seed: rng::derive_seed(cfg.seed, &[tag::EXPERIMENT, seed]), ..cfg.loop_cfg.clone() }
}

/// Runs every (method, seed) pair of the experiment on `jobs` threads (all
/// cores if `None`). The result is sorted by method name and seed and does
/// not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, models: &Models, jobs: Option<usize>) -> Result<Vec<MethodCurve>> {
    cfg.validate()?;
    for m in &cfg.methods {
        m.check_models(models)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    pool.install(|| run_cells(cfg, models))
}

fn run_cells(cfg: &ExperimentConfig, models: &Models) -> Result<Vec<MethodCurve>> {
    use rayon::prelude::*;

    let videos: Vec<Video> = cfg.eval_worlds().par_iter().map(generate_video).collect::<Result<_>>()?;
    let items: Vec<(&Video, u64, usize)> =
        videos.iter().enumerate().flat_map(|(i, v)| (0..v.n_objects()).map(move |o| (v, i as u64, o))).collect();
    let mut pairs: Vec<(Method, u64)> = cfg.methods.iter().flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s))).collect();
    pairs.sort_by_key(|(m, s)| (m.name(), *s));
    pairs.dedup();

    let curves: Vec<Curve> = match cfg.mode {
        RunMode::Sessions => {
            let cells: Vec<(usize, usize)> = (0..pairs.len()).flat_map(|p| (0..items.len()).map(move |i| (p, i))).collect();
            let per_session: Vec<Curve> = cells
                .par_iter()
                .map(|&(p, i)| {
                    let (method, seed) = pairs[p];
                    let (video, id, object) = items[i];
                    run_session(video, id, object, method, cfg.budget, models, &replicate_config(cfg, seed)).map(|r| r.0)
                })
                .collect::<Result<_>>()?;
            per_session.chunks(items.len()).map(Curve::mean_of).collect()
        }
        RunMode::Collection(schedule) => pairs
            .par_iter()
            .map(|&(method, seed)| {
                run_collection(&items, method, cfg.budget, schedule, models, &replicate_config(cfg, seed)).map(|r| r.0)
            })
            .collect::<Result<_>>()?,
    };
    Ok(pairs.into_iter().zip(curves).map(|((method, seed), curve)| MethodCurve { method, seed, curve }).collect())
}
