use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::env::{EpisodeState, FrameEnv};
use super::model::{PolicyModel, PolicyState, HIDDEN};
use crate::annotator::AnnotationType;
use crate::error::{Error, Result};
use crate::learncore::{load_model, save_model, train_supervised, Mlp, SupervisedData, TrainHyper};
use crate::rng::{self, tag};
use crate::selection::argmax_index;

/// Annotation-type selection strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeSelector {
    /// Greedy action of the trained policy.
    Rl,
    Random,
    /// Always the `k`-click batch.
    ClicksOnly(usize),
    MaskOnly,
    /// Best single-step reward, found by simulating every action.
    Oracle,
    /// Regressed improvement per second.
    AtImprov,
    /// Classifier trained on oracle choices.
    AtClf,
}

impl fmt::Display for TypeSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeSelector::Rl => f.write_str("rl"),
            TypeSelector::Random => f.write_str("random"),
            TypeSelector::ClicksOnly(k) => write!(f, "clicks{k}_only"),
            TypeSelector::MaskOnly => f.write_str("mask_only"),
            TypeSelector::Oracle => f.write_str("oracle"),
            TypeSelector::AtImprov => f.write_str("at_improv"),
            TypeSelector::AtClf => f.write_str("at_clf"),
        }
    }
}

impl std::str::FromStr for TypeSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rl" => TypeSelector::Rl,
            "random" => TypeSelector::Random,
            "clicks_only" => TypeSelector::ClicksOnly(3),
            "mask_only" => TypeSelector::MaskOnly,
            "oracle" => TypeSelector::Oracle,
            "at_improv" => TypeSelector::AtImprov,
            "at_clf" => TypeSelector::AtClf,
            _ => match s.strip_prefix("clicks").and_then(|r| r.strip_suffix("_only")).and_then(|k| k.parse().ok()) {
                Some(k) if k > 0 => TypeSelector::ClicksOnly(k),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown type selector `{s}` (expected rl|random|clicks_only|clicks<k>_only|mask_only|oracle|at_improv|at_clf)"
                    )))
                }
            },
        })
    }
}

impl TypeSelector {
    pub fn needs_qnet(&self) -> bool {
        matches!(self, TypeSelector::Rl | TypeSelector::AtImprov | TypeSelector::AtClf)
    }
}

/// The two supervised type-selection baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct AtModels {
    /// Predicts the J&F change of every action.
    pub improv: Mlp,
    /// Predicts the oracle action.
    pub clf: Mlp,
    pub actions: Vec<AnnotationType>,
}

impl AtModels {
    fn header(&self, kind: &str) -> String {
        let names: Vec<String> = self.actions.iter().map(|a| a.to_string()).collect();
        format!("[{kind}] actions={}", names.join(","))
    }

    /// Writes `<stem>.improv.txt` and `<stem>.clf.txt` next to each other.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        save_model(&dir.join(format!("{stem}.improv.txt")), &self.improv, &[self.header("at_improv")])?;
        save_model(&dir.join(format!("{stem}.clf.txt")), &self.clf, &[self.header("at_clf")])
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let read = |kind: &str, file: String| -> Result<(Mlp, Vec<AnnotationType>)> {
            let path = dir.join(file);
            let (m, comments) = load_model(&path)?;
            let prefix = format!("[{kind}] actions=");
            let actions = comments
                .iter()
                .find_map(|c| c.strip_prefix(&prefix))
                .ok_or_else(|| Error::Version(format!("{} has no [{kind}] header", path.display())))?
                .split(',')
                .map(str::parse)
                .collect::<Result<Vec<AnnotationType>>>()?;
            Ok((m, actions))
        };
        let (improv, actions) = read("at_improv", format!("{stem}.improv.txt"))?;
        let (clf, clf_actions) = read("at_clf", format!("{stem}.clf.txt"))?;
        if actions != clf_actions || improv.output_size() != actions.len() || clf.output_size() != actions.len() {
            return Err(Error::Shape("type baseline models disagree on the action pool".into()));
        }
        Ok(AtModels { improv, clf, actions })
    }
}

/// Learned models available to the type selectors.
#[derive(Clone, Copy, Default)]
pub struct TypeModels<'a> {
    pub policy: Option<&'a PolicyModel>,
    pub at: Option<&'a AtModels>,
}

fn index_of(actions: &[AnnotationType], a: AnnotationType) -> Result<usize> {
    actions.iter().position(|&x| x == a).ok_or_else(|| Error::Config(format!("action `{a}` is not in the action pool")))
}

fn need_state(ps: Option<&PolicyState>) -> Result<&PolicyState> {
    ps.ok_or_else(|| Error::Config("this type selector needs a QNet for its state".into()))
}

/// Index into `env.actions` of the action `kind` takes in `st`.
pub fn select_action<R: Rng + ?Sized>(
    kind: TypeSelector,
    env: &FrameEnv,
    st: &EpisodeState,
    ps: Option<&PolicyState>,
    models: &TypeModels,
    rng: &mut R,
) -> Result<usize> {
    let actions = env.actions;
    if actions.is_empty() {
        return Err(Error::Config("action pool is empty".into()));
    }
    match kind {
        TypeSelector::MaskOnly => index_of(actions, AnnotationType::MaskDraw),
        TypeSelector::ClicksOnly(k) => index_of(actions, AnnotationType::ClickBatch(k)),
        TypeSelector::Random => Ok(rng.random_range(0..actions.len())),
        TypeSelector::Oracle => {
            let rewards = (0..actions.len()).map(|i| env.outcome(st, i).map(|o| o.reward)).collect::<Result<Vec<_>>>()?;
            Ok(argmax_index(&rewards))
        }
        TypeSelector::Rl => {
            let policy = models.policy.ok_or_else(|| Error::Config("rl type selection needs a policy model".into()))?;
            if policy.actions != actions {
                return Err(Error::Config("policy was trained on a different action pool".into()));
            }
            policy.greedy(need_state(ps)?)
        }
        TypeSelector::AtImprov | TypeSelector::AtClf => {
            let at = models.at.ok_or_else(|| Error::Config(format!("{kind} type selection needs its trained model")))?;
            if at.actions != actions {
                return Err(Error::Config("type baselines were trained on a different action pool".into()));
            }
            let state = need_state(ps)?;
            if kind == TypeSelector::AtClf {
                return Ok(argmax_index(&at.clf.forward(&state.0)?));
            }
            let per_second: Vec<f64> =
                at.improv.forward(&state.0)?.iter().zip(actions).map(|(d, &a)| d / env.cost.cost(a)).collect();
            Ok(argmax_index(&per_second))
        }
    }
}

/// One visited state with the simulated J&F change of every action.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeRecord {
    pub state: PolicyState,
    pub improvements: Vec<f64>,
    /// Action with the best single-step reward.
    pub oracle: usize,
    pub world_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeDataset {
    pub actions: Vec<AnnotationType>,
    pub records: Vec<TypeRecord>,
}

/// Fits the improvement regressor (squared error) and the oracle-action
/// classifier (cross-entropy), holding out a tenth of the worlds for model
/// selection.
pub fn train_at_baselines(data: &TypeDataset, hyper: &TrainHyper, seed: u64) -> Result<AtModels> {
    if data.records.is_empty() {
        return Err(Error::DegenerateData("type dataset is empty".into()));
    }
    let l = data.actions.len();
    let labels: BTreeSet<usize> = data.records.iter().map(|r| r.oracle).collect();
    if labels.len() < 2 {
        return Err(Error::DegenerateData(format!("oracle chose a single action {labels:?}")));
    }
    if data.records.iter().any(|r| r.improvements.len() != l || r.oracle >= l) {
        return Err(Error::Shape("type record does not match the action pool".into()));
    }
    let dim = data.records[0].state.0.len();

    let mut worlds: Vec<u64> = data.records.iter().map(|r| r.world_seed).collect::<BTreeSet<_>>().into_iter().collect();
    worlds.shuffle(&mut rng::stream(seed, &[tag::TRAIN, 10]));
    let n_val = if worlds.len() < 2 { 0 } else { (worlds.len() / 10).max(1) };
    let held: BTreeSet<u64> = worlds[..n_val].iter().copied().collect();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, r) in data.records.iter().enumerate() {
        if held.contains(&r.world_seed) { val.push(i) } else { train.push(i) }
    }

    let inputs: Vec<Vec<f64>> = data.records.iter().map(|r| r.state.0.clone()).collect();
    let reg_data = SupervisedData::Targets { inputs: inputs.clone(), targets: data.records.iter().map(|r| r.improvements.clone()).collect() };
    let clf_data = SupervisedData::Classes { inputs, labels: data.records.iter().map(|r| r.oracle).collect() };
    let mut improv = Mlp::new(&[dim, HIDDEN, l], 1.0, &mut rng::stream(seed, &[tag::TRAIN, 11]))?;
    let mut clf = Mlp::new(&[dim, HIDDEN, l], 1.0, &mut rng::stream(seed, &[tag::TRAIN, 12]))?;
    train_supervised(&mut improv, &reg_data, &train, &val, hyper, &mut rng::stream(seed, &[tag::TRAIN, 13]))?;
    train_supervised(&mut clf, &clf_data, &train, &val, hyper, &mut rng::stream(seed, &[tag::TRAIN, 14]))?;
    Ok(AtModels { improv, clf, actions: data.actions.clone() })
}
