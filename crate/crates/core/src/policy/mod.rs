//! Annotation-type selection: the per-frame annotation game, its reward,
//! PPO training of the actor-critic policy, baseline type selectors and the
//! video ranking score.

mod baselines;
mod env;
mod model;
mod ppo;
mod train;

pub use baselines::{select_action, train_at_baselines, AtModels, TypeDataset, TypeModels, TypeRecord, TypeSelector};
pub use env::{action_code, play_episode, run_episode, Choice, Episode, EpisodeState, FrameEnv, StepOutcome};
pub use model::{rank_score, reward, PolicyModel, PolicyState};
pub use ppo::{discounted_returns, ppo_update, PpoHyper, PpoStats, Transition};
pub use train::{simulate_type_dataset, train_policy, PolicyReport, PolicyTraining};
