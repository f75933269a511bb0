//! INI experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! [world]
//! videos = 20
//! n_frames = 60
//!
//! [experiment]
//! methods = eva, random+mask_only
//! budget = 2000
//! seeds = 0, 1, 2, 3, 4
//! ```
//!
//! Every section and key is optional; unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use super::session::{LoopConfig, Method, Schedule};
use crate::annotator::AnnotationType;
use crate::error::{Error, Result};
use crate::selection::FrameSelector;
use crate::synthworld::WorldConfig;

/// How the evaluation videos are annotated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunMode {
    /// Every video is its own session with the full budget.
    Sessions,
    /// All videos share one budget, scheduled as given.
    Collection(Schedule),
}

/// Training settings used when no model files are given.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub worlds: usize,
    /// Seed of the first training world; world `i` uses `world_seed + i`.
    pub world_seed: u64,
    pub bins: usize,
    pub qnet_epochs: usize,
    pub ppo_updates: usize,
    pub ppo_episodes: usize,
    /// Frame selector of the sessions policy episodes are played in.
    pub frames: FrameSelector,
    /// Episodes simulated for the type-baseline dataset.
    pub type_episodes: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            worlds: 40,
            world_seed: 1000,
            bins: 5,
            qnet_epochs: 40,
            ppo_updates: 30,
            ppo_episodes: 32,
            frames: FrameSelector::QNet,
            type_episodes: 600,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelPaths {
    pub qnet: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    /// Stem path of the type baselines: `<at>.improv.txt` and `<at>.clf.txt`.
    pub at: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Template of the evaluation worlds; video `i` uses `world.seed + i`.
    pub world: WorldConfig,
    pub videos: usize,
    /// Evaluate on the held-out world family.
    pub held_out: bool,
    pub loop_cfg: LoopConfig,
    pub methods: Vec<Method>,
    pub budget: f64,
    pub thresholds: Vec<f64>,
    /// Replicate seeds; each one reseeds annotator, propagation and
    /// selection noise.
    pub seeds: Vec<u64>,
    /// Master seed mixed into every replicate and every trained model.
    pub seed: u64,
    pub mode: RunMode,
    pub training: TrainingConfig,
    pub models: ModelPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldConfig::default(),
            videos: 20,
            held_out: false,
            loop_cfg: LoopConfig::default(),
            methods: vec!["eva".parse().unwrap(), "random+mask_only".parse().unwrap()],
            budget: 2000.0,
            thresholds: vec![0.75, 0.8, 0.85],
            seeds: vec![0, 1, 2, 3, 4],
            seed: 0,
            mode: RunMode::Sessions,
            training: TrainingConfig::default(),
            models: ModelPaths::default(),
        }
    }
}

fn list<T: FromStr<Err = E>, E: ToString>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| s.parse().map_err(|e: E| e.to_string())).collect()
}

/// Drops a trailing ` # ...` or ` ; ...` comment.
fn strip_comment(v: &str) -> &str {
    let cut = v
        .char_indices()
        .find(|&(i, c)| (c == '#' || c == ';') && (i == 0 || v[..i].ends_with(char::is_whitespace)))
        .map_or(v.len(), |(i, _)| i);
    v[..cut].trim()
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: ToString,
{
    v.parse().map_err(|e: T::Err| e.to_string())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
            e => e,
        })?;
        // model paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.models.qnet, &mut cfg.models.policy, &mut cfg.models.at].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Parse { line: e.line, message: e.msg.to_string() })?;
        let mut cfg = ExperimentConfig::default();
        let mut schedule = "none".to_string();
        let (mut gamma, mut rank_c) = match Schedule::default() {
            Schedule::Ranked { gamma, c } => (gamma, c),
            Schedule::RoundRobin => unreachable!(),
        };
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            let mut seen = BTreeMap::new();
            for (key, value) in props.iter() {
                if seen.insert(key, ()).is_some() {
                    return Err(Error::Config(format!("duplicate key `{key}` in [{section}]")));
                }
                let value = strip_comment(value);
                let w = &mut cfg.world;
                let a = &mut cfg.loop_cfg.annotator;
                let c = &mut cfg.loop_cfg.cost;
                let p = &mut cfg.loop_cfg.propagation;
                let t = &mut cfg.training;
                let r: std::result::Result<(), String> = match (section, key) {
                    ("world", "width") => num(value).map(|v| w.width = v),
                    ("world", "height") => num(value).map(|v| w.height = v),
                    ("world", "n_frames") => num(value).map(|v| w.n_frames = v),
                    ("world", "n_objects") => num(value).map(|v| w.n_objects = v),
                    ("world", "shape") => value.parse().map(|v| w.shape_kind = v).map_err(|e: Error| e.to_string()),
                    ("world", "motion_sigma") => num(value).map(|v| w.motion_sigma = v),
                    ("world", "deform_sigma") => num(value).map(|v| w.deform_sigma = v),
                    ("world", "p_occlusion") => num(value).map(|v| w.p_occlusion = v),
                    ("world", "p_disappear") => num(value).map(|v| w.p_disappear = v),
                    ("world", "p_transform") => num(value).map(|v| w.p_transform = v),
                    ("world", "seed") => num(value).map(|v| w.seed = v),
                    ("world", "videos") => num(value).map(|v| cfg.videos = v),
                    ("world", "held_out") => parse_bool(value).map(|v| cfg.held_out = v),

                    ("annotator", "human_agreement_jf") => num(value).map(|v| a.human_agreement_jf = v),
                    ("annotator", "a2m_ceiling_jf") => num(value).map(|v| a.a2m_ceiling_jf = v),
                    ("annotator", "click_area_cap") => num(value).map(|v| a.click_area_cap = v),
                    ("annotator", "residual_noise") => num(value).map(|v| a.residual_noise = v),
                    ("annotator", "seconds_per_click") => num(value).map(|v| c.seconds_per_click = v),
                    ("annotator", "seconds_per_mask_draw") => num(value).map(|v| c.seconds_per_mask_draw = v),
                    ("annotator", "seconds_per_box") => num(value).map(|v| c.seconds_per_box = v),
                    ("annotator", "actions") => list::<AnnotationType, _>(value).map(|v| cfg.loop_cfg.actions = v),
                    ("annotator", "g_max") => num(value).map(|v| cfg.loop_cfg.g_max = v),

                    ("propagation", "drift_sigma") => num(value).map(|v| p.drift_sigma = v),
                    ("propagation", "jitter_rate") => num(value).map(|v| p.jitter_rate = v),
                    ("propagation", "jitter_cap") => num(value).map(|v| p.jitter_cap = v),

                    ("experiment", "methods") => list::<Method, _>(value).map(|v| cfg.methods = v),
                    ("experiment", "budget") => num(value).map(|v| cfg.budget = v),
                    ("experiment", "thresholds") => list::<f64, _>(value).map(|v| cfg.thresholds = v),
                    ("experiment", "seeds") => list::<u64, _>(value).map(|v| cfg.seeds = v),
                    ("experiment", "seed") => num(value).map(|v| cfg.seed = v),
                    ("experiment", "tol") => match value {
                        "auto" => {
                            let _: () = cfg.loop_cfg.tol = None;
                            Ok(())
                        },
                        v => num(v).map(|v| cfg.loop_cfg.tol = Some(v)),
                    },
                    ("experiment", "schedule") => {
                        let _: () = schedule = value.to_string();
                        Ok(())
                    },
                    ("experiment", "gamma") => num(value).map(|v| gamma = v),
                    ("experiment", "rank_c") => num(value).map(|v| rank_c = v),

                    ("training", "worlds") => num(value).map(|v| t.worlds = v),
                    ("training", "world_seed") => num(value).map(|v| t.world_seed = v),
                    ("training", "bins") => num(value).map(|v| t.bins = v),
                    ("training", "qnet_epochs") => num(value).map(|v| t.qnet_epochs = v),
                    ("training", "ppo_updates") => num(value).map(|v| t.ppo_updates = v),
                    ("training", "ppo_episodes") => num(value).map(|v| t.ppo_episodes = v),
                    ("training", "frames") => value.parse().map(|v| t.frames = v).map_err(|e: Error| e.to_string()),
                    ("training", "type_episodes") => num(value).map(|v| t.type_episodes = v),

                    ("models", "qnet") => {
                        let _: () = cfg.models.qnet = Some(PathBuf::from(value));
                        Ok(())
                    },
                    ("models", "policy") => {
                        let _: () = cfg.models.policy = Some(PathBuf::from(value));
                        Ok(())
                    },
                    ("models", "at") => {
                        let _: () = cfg.models.at = Some(PathBuf::from(value));
                        Ok(())
                    },

                    ("", _) => Err("keys must be inside a [section]".to_string()),
                    ("world" | "annotator" | "propagation" | "experiment" | "training" | "models", _) => {
                        Err("unknown key".to_string())
                    }
                    _ => return Err(Error::Config(format!("unknown section [{section}]"))),
                };
                r.map_err(|m| Error::Config(format!("[{section}] {key} = {value}: {m}")))?;
            }
        }
        cfg.mode = match schedule.as_str() {
            "none" => RunMode::Sessions,
            "ranked" => RunMode::Collection(Schedule::Ranked { gamma, c: rank_c }),
            "round_robin" => RunMode::Collection(Schedule::RoundRobin),
            s => return Err(Error::Config(format!("unknown schedule `{s}` (expected none|ranked|round_robin)"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.loop_cfg.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.videos == 0 {
            return bad("at least one video is needed".into());
        }
        if self.methods.is_empty() {
            return bad("no methods configured".into());
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return bad(format!("budget must be positive, got {}", self.budget));
        }
        if let Some(t) = self.thresholds.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
            return bad(format!("thresholds must lie in (0, 1), got {t}"));
        }
        if self.seeds.is_empty() {
            return bad("no seeds configured".into());
        }
        if let RunMode::Collection(Schedule::Ranked { gamma, c }) = self.mode {
            if !(gamma > 0.0 && gamma <= 1.0 && c.is_finite()) {
                return bad(format!("ranking needs gamma in (0, 1] and a finite c, got {gamma} and {c}"));
            }
            if let Some(m) = self.methods.iter().find(|m| !m.needs().1) {
                return bad(format!("ranked scheduling uses the policy value, but method {} has no policy", m.name()));
            }
        }
        let t = &self.training;
        if t.worlds == 0 || t.bins < 2 || t.qnet_epochs == 0 || t.ppo_episodes == 0 {
            return bad("training needs worlds, at least 2 bins, epochs and episodes".into());
        }
        Ok(())
    }

    /// World configurations of the evaluation videos.
    pub fn eval_worlds(&self) -> Vec<WorldConfig> {
        let base = if self.held_out { self.world.held_out() } else { self.world.clone() };
        (0..self.videos as u64).map(|i| WorldConfig { seed: base.seed + i, ..base.clone() }).collect()
    }

    /// World configurations models are trained on.
    pub fn training_worlds(&self) -> Vec<WorldConfig> {
        (0..self.training.worlds as u64).map(|i| WorldConfig { seed: self.training.world_seed + i, ..self.world.clone() }).collect()
    }
}
