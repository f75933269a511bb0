use crate::annotator::{annotate, default_action_pool, AnnotationType, AnnotatorModel, CostModel};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::{default_tolerance, jf, session_jf, Curve};
use crate::policy::{
    action_code, play_episode, rank_score, select_action, AtModels, Choice, Episode, FrameEnv, PolicyModel, TypeModels,
    TypeSelector,
};
use crate::propagation::{propagate, AnnotatedSet, PropagationParams, Provenance};
use crate::rng::{self, tag, StreamRng};
use crate::selection::{extract_all_features, select_farthest, select_l2_raw, select_random, select_upper_bound, FrameSelector, QNet};
use crate::synthworld::Video;

/// Parameters shared by every session of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    pub annotator: AnnotatorModel,
    pub cost: CostModel,
    pub propagation: PropagationParams,
    pub actions: Vec<AnnotationType>,
    /// Maximum annotation steps on one selected frame.
    pub g_max: usize,
    /// Boundary tolerance; `None` uses the image-size default.
    pub tol: Option<f64>,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            annotator: AnnotatorModel::default(),
            cost: CostModel::default(),
            propagation: PropagationParams::default(),
            actions: default_action_pool(),
            g_max: 3,
            tol: None,
            seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        self.annotator.validate()?;
        self.cost.validate()?;
        if self.actions.is_empty() {
            return Err(Error::Config("action pool is empty".into()));
        }
        for a in &self.actions {
            a.validate()?;
        }
        if self.g_max == 0 {
            return Err(Error::Config("g_max must be at least 1".into()));
        }
        if matches!(self.tol, Some(t) if !(t >= 0.0)) {
            return Err(Error::Config("tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Trained models an experiment may use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Models {
    pub qnet: Option<QNet>,
    pub policy: Option<PolicyModel>,
    pub at: Option<AtModels>,
}

impl Models {
    pub fn type_models(&self) -> TypeModels<'_> {
        TypeModels { policy: self.policy.as_ref(), at: self.at.as_ref() }
    }
}

/// A frame selector paired with a type selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Method {
    pub frames: FrameSelector,
    pub types: TypeSelector,
}

impl Method {
    pub fn new(frames: FrameSelector, types: TypeSelector) -> Self {
        Method { frames, types }
    }

    /// `eva` for QNet frames with policy types, else `<frames>+<types>`.
    pub fn name(&self) -> String {
        if self.frames == FrameSelector::QNet && self.types == TypeSelector::Rl {
            "eva".to_string()
        } else {
            format!("{}+{}", self.frames, self.types)
        }
    }

    /// Whether running this method needs each of (QNet, policy, type
    /// baselines).
    pub fn needs(&self) -> (bool, bool, bool) {
        (
            self.frames == FrameSelector::QNet || self.types.needs_qnet(),
            self.types == TypeSelector::Rl,
            matches!(self.types, TypeSelector::AtImprov | TypeSelector::AtClf),
        )
    }

    pub fn check_models(&self, models: &Models) -> Result<()> {
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Config(format!("method {} needs a {what}", self.name()))) };
        let (q, p, at) = self.needs();
        need(models.qnet.is_some() || !q, "QNet")?;
        need(models.policy.is_some() || !p, "policy model")?;
        need(models.at.is_some() || !at, "type baseline model")
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    /// `eva` or `<frames>+<types>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "eva" {
            return Ok(Method::new(FrameSelector::QNet, TypeSelector::Rl));
        }
        let (f, t) = s.split_once('+').ok_or_else(|| Error::Config(format!("method `{s}` is not `eva` or `<frames>+<types>`")))?;
        Ok(Method::new(f.trim().parse()?, t.trim().parse()?))
    }
}

/// One annotated frame in a session log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub iteration: usize,
    pub frame: usize,
    pub actions: Vec<AnnotationType>,
    pub cost: f64,
    /// Session J&F after propagating with this annotation.
    pub session_jf: f64,
}

/// Annotation state of one object in one video.
#[derive(Clone, Debug)]
pub struct SessionState<'v> {
    pub video: &'v Video,
    pub video_id: u64,
    pub object: usize,
    /// Iteration index; the initial mask is iteration 0.
    pub t: usize,
    pub k: AnnotatedSet,
    pub preds: Vec<Mask>,
    pub elapsed: f64,
    pub log: Vec<LogEntry>,
    pub tol: f64,
    pub current_jf: f64,
    propagation_seed: u64,
    annotator_seed: u64,
    frame_rng: StreamRng,
    type_rng: StreamRng,
}

impl<'v> SessionState<'v> {
    /// Draws the mask of frame 0, bills it and propagates.
    pub fn start(video: &'v Video, video_id: u64, object: usize, cfg: &LoopConfig) -> Result<Self> {
        cfg.validate()?;
        if object >= video.n_objects() {
            return Err(Error::Bounds { index: object, len: video.n_objects() });
        }
        let path = [video_id, object as u64];
        let annotator_seed = rng::derive_seed(cfg.seed, &[tag::ANNOTATOR, path[0], path[1]]);
        let mut s = SessionState {
            video,
            video_id,
            object,
            t: 0,
            k: AnnotatedSet::new(),
            preds: Vec::new(),
            elapsed: 0.0,
            log: Vec::new(),
            tol: cfg.tol.unwrap_or_else(|| default_tolerance(video.width(), video.height())),
            current_jf: 0.0,
            propagation_seed: rng::derive_seed(cfg.seed, &[tag::PROPAGATION, path[0], path[1]]),
            annotator_seed,
            frame_rng: rng::stream(cfg.seed, &[tag::SELECTION, path[0], path[1]]),
            type_rng: rng::stream(cfg.seed, &[tag::POLICY, path[0], path[1]]),
        };
        let (mask, cost) = s.draw(0, cfg)?;
        s.k.insert(0, mask, Provenance::Drawn)?;
        s.elapsed = cost;
        s.propagate(cfg)?;
        s.log.push(LogEntry { iteration: 0, frame: 0, actions: vec![AnnotationType::MaskDraw], cost, session_jf: s.current_jf });
        Ok(s)
    }

    /// The mask drawing the annotator would produce as the first step on
    /// `frame`.
    fn draw(&self, frame: usize, cfg: &LoopConfig) -> Result<(Mask, f64)> {
        let mut r = rng::stream(self.annotator_seed, &[frame as u64, 0, action_code(AnnotationType::MaskDraw)]);
        annotate(AnnotationType::MaskDraw, None, &self.video.gt[self.object][frame], &cfg.annotator, &cfg.cost, &mut r)
    }

    pub fn n_frames(&self) -> usize {
        self.video.n_frames()
    }

    pub fn gt(&self) -> &'v [Mask] {
        &self.video.gt[self.object]
    }

    pub fn propagate(&mut self, cfg: &LoopConfig) -> Result<f64> {
        self.preds = propagate(self.video, self.object, &self.k, &cfg.propagation, self.propagation_seed)?;
        self.current_jf = session_jf(&self.preds, self.gt(), self.tol)?;
        Ok(self.current_jf)
    }

    pub fn is_saturated(&self) -> bool {
        self.k.len() >= self.n_frames()
    }

    pub fn frame_quality(&self) -> Result<Vec<f64>> {
        self.preds.iter().zip(self.gt()).map(|(p, g)| jf(p, g, self.tol)).collect()
    }

    pub fn select_frame(&mut self, selector: FrameSelector, qnet: Option<&QNet>, cfg: &LoopConfig) -> Result<usize> {
        let annotated = self.k.sorted_frames().to_vec();
        let n = self.n_frames();
        match selector {
            FrameSelector::Random => select_random(&mut self.frame_rng, n, &annotated),
            FrameSelector::WorstOracle => crate::selection::select_worst_oracle(&self.preds, self.gt(), &annotated, self.tol),
            FrameSelector::UpperBound => select_upper_bound(
                self.video,
                self.object,
                &self.k,
                &self.preds,
                &cfg.propagation,
                self.propagation_seed,
                self.tol,
                |f| self.draw(f, cfg).map(|d| d.0),
            ),
            FrameSelector::L2Raw => select_l2_raw(&extract_all_features(self.video, self.object, &self.preds, &self.k)?, &annotated),
            FrameSelector::QNet => {
                let q = qnet.ok_or_else(|| Error::Config("qnet frame selection needs a QNet".into()))?;
                let feats = extract_all_features(self.video, self.object, &self.preds, &self.k)?;
                let emb = feats.iter().map(|f| q.embed(f.as_slice()).map(|e| e.1)).collect::<Result<Vec<_>>>()?;
                select_farthest(&emb, &annotated)
            }
        }
    }

    pub fn env<'a>(&'a self, frame: usize, qnet: Option<&'a QNet>, cfg: &'a LoopConfig) -> FrameEnv<'a> {
        FrameEnv {
            video: self.video,
            object: self.object,
            frame,
            preds: &self.preds,
            k: &self.k,
            qnet,
            actions: &cfg.actions,
            annotator: &cfg.annotator,
            cost: &cfg.cost,
            g_max: cfg.g_max,
            tol: self.tol,
            annotator_seed: self.annotator_seed,
        }
    }

    /// Plays the annotation game on `frame` with `kind` and commits the
    /// result. Steps stop once `budget_left` seconds are spent.
    pub fn annotate_frame(
        &mut self,
        frame: usize,
        kind: TypeSelector,
        models: &Models,
        cfg: &LoopConfig,
        budget_left: Option<f64>,
    ) -> Result<Episode> {
        if self.k.contains(frame) {
            return Err(Error::State(format!("frame {frame} is already annotated")));
        }
        let qnet = if kind.needs_qnet() { models.qnet.as_ref() } else { None };
        let type_models = models.type_models();
        let mut type_rng = self.type_rng.clone();
        let episode = {
            let env = self.env(frame, qnet, cfg);
            play_episode(&env, budget_left, |env, st, ps| {
                select_action(kind, env, st, ps, &type_models, &mut type_rng).map(Choice::plain)
            })?
        };
        self.type_rng = type_rng;
        self.commit(frame, &episode, cfg)?;
        Ok(episode)
    }

    /// Inserts the episode's final mask as an annotation and re-propagates.
    pub fn commit(&mut self, frame: usize, episode: &Episode, cfg: &LoopConfig) -> Result<()> {
        let provenance = if episode.actions.last() == Some(&AnnotationType::MaskDraw) { Provenance::Drawn } else { Provenance::Refined };
        self.k.insert(frame, episode.mask.clone(), provenance)?;
        self.t += 1;
        self.elapsed += episode.cost;
        self.propagate(cfg)?;
        self.log.push(LogEntry {
            iteration: self.t,
            frame,
            actions: episode.actions.clone(),
            cost: episode.cost,
            session_jf: self.current_jf,
        });
        Ok(())
    }

    /// Ranking score of this session for the next iteration, and the frame
    /// it would annotate.
    pub fn rank(&mut self, method: Method, models: &Models, cfg: &LoopConfig, gamma: f64, c: f64) -> Result<(f64, usize)> {
        let policy = models.policy.as_ref().ok_or_else(|| Error::Config("ranked scheduling needs a policy model".into()))?;
        let qnet = models.qnet.as_ref().ok_or_else(|| Error::Config("ranked scheduling needs a QNet".into()))?;
        let frame = self.select_frame(method.frames, Some(qnet), cfg)?;
        let env = self.env(frame, Some(qnet), cfg);
        let state = env.state(&env.start()?)?;
        let (logits, pv) = policy.evaluate(&state)?;
        let theta = cfg.cost.cost(policy.actions[crate::selection::argmax_index(&logits)]);
        Ok((rank_score(pv, self.t, theta, gamma, c)?, frame))
    }
}

/// Runs the annotation loop on one session until `budget` seconds are spent
/// or every frame is annotated. The curve has a point after every
/// propagation.
pub fn run_session<'v>(
    video: &'v Video,
    video_id: u64,
    object: usize,
    method: Method,
    budget: f64,
    models: &Models,
    cfg: &LoopConfig,
) -> Result<(Curve, SessionState<'v>)> {
    if !(budget > 0.0) {
        return Err(Error::Config(format!("budget must be positive, got {budget}")));
    }
    method.check_models(models)?;
    let mut s = SessionState::start(video, video_id, object, cfg)?;
    let mut curve = Curve::new();
    curve.push(s.elapsed, s.current_jf)?;
    while s.elapsed < budget && !s.is_saturated() {
        let frame = s.select_frame(method.frames, models.qnet.as_ref(), cfg)?;
        s.annotate_frame(frame, method.types, models, cfg, Some(budget - s.elapsed))?;
        curve.push(s.elapsed, s.current_jf)?;
    }
    Ok((curve, s))
}

/// How a collection picks the session to annotate next.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    /// Highest ranking score `pv · γ^t / θ_a + c`.
    Ranked { gamma: f64, c: f64 },
    RoundRobin,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Ranked { gamma: 0.9, c: 10.0 }
    }
}

/// Index of the unsaturated session with the highest ranking score (ties to
/// the smaller index) and the frame it would annotate.
pub fn schedule_step(sessions: &mut [SessionState], method: Method, models: &Models, cfg: &LoopConfig, gamma: f64, c: f64) -> Result<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, s) in sessions.iter_mut().enumerate() {
        if s.is_saturated() {
            continue;
        }
        let (score, frame) = s.rank(method, models, cfg, gamma, c)?;
        if best.is_none_or(|(_, _, b)| score > b) {
            best = Some((i, frame, score));
        }
    }
    best.map(|(i, f, _)| (i, f)).ok_or(Error::Exhausted)
}

/// Annotates a collection of sessions under one global budget. All initial
/// masks are billed first; afterwards the curve gets a point (global
/// seconds, mean session J&F) after every annotation.
pub fn run_collection<'v>(
    items: &[(&'v Video, u64, usize)],
    method: Method,
    budget: f64,
    schedule: Schedule,
    models: &Models,
    cfg: &LoopConfig,
) -> Result<(Curve, Vec<SessionState<'v>>)> {
    if items.is_empty() {
        return Err(Error::Config("a collection needs at least one session".into()));
    }
    if !(budget > 0.0) {
        return Err(Error::Config(format!("budget must be positive, got {budget}")));
    }
    method.check_models(models)?;
    let mut sessions = items.iter().map(|&(v, id, o)| SessionState::start(v, id, o, cfg)).collect::<Result<Vec<_>>>()?;
    let mean = |ss: &[SessionState]| ss.iter().map(|s| s.current_jf).sum::<f64>() / ss.len() as f64;
    let mut elapsed: f64 = sessions.iter().map(|s| s.elapsed).sum();
    let mut curve = Curve::new();
    curve.push(elapsed, mean(&sessions))?;
    let mut cursor = 0;
    while elapsed < budget {
        let picked = match schedule {
            Schedule::Ranked { gamma, c } => match schedule_step(&mut sessions, method, models, cfg, gamma, c) {
                Ok(p) => Some(p),
                Err(Error::Exhausted) => None,
                Err(e) => return Err(e),
            },
            Schedule::RoundRobin => {
                let n = sessions.len();
                match (0..n).map(|d| (cursor + d) % n).find(|&i| !sessions[i].is_saturated()) {
                    Some(i) => {
                        cursor = (i + 1) % n;
                        let f = sessions[i].select_frame(method.frames, models.qnet.as_ref(), cfg)?;
                        Some((i, f))
                    }
                    None => None,
                }
            }
        };
        let Some((i, frame)) = picked else { break };
        let before = sessions[i].elapsed;
        sessions[i].annotate_frame(frame, method.types, models, cfg, Some(budget - elapsed))?;
        elapsed += sessions[i].elapsed - before;
        curve.push(elapsed, mean(&sessions))?;
    }
    Ok((curve, sessions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthworld::{generate_video, WorldConfig};

    fn video(seed: u64) -> Video {
        generate_video(&WorldConfig { n_frames: 20, seed, ..WorldConfig::default() }).unwrap()
    }

    fn m(s: &str) -> Method {
        s.parse().unwrap()
    }

    #[test]
    fn budget_of_one_mask_gives_one_point() {
        let v = video(1);
        let cfg = LoopConfig::default();
        let (curve, s) = run_session(&v, 0, 0, m("random+mask_only"), cfg.cost.seconds_per_mask_draw, &Models::default(), &cfg).unwrap();
        assert_eq!(curve.len(), 1);
        assert_eq!(s.k.len(), 1);
        assert_eq!(s.t, 0);
    }

    #[test]
    fn static_perfect_world_is_solved_by_the_first_mask() {
        let v = generate_video(&WorldConfig { n_frames: 20, ..WorldConfig::static_world(3) }).unwrap();
        let cfg = LoopConfig {
            annotator: AnnotatorModel { human_agreement_jf: 1.0, ..AnnotatorModel::default() },
            propagation: PropagationParams::exact(),
            ..LoopConfig::default()
        };
        let s = SessionState::start(&v, 0, 0, &cfg).unwrap();
        assert_eq!(s.current_jf, 1.0);
    }

    #[test]
    fn logs_are_complete_and_budget_is_sound() {
        let v = video(2);
        let cfg = LoopConfig::default();
        for method in ["random+mask_only", "oracle+clicks_only", "upper_bound+random", "oracle+oracle"] {
            let budget = 400.0;
            let (curve, s) = run_session(&v, 7, 0, m(method), budget, &Models::default(), &cfg).unwrap();
            assert_eq!(s.log.len(), s.k.len());
            assert_eq!(s.t + 1, s.k.len());
            let total: f64 = s.log.iter().map(|e| e.cost).sum();
            assert!((total - s.elapsed).abs() < 1e-9);
            let last = s.log.last().unwrap().cost;
            assert!(s.elapsed <= budget + last);
            assert_eq!(curve.len(), s.log.len());
            for (e, &(t, v)) in s.log.iter().zip(curve.points()) {
                assert!(s.k.contains(e.frame));
                assert_eq!(v, e.session_jf);
                assert!(t > 0.0);
            }
        }
    }

    #[test]
    fn sessions_are_deterministic() {
        let v = video(4);
        let cfg = LoopConfig { seed: 11, ..LoopConfig::default() };
        let a = run_session(&v, 1, 0, m("random+random"), 500.0, &Models::default(), &cfg).unwrap();
        let b = run_session(&v, 1, 0, m("random+random"), 500.0, &Models::default(), &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.log, b.1.log);
    }

    #[test]
    fn single_session_collection_matches_run_session() {
        let v = video(5);
        let cfg = LoopConfig::default();
        let method = m("oracle+clicks_only");
        let (single, _) = run_session(&v, 3, 0, method, 300.0, &Models::default(), &cfg).unwrap();
        let (coll, _) = run_collection(&[(&v, 3, 0)], method, 300.0, Schedule::RoundRobin, &Models::default(), &cfg).unwrap();
        assert_eq!(single, coll);
    }

    #[test]
    fn round_robin_alternates() {
        let (a, b) = (video(6), video(7));
        let cfg = LoopConfig::default();
        let (_, sessions) =
            run_collection(&[(&a, 0, 0), (&b, 1, 0)], m("random+mask_only"), 79.0 * 8.0, Schedule::RoundRobin, &Models::default(), &cfg)
                .unwrap();
        // 2 initial masks, then 6 more split evenly
        assert_eq!(sessions[0].log.len(), 4);
        assert_eq!(sessions[1].log.len(), 4);
    }

    #[test]
    fn tiny_budget_and_saturation() {
        let v = generate_video(&WorldConfig { n_frames: 4, seed: 1, ..WorldConfig::default() }).unwrap();
        let cfg = LoopConfig::default();
        let (curve, s) = run_session(&v, 0, 0, m("random+mask_only"), 1.0, &Models::default(), &cfg).unwrap();
        assert_eq!(curve.len(), 1);
        assert_eq!(s.elapsed, 79.0);
        let (_, s) = run_session(&v, 0, 0, m("random+mask_only"), 1e6, &Models::default(), &cfg).unwrap();
        assert!(s.is_saturated());
        assert!(run_session(&v, 0, 0, m("random+mask_only"), 0.0, &Models::default(), &cfg).is_err());
    }

    #[test]
    fn method_names() {
        assert_eq!(m("eva").name(), "eva");
        assert_eq!(m("qnet+rl"), m("eva"));
        assert_eq!(m("oracle+clicks_only").name(), "oracle+clicks3_only");
        assert!("qnet".parse::<Method>().is_err());
    }
}
