//! Procedural videos with ground-truth object tracks.
//!
//! Objects are discs or star-shaped polygons that drift, change scale and
//! rotate. Per object, events can hide it (disappearance, full occlusion),
//! cover part of it (partial occlusion) or abruptly change its pose
//! (transformation). Frame rasters are grayscale renderings used only as
//! input to handcrafted features.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::rng::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Disc,
    Polygon,
}

impl std::str::FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disc" => Ok(ShapeKind::Disc),
            "polygon" => Ok(ShapeKind::Polygon),
            _ => Err(Error::Config(format!("unknown shape kind `{s}` (expected disc|polygon)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub n_objects: usize,
    pub shape_kind: ShapeKind,
    /// Standard deviation of the per-frame velocity innovation, in pixels.
    pub motion_sigma: f64,
    /// Standard deviation of the per-frame log-scale and rotation steps.
    pub deform_sigma: f64,
    pub p_occlusion: f64,
    pub p_disappear: f64,
    pub p_transform: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            width: 64,
            height: 64,
            n_frames: 60,
            n_objects: 1,
            shape_kind: ShapeKind::Polygon,
            motion_sigma: 0.35,
            deform_sigma: 0.02,
            p_occlusion: 0.2,
            p_disappear: 0.1,
            p_transform: 0.3,
            seed: 0,
        }
    }
}

impl WorldConfig {
    /// A world with no motion, deformation or events.
    pub fn static_world(seed: u64) -> Self {
        WorldConfig {
            motion_sigma: 0.0,
            deform_sigma: 0.0,
            p_occlusion: 0.0,
            p_disappear: 0.0,
            p_transform: 0.0,
            seed,
            ..WorldConfig::default()
        }
    }

    /// A shifted world family for generalization checks: the other shape
    /// kind, faster motion and more transformations.
    pub fn held_out(&self) -> Self {
        WorldConfig {
            shape_kind: match self.shape_kind {
                ShapeKind::Disc => ShapeKind::Polygon,
                ShapeKind::Polygon => ShapeKind::Disc,
            },
            motion_sigma: self.motion_sigma * 1.5,
            p_transform: (self.p_transform + 0.2).min(1.0),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("world dimensions must be positive, got {}x{}", self.width, self.height));
        }
        if self.n_frames < 2 {
            return bad(format!("n_frames must be at least 2, got {}", self.n_frames));
        }
        if self.n_objects == 0 {
            return bad("n_objects must be at least 1".into());
        }
        for (name, s) in [("motion_sigma", self.motion_sigma), ("deform_sigma", self.deform_sigma)] {
            if !(s.is_finite() && s >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {s}"));
            }
        }
        for (name, p) in [
            ("p_occlusion", self.p_occlusion),
            ("p_disappear", self.p_disappear),
            ("p_transform", self.p_transform),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
    pub rotation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Template {
    Disc { radius: f64 },
    /// Star-shaped outline: radius sampled at equally spaced angles and
    /// linearly interpolated in between.
    Polygon { radii: Vec<f64> },
}

impl Template {
    fn radius_at(&self, angle: f64) -> f64 {
        match self {
            Template::Disc { radius } => *radius,
            Template::Polygon { radii } => {
                let n = radii.len();
                let t = angle.rem_euclid(TAU) / TAU * n as f64;
                let i = t.floor() as usize % n;
                let frac = t - t.floor();
                radii[i] * (1.0 - frac) + radii[(i + 1) % n] * frac
            }
        }
    }

    pub fn max_radius(&self) -> f64 {
        match self {
            Template::Disc { radius } => *radius,
            Template::Polygon { radii } => radii.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Disc that hides part of an object, positioned relative to its centroid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Occluder {
    pub dx: f64,
    pub dy: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    Disappear,
    FullOcclusion,
    PartialOcclusion(Occluder),
    /// Abrupt scale/rotation jump at the event's first frame.
    Transform,
}

/// An event covering frames `start..end`.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub start: usize,
    pub end: usize,
    pub kind: EventKind,
}

impl Event {
    pub fn covers(&self, frame: usize) -> bool {
        (self.start..self.end).contains(&frame)
    }

    pub fn hides_object(&self) -> bool {
        matches!(self.kind, EventKind::Disappear | EventKind::FullOcclusion)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectTrack {
    pub template: Template,
    pub poses: Vec<Pose>,
    pub visible: Vec<bool>,
    pub events: Vec<Event>,
    /// Rendering intensity of the object in frame rasters.
    pub intensity: f64,
}

impl ObjectTrack {
    pub fn n_frames(&self) -> usize {
        self.poses.len()
    }

    /// Frame closest to `a` covered by an event inside the open interval
    /// between `a` and `b`, if any.
    pub fn first_event_between(&self, a: usize, b: usize) -> Option<usize> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi - lo < 2 {
            return None;
        }
        let inner = (lo + 1)..hi;
        let mut best: Option<usize> = None;
        for e in &self.events {
            let s = e.start.max(inner.start);
            let t = e.end.min(inner.end);
            if s >= t {
                continue;
            }
            // nearest covered frame to `a`
            let f = if a <= b { s } else { t - 1 };
            best = Some(match best {
                None => f,
                Some(cur) if a <= b => cur.min(f),
                Some(cur) => cur.max(f),
            });
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub config: WorldConfig,
    /// Row-major intensity rasters in `[0, 1]`, one per frame.
    pub frames: Vec<Vec<f32>>,
    pub tracks: Vec<ObjectTrack>,
    /// Ground truth indexed `[object][frame]`.
    pub gt: Vec<Vec<Mask>>,
}

impl Video {
    pub fn n_frames(&self) -> usize {
        self.config.n_frames
    }

    pub fn n_objects(&self) -> usize {
        self.tracks.len()
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    pub fn gt(&self, object: usize, frame: usize) -> &Mask {
        &self.gt[object][frame]
    }

    pub fn intensity(&self, frame: usize, x: usize, y: usize) -> f64 {
        self.frames[frame][y * self.config.width + x] as f64
    }
}

fn in_shape(template: &Template, pose: &Pose, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - pose.cx, y - pose.cy);
    let d2 = dx * dx + dy * dy;
    let r = match template {
        Template::Disc { radius } => radius * pose.scale,
        Template::Polygon { .. } => template.radius_at(dy.atan2(dx) - pose.rotation) * pose.scale,
    };
    d2 <= r * r
}

fn disc_mask(width: usize, height: usize, cx: f64, cy: f64, radius: f64) -> Mask {
    let r2 = radius * radius;
    let (x0, x1) = ((cx - radius).floor().max(0.0) as usize, ((cx + radius).ceil().max(0.0) as usize).min(width - 1));
    let (y0, y1) = ((cy - radius).floor().max(0.0) as usize, ((cy + radius).ceil().max(0.0) as usize).min(height - 1));
    let mut m = Mask::empty(width, height);
    if cx + radius < 0.0 || cy + radius < 0.0 {
        return m;
    }
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r2 {
                m.set(x, y, true);
            }
        }
    }
    m
}

/// Pixels covered by the posed shape on `frame_idx`, clipped to the image;
/// empty when the object is not visible.
pub fn rasterize(track: &ObjectTrack, frame_idx: usize, width: usize, height: usize) -> Result<Mask> {
    if frame_idx >= track.n_frames() {
        return Err(Error::Bounds { index: frame_idx, len: track.n_frames() });
    }
    let mut m = Mask::new(width, height)?;
    if !track.visible[frame_idx] {
        return Ok(m);
    }
    let pose = &track.poses[frame_idx];
    let reach = track.template.max_radius() * pose.scale + 1.0;
    let x0 = (pose.cx - reach).floor().max(0.0) as usize;
    let y0 = (pose.cy - reach).floor().max(0.0) as usize;
    let x1 = (pose.cx + reach).ceil().min(width as f64 - 1.0);
    let y1 = (pose.cy + reach).ceil().min(height as f64 - 1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return Ok(m);
    }
    for y in y0..=y1 as usize {
        for x in x0..=x1 as usize {
            if in_shape(&track.template, pose, x as f64, y as f64) {
                m.set(x, y, true);
            }
        }
    }
    Ok(m)
}

fn occluder_mask(track: &ObjectTrack, occ: &Occluder, frame: usize, width: usize, height: usize) -> Mask {
    let pose = &track.poses[frame];
    disc_mask(width, height, pose.cx + occ.dx * pose.scale, pose.cy + occ.dy * pose.scale, occ.radius * pose.scale)
}

/// Removes occluded pixels from the ground truth: partial occlusions subtract
/// the occluder disc, full occlusions empty the mask.
pub fn occlusion_apply(mut video: Video) -> Video {
    let (w, h) = (video.config.width, video.config.height);
    for (o, track) in video.tracks.iter().enumerate() {
        for e in &track.events {
            for f in e.start..e.end.min(track.n_frames()) {
                match &e.kind {
                    EventKind::FullOcclusion => video.gt[o][f] = Mask::empty(w, h),
                    EventKind::PartialOcclusion(occ) => {
                        let cut = occluder_mask(track, occ, f, w, h);
                        video.gt[o][f] = video.gt[o][f].and_not(&cut);
                    }
                    _ => {}
                }
            }
        }
    }
    video
}

fn sample_track(cfg: &WorldConfig, object: usize) -> ObjectTrack {
    let n = cfg.n_frames;
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let side = w.min(h);
    let mut rng = rng::stream(cfg.seed, &[tag::WORLD, object as u64]);

    let base = side * rng.random_range(0.08..0.14);
    let template = match cfg.shape_kind {
        ShapeKind::Disc => Template::Disc { radius: base },
        ShapeKind::Polygon => {
            let k = 12;
            Template::Polygon { radii: (0..k).map(|_| base * rng.random_range(0.75..1.25)).collect() }
        }
    };
    let reach = template.max_radius();
    let margin = |extent: f64| (reach + 1.0).min(extent / 2.0);
    let mx = margin(w);
    let my = margin(h);

    let mut pose = Pose {
        cx: rng.random_range(mx..=(w - 1.0 - mx).max(mx)),
        cy: rng.random_range(my..=(h - 1.0 - my).max(my)),
        scale: 1.0,
        rotation: rng.random_range(0.0..TAU),
    };
    let intensity = rng.random_range(0.55..0.95);

    // events
    let mut events = Vec::new();
    let span = |rng: &mut crate::rng::StreamRng| {
        let lo = (n / 10).max(1);
        let hi = (n / 5).max(lo);
        let len = rng.random_range(lo..=hi).min(n - 1);
        let start = rng.random_range(1..=n - len);
        (start, start + len)
    };
    if rng.random_bool(cfg.p_disappear) {
        let (s, e) = span(&mut rng);
        events.push(Event { start: s, end: e, kind: EventKind::Disappear });
    }
    if rng.random_bool(cfg.p_occlusion) {
        let (s, e) = span(&mut rng);
        if rng.random_bool(0.5) {
            events.push(Event { start: s, end: e, kind: EventKind::FullOcclusion });
        } else {
            let angle = rng.random_range(0.0..TAU);
            let dist = 0.8 * base;
            let occ = Occluder { dx: dist * angle.cos(), dy: dist * angle.sin(), radius: 0.7 * base };
            events.push(Event { start: s, end: e, kind: EventKind::PartialOcclusion(occ) });
        }
    }
    let mut transform_at = None;
    if rng.random_bool(cfg.p_transform) {
        let s = rng.random_range(1..n);
        transform_at = Some(s);
        events.push(Event { start: s, end: s + 1, kind: EventKind::Transform });
    }
    events.sort_by_key(|e| e.start);

    let step = Normal::new(0.0, 1.0).expect("unit normal");
    let mut vx = cfg.motion_sigma * step.sample(&mut rng);
    let mut vy = cfg.motion_sigma * step.sample(&mut rng);
    let mut poses = Vec::with_capacity(n);
    poses.push(pose);
    for f in 1..n {
        vx = 0.85 * vx + cfg.motion_sigma * step.sample(&mut rng);
        vy = 0.85 * vy + cfg.motion_sigma * step.sample(&mut rng);
        pose.cx += vx;
        pose.cy += vy;
        if pose.cx < mx || pose.cx > w - 1.0 - mx {
            vx = -vx;
            pose.cx = pose.cx.clamp(mx, (w - 1.0 - mx).max(mx));
        }
        if pose.cy < my || pose.cy > h - 1.0 - my {
            vy = -vy;
            pose.cy = pose.cy.clamp(my, (h - 1.0 - my).max(my));
        }
        let mut log_scale = pose.scale.ln() + cfg.deform_sigma * step.sample(&mut rng);
        pose.rotation += cfg.deform_sigma * step.sample(&mut rng);
        if transform_at == Some(f) {
            let jump: f64 = if rng.random_bool(0.5) { rng.random_range(0.6..0.8) } else { rng.random_range(1.25..1.45) };
            log_scale += jump.ln();
            pose.rotation += rng.random_range(0.5..1.2) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        pose.scale = log_scale.exp().clamp(0.6, 1.45);
        poses.push(pose);
    }

    let visible = (0..n).map(|f| !events.iter().any(|e| e.hides_object() && e.covers(f))).collect();
    ObjectTrack { template, poses, visible, events, intensity }
}

fn render_frames(cfg: &WorldConfig, tracks: &[ObjectTrack], gt: &[Vec<Mask>]) -> Vec<Vec<f32>> {
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = rng::stream(cfg.seed, &[tag::WORLD, u64::MAX]);
    // coarse value-noise texture shared by all frames
    let cell = 8usize;
    let (gw, gh) = (w / cell + 2, h / cell + 2);
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(0.15..0.4)).collect();
    let texture: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64 / cell as f64, (i / w) as f64 / cell as f64);
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let (fx, fy) = (x - x0 as f64, y - y0 as f64);
            let at = |xx: usize, yy: usize| lattice[yy * gw + xx];
            let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
            let bot = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
            top * (1.0 - fy) + bot * fy
        })
        .collect();
    let noise = Normal::new(0.0, 0.03).expect("valid sigma");
    (0..cfg.n_frames)
        .map(|f| {
            let mut img = texture.clone();
            for (o, track) in tracks.iter().enumerate() {
                for i in gt[o][f].ones() {
                    img[i] = track.intensity;
                }
            }
            for track in tracks {
                for e in &track.events {
                    if !e.covers(f) {
                        continue;
                    }
                    let cover = match &e.kind {
                        EventKind::FullOcclusion => {
                            let p = &track.poses[f];
                            Some(disc_mask(w, h, p.cx, p.cy, track.template.max_radius() * p.scale * 1.2))
                        }
                        EventKind::PartialOcclusion(occ) => Some(occluder_mask(track, occ, f, w, h)),
                        _ => None,
                    };
                    if let Some(c) = cover {
                        for i in c.ones() {
                            img[i] = 0.05;
                        }
                    }
                }
            }
            img.iter().map(|&v| (v + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32).collect()
        })
        .collect()
}

/// Generates the video described by `cfg`. Pure function of the config.
pub fn generate_video(cfg: &WorldConfig) -> Result<Video> {
    cfg.validate()?;
    let tracks: Vec<ObjectTrack> = (0..cfg.n_objects).map(|o| sample_track(cfg, o)).collect();
    let gt = tracks
        .iter()
        .map(|t| (0..cfg.n_frames).map(|f| rasterize(t, f, cfg.width, cfg.height)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let video = occlusion_apply(Video { config: cfg.clone(), frames: Vec::new(), tracks, gt });
    let frames = render_frames(cfg, &video.tracks, &video.gt);
    Ok(Video { frames, ..video })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_track(cx: f64, cy: f64, r: f64, n: usize) -> ObjectTrack {
        ObjectTrack {
            template: Template::Disc { radius: r },
            poses: vec![Pose { cx, cy, scale: 1.0, rotation: 0.0 }; n],
            visible: vec![true; n],
            events: vec![],
            intensity: 0.8,
        }
    }

    #[test]
    fn disc_radius_three_has_area_29() {
        let t = disc_track(10.0, 10.0, 3.0, 1);
        let m = rasterize(&t, 0, 64, 64).unwrap();
        // brute force: integer offsets within distance 3
        let mut expect = 0;
        for dy in -3i32..=3 {
            for dx in -3i32..=3 {
                if dx * dx + dy * dy <= 9 {
                    expect += 1;
                }
            }
        }
        assert_eq!(expect, 29);
        assert_eq!(m.area(), 29);
    }

    #[test]
    fn invisible_frame_is_empty() {
        let mut t = disc_track(10.0, 10.0, 3.0, 2);
        t.visible[1] = false;
        assert!(rasterize(&t, 1, 64, 64).unwrap().is_empty());
        assert!(!rasterize(&t, 0, 64, 64).unwrap().is_empty());
    }

    #[test]
    fn border_disc_is_clipped() {
        let t = disc_track(0.0, 0.0, 3.0, 1);
        let a = rasterize(&t, 0, 64, 64).unwrap().area();
        assert!(a > 0 && a < 29);
    }

    #[test]
    fn frame_out_of_range() {
        let t = disc_track(10.0, 10.0, 3.0, 2);
        assert!(matches!(rasterize(&t, 2, 64, 64), Err(Error::Bounds { .. })));
    }

    #[test]
    fn deterministic() {
        let cfg = WorldConfig { n_objects: 3, seed: 42, ..WorldConfig::default() };
        assert_eq!(generate_video(&cfg).unwrap(), generate_video(&cfg).unwrap());
    }

    #[test]
    fn static_world_masks_are_constant() {
        for seed in 0..5 {
            let cfg = WorldConfig { n_objects: 2, ..WorldConfig::static_world(seed) };
            let v = generate_video(&cfg).unwrap();
            for o in 0..2 {
                for f in 0..cfg.n_frames {
                    assert_eq!(v.gt[o][f], v.gt[o][0]);
                }
            }
        }
    }

    #[test]
    fn certain_disappearance_empties_some_frame() {
        for seed in 0..10 {
            let cfg = WorldConfig { n_objects: 3, p_disappear: 1.0, seed, ..WorldConfig::default() };
            let v = generate_video(&cfg).unwrap();
            for o in 0..3 {
                assert!(v.gt[o].iter().any(Mask::is_empty), "seed {seed} object {o}");
                assert!(v.gt[o].iter().any(|m| !m.is_empty()));
            }
        }
    }

    #[test]
    fn gt_empty_iff_invisible() {
        for seed in 0..10 {
            let cfg = WorldConfig { n_objects: 3, p_occlusion: 1.0, p_disappear: 0.5, seed, ..WorldConfig::default() };
            let v = generate_video(&cfg).unwrap();
            for (o, t) in v.tracks.iter().enumerate() {
                for f in 0..cfg.n_frames {
                    assert_eq!(v.gt[o][f].is_empty(), !t.visible[f]);
                    assert_eq!((v.gt[o][f].width(), v.gt[o][f].height()), (64, 64));
                }
            }
        }
    }

    #[test]
    fn occlusion_only_removes_pixels() {
        let mut saw_partial = false;
        for seed in 0..20 {
            let cfg = WorldConfig { n_objects: 2, p_occlusion: 1.0, seed, ..WorldConfig::default() };
            let v = generate_video(&cfg).unwrap();
            for (o, t) in v.tracks.iter().enumerate() {
                for e in &t.events {
                    for f in e.start..e.end {
                        let raw = rasterize(t, f, 64, 64).unwrap();
                        assert!(v.gt[o][f].and_not(&raw).is_empty());
                        match e.kind {
                            EventKind::FullOcclusion => assert!(v.gt[o][f].is_empty()),
                            EventKind::PartialOcclusion(_) if !raw.is_empty() => {
                                saw_partial = true;
                                assert!(v.gt[o][f].area() < raw.area());
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        assert!(saw_partial);
    }

    #[test]
    fn no_events_leaves_video_unchanged() {
        let cfg = WorldConfig { n_objects: 2, p_occlusion: 0.0, p_disappear: 0.0, p_transform: 0.0, seed: 3, ..WorldConfig::default() };
        let v = generate_video(&cfg).unwrap();
        assert_eq!(occlusion_apply(v.clone()), v);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            WorldConfig { n_frames: 0, ..WorldConfig::default() },
            WorldConfig { motion_sigma: -1.0, ..WorldConfig::default() },
            WorldConfig { p_transform: 1.5, ..WorldConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(generate_video(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn event_lookup_between_frames() {
        let mut t = disc_track(10.0, 10.0, 3.0, 30);
        t.events.push(Event { start: 10, end: 14, kind: EventKind::Disappear });
        assert_eq!(t.first_event_between(0, 20), Some(10));
        assert_eq!(t.first_event_between(25, 5), Some(13));
        assert_eq!(t.first_event_between(0, 10), None);
        assert_eq!(t.first_event_between(14, 29), None);
        assert_eq!(t.first_event_between(13, 29), None);
        assert_eq!(t.first_event_between(12, 29), Some(13));
    }
}
