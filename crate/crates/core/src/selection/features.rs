use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::iou;
use crate::propagation::AnnotatedSet;
use crate::synthworld::Video;

pub const FEATURE_DIM: usize = 16;
/// Bumped whenever the meaning of a slot changes; stored with saved models.
pub const FEATURE_SCHEMA: u32 = 1;

/// Handcrafted description of one frame and its predicted mask.
///
/// | slot | feature |
/// |------|---------|
/// | 0 | mask area / image area |
/// | 1 | boundary pixels / mask area |
/// | 2 | `ln(1 + components)` |
/// | 3 | centroid shift from the previous frame's mask / image diagonal |
/// | 4 | IoU with the previous frame's mask |
/// | 5 | IoU with the next frame's mask |
/// | 6 | distance to the nearest annotated frame / N |
/// | 7 | z-score of the mask area across the session, clamped to ±5 |
/// | 8, 9 | mean intensity inside / outside the mask |
/// | 10, 11 | intensity variance inside / outside the mask |
/// | 12 | mean intensity gradient along the mask boundary |
/// | 13 | frame index / N |
/// | 14 | share of outer-ring pixels that look like the keyframe object |
/// | 15 | share of mask pixels that look like the keyframe object |
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Intensity distance under which a pixel counts as matching the object.
const MATCH_RADIUS: f64 = 0.12;

struct Stats {
    mean: f64,
    var: f64,
}

fn stats(video: &Video, frame: usize, pixels: impl Iterator<Item = usize>) -> Option<Stats> {
    let img = &video.frames[frame];
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for p in pixels {
        let v = img[p] as f64;
        n += 1;
        s += v;
        s2 += v * v;
    }
    (n > 0).then(|| {
        let mean = s / n as f64;
        Stats { mean, var: (s2 / n as f64 - mean * mean).max(0.0) }
    })
}

fn matching_share(video: &Video, frame: usize, m: &Mask, reference: Option<f64>) -> f64 {
    let (Some(r), false) = (reference, m.is_empty()) else { return 0.0 };
    let img = &video.frames[frame];
    m.ones().filter(|&p| (img[p] as f64 - r).abs() < MATCH_RADIUS).count() as f64 / m.area() as f64
}

fn boundary_gradient(video: &Video, frame: usize, m: &Mask) -> f64 {
    let b = m.boundary();
    if b.is_empty() {
        return 0.0;
    }
    let (w, h) = (video.width(), video.height());
    let img = &video.frames[frame];
    let at = |x: usize, y: usize| img[y * w + x] as f64;
    let total: f64 = b
        .ones()
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let gx = at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y);
            let gy = at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1));
            0.5 * (gx.abs() + gy.abs())
        })
        .sum();
    total / b.area() as f64
}

fn check(video: &Video, i: usize, preds: &[Mask], k: &AnnotatedSet) -> Result<()> {
    if preds.len() != video.n_frames() {
        return Err(Error::Shape(format!("{} predictions for {} frames", preds.len(), video.n_frames())));
    }
    if i >= preds.len() {
        return Err(Error::Bounds { index: i, len: preds.len() });
    }
    if k.is_empty() {
        return Err(Error::State("features need at least one annotated frame".into()));
    }
    Ok(())
}

fn area_stats(preds: &[Mask]) -> (f64, f64) {
    let n = preds.len() as f64;
    let mean = preds.iter().map(|m| m.area() as f64).sum::<f64>() / n;
    let var = preds.iter().map(|m| (m.area() as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn features_with(video: &Video, i: usize, preds: &[Mask], k: &AnnotatedSet, area_mean: f64, area_std: f64) -> Result<FeatureVector> {
    let n = preds.len();
    let (w, h) = (video.width(), video.height());
    let m = &preds[i];
    let prev = &preds[i.saturating_sub(1)];
    let next = &preds[(i + 1).min(n - 1)];
    let area = m.area() as f64;
    let mut f = [0.0; FEATURE_DIM];

    f[0] = area / (w * h) as f64;
    if area > 0.0 {
        f[1] = m.boundary().area() as f64 / area;
    }
    f[2] = (1.0 + m.components4().len() as f64).ln();
    f[3] = match (m.centroid(), prev.centroid()) {
        (Some(a), Some(b)) => ((a.0 - b.0).hypot(a.1 - b.1) / (w as f64).hypot(h as f64)).min(1.0),
        (None, None) => 0.0,
        _ => 1.0,
    };
    f[4] = iou(m, prev)?;
    f[5] = iou(m, next)?;
    let j = k.nearest(i)?;
    f[6] = i.abs_diff(j) as f64 / n as f64;
    if area_std > 0.0 {
        f[7] = ((area - area_mean) / area_std).clamp(-5.0, 5.0);
    }
    let inside = stats(video, i, m.ones());
    let outside = stats(video, i, (0..w * h).filter(|&p| !m.get_index(p)));
    if let Some(s) = &inside {
        f[8] = s.mean;
        f[10] = s.var;
    }
    if let Some(s) = &outside {
        f[9] = s.mean;
        f[11] = s.var;
    }
    f[12] = boundary_gradient(video, i, m);
    f[13] = i as f64 / n as f64;
    let key = k.get(j).expect("nearest frame is annotated");
    let reference = stats(video, j, key.ones()).map(|s| s.mean);
    f[14] = matching_share(video, i, &m.outer_ring(), reference);
    f[15] = matching_share(video, i, m, reference);
    Ok(FeatureVector(f))
}

/// Features of frame `i` given the session's current predictions. The first
/// and last frames use themselves as the missing neighbour.
pub fn extract_features(video: &Video, object: usize, i: usize, preds: &[Mask], k: &AnnotatedSet) -> Result<FeatureVector> {
    if object >= video.n_objects() {
        return Err(Error::Bounds { index: object, len: video.n_objects() });
    }
    check(video, i, preds, k)?;
    let (mean, std) = area_stats(preds);
    features_with(video, i, preds, k, mean, std)
}

/// Features of every frame, sharing the per-session statistics.
pub fn extract_all_features(video: &Video, object: usize, preds: &[Mask], k: &AnnotatedSet) -> Result<Vec<FeatureVector>> {
    if object >= video.n_objects() {
        return Err(Error::Bounds { index: object, len: video.n_objects() });
    }
    check(video, 0, preds, k)?;
    let (mean, std) = area_stats(preds);
    (0..preds.len()).map(|i| features_with(video, i, preds, k, mean, std)).collect()
}
