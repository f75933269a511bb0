//! Keyframe-to-video mask propagation.
//!
//! A stand-in for a learned video segmentation tracker: each frame copies the
//! mask of its nearest annotated frame, moves it along the object's true
//! motion with accumulated drift noise, and roughens its boundary in
//! proportion to the temporal distance. A tracker that crosses an event
//! (disappearance, occlusion, transformation) loses the object and stops
//! following it.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::rng::{self, tag};
use crate::synthworld::Video;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Drawn,
    Refined,
}

/// Annotated keyframes in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnnotatedSet {
    entries: Vec<(usize, Mask, Provenance)>,
    /// Annotated frame indices, ascending.
    sorted: Vec<usize>,
}

impl AnnotatedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: usize, mask: Mask, provenance: Provenance) -> Result<()> {
        if self.contains(frame) {
            return Err(Error::State(format!("frame {frame} is already annotated")));
        }
        if let Some((_, first, _)) = self.entries.first() {
            first.check_shape(&mask)?;
        }
        let pos = self.sorted.partition_point(|&f| f < frame);
        self.sorted.insert(pos, frame);
        self.entries.push((frame, mask, provenance));
        Ok(())
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.sorted.binary_search(&frame).is_ok()
    }

    pub fn get(&self, frame: usize) -> Option<&Mask> {
        self.entries.iter().find(|e| e.0 == frame).map(|e| &e.1)
    }

    pub fn provenance(&self, frame: usize) -> Option<Provenance> {
        self.entries.iter().find(|e| e.0 == frame).map(|e| e.2)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Frames in insertion order.
    pub fn frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Frames in ascending order.
    pub fn sorted_frames(&self) -> &[usize] {
        &self.sorted
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &Mask, Provenance)> + '_ {
        self.entries.iter().map(|(f, m, p)| (*f, m, *p))
    }

    /// Annotated frame closest to `i`; ties go to the smaller index.
    pub fn nearest(&self, i: usize) -> Result<usize> {
        nearest_in(&self.sorted, i).ok_or_else(|| Error::State("no annotated frames".into()))
    }
}

fn nearest_in(sorted: &[usize], i: usize) -> Option<usize> {
    let pos = sorted.partition_point(|&f| f < i);
    let after = sorted.get(pos).copied();
    let before = pos.checked_sub(1).map(|p| sorted[p]);
    match (before, after) {
        (None, None) => None,
        (Some(b), None) => Some(b),
        (None, Some(a)) => Some(a),
        (Some(b), Some(a)) => Some(if a - i < i - b { a } else { b }),
    }
}

/// Nearest annotated frame of `i` in `k`; ties go to the smaller index.
pub fn nearest_annotated(i: usize, k: &AnnotatedSet) -> Result<usize> {
    k.nearest(i)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationParams {
    /// Per-step standard deviation of the positional drift, pixels.
    pub drift_sigma: f64,
    /// Boundary jitter probability added per frame of distance.
    pub jitter_rate: f64,
    pub jitter_cap: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams { drift_sigma: 0.6, jitter_rate: 0.02, jitter_cap: 0.5 }
    }
}

impl PropagationParams {
    /// Noise-free propagation: masks are only moved along the true path.
    pub fn exact() -> Self {
        PropagationParams { drift_sigma: 0.0, jitter_rate: 0.0, jitter_cap: 0.0 }
    }
}

/// Predicted mask for frame `i` from keyframe `j`. The noise stream depends
/// only on `(seed, object, j, i)`, so a frame's prediction is unchanged as
/// long as its nearest keyframe is.
fn propagate_one(video: &Video, object: usize, j: usize, key: &Mask, i: usize, params: &PropagationParams, seed: u64) -> Mask {
    let track = &video.tracks[object];
    let dist = i.abs_diff(j);
    let mut rng = rng::stream(seed, &[tag::PROPAGATION, object as u64, j as u64, i as u64]);

    let stop = track.first_event_between(j, i).unwrap_or(i);
    let (from, to) = (&track.poses[j], &track.poses[stop]);
    let (mut dx, mut dy) = (to.cx - from.cx, to.cy - from.cy);
    for _ in 0..dist {
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        dx += params.drift_sigma * nx;
        dy += params.drift_sigma * ny;
    }
    let mut m = key.shifted(dx.round() as isize, dy.round() as isize);

    let rate = (params.jitter_rate * dist as f64).min(params.jitter_cap);
    if rate > 0.0 && !m.is_empty() {
        let inner = m.boundary();
        let outer = m.outer_ring();
        for p in inner.ones() {
            if rng.random_bool(rate) {
                m.set_index(p, false);
            }
        }
        for p in outer.ones() {
            if rng.random_bool(rate) {
                m.set_index(p, true);
            }
        }
    }
    m
}

fn check_inputs(video: &Video, object: usize, k: &AnnotatedSet) -> Result<()> {
    if object >= video.n_objects() {
        return Err(Error::Bounds { index: object, len: video.n_objects() });
    }
    if k.is_empty() {
        return Err(Error::State("propagation needs at least one annotated frame".into()));
    }
    for (f, m, _) in k.entries() {
        if f >= video.n_frames() {
            return Err(Error::Bounds { index: f, len: video.n_frames() });
        }
        if m.width() != video.width() || m.height() != video.height() {
            return Err(Error::Shape(format!(
                "annotated mask {}x{} does not match video {}x{}",
                m.width(),
                m.height(),
                video.width(),
                video.height()
            )));
        }
    }
    Ok(())
}

/// Predicts a mask for every frame of `object` from the keyframes in `k`.
/// Annotated frames are returned exactly as stored.
pub fn propagate(video: &Video, object: usize, k: &AnnotatedSet, params: &PropagationParams, seed: u64) -> Result<Vec<Mask>> {
    check_inputs(video, object, k)?;
    (0..video.n_frames())
        .map(|i| {
            let j = k.nearest(i)?;
            let key = k.get(j).expect("nearest frame is annotated");
            Ok(if i == j { key.clone() } else { propagate_one(video, object, j, key, i, params, seed) })
        })
        .collect()
}

/// Frames whose nearest keyframe would become `candidate` if it were added
/// to `k`, as a half-open range.
pub fn affected_range(k: &AnnotatedSet, candidate: usize, n_frames: usize) -> std::ops::Range<usize> {
    let sorted = k.sorted_frames();
    let pos = sorted.partition_point(|&f| f < candidate);
    let left = pos.checked_sub(1).map(|p| sorted[p]);
    let right = sorted.get(pos).copied();
    let lo = match left {
        // frames strictly closer to candidate than to `l`; ties go to `l`
        Some(l) => l + (candidate - l) / 2 + 1,
        None => 0,
    };
    let hi = match right {
        // ties between candidate and `r` go to the candidate
        Some(r) => candidate + (r - candidate) / 2 + 1,
        None => n_frames,
    };
    lo.min(candidate)..hi.max(candidate + 1)
}

/// Predictions for the frames in [`affected_range`] after adding `mask` at
/// `candidate`. Together with the unchanged frames this equals a full
/// [`propagate`] over `k ∪ {candidate}`.
pub fn propagate_with_candidate(
    video: &Video,
    object: usize,
    k: &AnnotatedSet,
    candidate: usize,
    mask: &Mask,
    params: &PropagationParams,
    seed: u64,
) -> Result<(std::ops::Range<usize>, Vec<Mask>)> {
    check_inputs(video, object, k)?;
    let range = affected_range(k, candidate, video.n_frames());
    let preds = range
        .clone()
        .map(|i| if i == candidate { mask.clone() } else { propagate_one(video, object, candidate, mask, i, params, seed) })
        .collect();
    Ok((range, preds))
}
