//! Shared fixtures for the criterion benches.

use evavos::annotator::draw_mask;
use evavos::propagation::{propagate, AnnotatedSet, PropagationParams, Provenance};
use evavos::rng::stream;
use evavos::synthworld::{generate_video, Video, WorldConfig};
use evavos::{AnnotatorModel, Mask};

/// A default world with a drawn mask on frame 0 and its propagation.
pub struct Fixture {
    pub video: Video,
    pub k: AnnotatedSet,
    pub preds: Vec<Mask>,
}

pub fn fixture(seed: u64) -> Fixture {
    let video = generate_video(&WorldConfig { seed, ..WorldConfig::default() }).expect("valid world");
    let mut k = AnnotatedSet::new();
    let drawn = draw_mask(&video.gt[0][0], &AnnotatorModel::default(), &mut stream(seed, &[1]));
    k.insert(0, drawn, Provenance::Drawn).expect("frame 0");
    let preds = propagate(&video, 0, &k, &PropagationParams::default(), seed).expect("propagation");
    Fixture { video, k, preds }
}
