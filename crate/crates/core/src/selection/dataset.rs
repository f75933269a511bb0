use std::fmt;

use super::features::{extract_all_features, FeatureVector};
use super::select::{select_random, worst_quality};
use crate::annotator::{draw_mask, AnnotatorModel};
use crate::error::{Error, Result};
use crate::metrics::{default_tolerance, jf, quality_to_bin};
use crate::propagation::{propagate, AnnotatedSet, PropagationParams, Provenance};
use crate::rng::{self, tag};
use crate::synthworld::{generate_video, WorldConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionMode {
    Random,
    Oracle,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::Random => "random",
            SelectionMode::Oracle => "oracle",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityRecord {
    pub features: FeatureVector,
    pub bin: usize,
    /// J&F the bin was derived from.
    pub jf: f64,
    pub world_seed: u64,
    pub iteration: usize,
    pub mode: SelectionMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityDataset {
    pub bins: usize,
    pub records: Vec<QualityRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[derive(Default)]
pub struct SimulationSetup {
    pub annotator: AnnotatorModel,
    pub propagation: PropagationParams,
    /// Boundary tolerance; `None` uses the image-size default.
    pub tol: Option<f64>,
    /// Iterations per rollout; `None` uses `min(10, N / 4)`.
    pub iterations: Option<usize>,
}


/// Rolls the annotation loop with drawn masks on every world and object,
/// once per selection mode, and records the feature vector and quality bin
/// of every unannotated frame after each propagation.
pub fn simulate_quality_dataset(
    worlds: &[WorldConfig],
    bins: usize,
    modes: &[SelectionMode],
    setup: &SimulationSetup,
    seed: u64,
) -> Result<QualityDataset> {
    if worlds.is_empty() {
        return Err(Error::Config("quality simulation needs at least one world".into()));
    }
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 quality bins, got {bins}")));
    }
    setup.annotator.validate()?;
    let mut records = Vec::new();
    for cfg in worlds {
        let video = generate_video(cfg)?;
        let n = video.n_frames();
        let tol = setup.tol.unwrap_or_else(|| default_tolerance(video.width(), video.height()));
        let iterations = setup.iterations.unwrap_or((n / 4).min(10)).clamp(1, n - 1);
        for object in 0..video.n_objects() {
            let gt = &video.gt[object];
            for &mode in modes {
                let path = [tag::SELECTION, cfg.seed, object as u64, mode as u64];
                let prop_seed = rng::derive_seed(seed, &path);
                let mut ann_rng = rng::stream(seed, &[tag::ANNOTATOR, cfg.seed, object as u64, mode as u64]);
                let mut pick_rng = rng::stream(seed, &path);
                let mut k = AnnotatedSet::new();
                k.insert(0, draw_mask(&gt[0], &setup.annotator, &mut ann_rng), Provenance::Drawn)?;
                for t in 1..=iterations {
                    let preds = propagate(&video, object, &k, &setup.propagation, prop_seed)?;
                    let feats = extract_all_features(&video, object, &preds, &k)?;
                    let mut quality = Vec::with_capacity(n);
                    for i in 0..n {
                        let q = jf(&preds[i], &gt[i], tol)?;
                        quality.push(q);
                        if !k.contains(i) {
                            records.push(QualityRecord {
                                features: feats[i],
                                bin: quality_to_bin(q, bins)?.bin,
                                jf: q,
                                world_seed: cfg.seed,
                                iteration: t,
                                mode,
                            });
                        }
                    }
                    if t == iterations {
                        break;
                    }
                    let annotated: Vec<usize> = k.sorted_frames().to_vec();
                    let f = match mode {
                        SelectionMode::Random => select_random(&mut pick_rng, n, &annotated)?,
                        SelectionMode::Oracle => worst_quality(&quality, &annotated)?,
                    };
                    k.insert(f, draw_mask(&gt[f], &setup.annotator, &mut ann_rng), Provenance::Drawn)?;
                }
            }
        }
    }
    Ok(QualityDataset { bins, records })
}
