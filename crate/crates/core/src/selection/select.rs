use std::fmt;

use rand::Rng;

use super::features::FeatureVector;
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::metrics::jf;
use crate::propagation::{propagate_with_candidate, AnnotatedSet, PropagationParams};
use crate::synthworld::Video;

/// Frame selection strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameSelector {
    Random,
    /// Worst current J&F against the ground truth.
    WorstOracle,
    /// Candidate whose drawn mask most improves the session after
    /// re-propagation.
    UpperBound,
    /// Farthest point in the QNet embedding space.
    QNet,
    /// Farthest point in raw feature space.
    L2Raw,
}

impl FrameSelector {
    pub const ALL: [FrameSelector; 5] =
        [FrameSelector::Random, FrameSelector::WorstOracle, FrameSelector::UpperBound, FrameSelector::QNet, FrameSelector::L2Raw];
}

impl fmt::Display for FrameSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameSelector::Random => "random",
            FrameSelector::WorstOracle => "oracle",
            FrameSelector::UpperBound => "upper_bound",
            FrameSelector::QNet => "qnet",
            FrameSelector::L2Raw => "l2_raw",
        })
    }
}

impl std::str::FromStr for FrameSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FrameSelector::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown frame selector `{s}` (expected random|oracle|upper_bound|qnet|l2_raw)")))
    }
}

/// `true` for frames that may be selected.
fn candidates(n: usize, annotated: &[usize]) -> Result<Vec<bool>> {
    if annotated.is_empty() {
        return Err(Error::State("frame selection needs at least one annotated frame".into()));
    }
    let mut free = vec![true; n];
    for &f in annotated {
        if f >= n {
            return Err(Error::Bounds { index: f, len: n });
        }
        free[f] = false;
    }
    if !free.contains(&true) {
        return Err(Error::Exhausted);
    }
    Ok(free)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance from each unannotated frame to its closest annotated frame;
/// `None` for annotated frames.
pub fn farthest_point_scores(embeddings: &[Vec<f64>], annotated: &[usize]) -> Result<Vec<Option<f64>>> {
    let free = candidates(embeddings.len(), annotated)?;
    let dim = embeddings[0].len();
    if embeddings.iter().any(|e| e.len() != dim) {
        return Err(Error::Shape("embeddings differ in dimension".into()));
    }
    Ok(embeddings
        .iter()
        .zip(&free)
        .map(|(e, &ok)| ok.then(|| annotated.iter().map(|&j| l2(e, &embeddings[j])).fold(f64::INFINITY, f64::min)))
        .collect())
}

/// Unannotated frame farthest from the annotated set in embedding space;
/// ties go to the smaller index.
pub fn select_farthest(embeddings: &[Vec<f64>], annotated: &[usize]) -> Result<usize> {
    let scores = farthest_point_scores(embeddings, annotated)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    Ok(best.expect("at least one candidate").0)
}

pub fn select_l2_raw(features: &[FeatureVector], annotated: &[usize]) -> Result<usize> {
    let raw: Vec<Vec<f64>> = features.iter().map(|f| f.0.to_vec()).collect();
    select_farthest(&raw, annotated)
}

/// Uniform over the unannotated frames.
pub fn select_random<R: Rng + ?Sized>(rng: &mut R, n: usize, annotated: &[usize]) -> Result<usize> {
    let free: Vec<usize> = candidates(n, annotated)?.iter().enumerate().filter(|(_, &ok)| ok).map(|(i, _)| i).collect();
    Ok(free[rng.random_range(0..free.len())])
}

/// Unannotated frame with the lowest `quality`; ties to the smaller index.
pub(crate) fn worst_quality(quality: &[f64], annotated: &[usize]) -> Result<usize> {
    let free = candidates(quality.len(), annotated)?;
    let mut best: Option<usize> = None;
    for (i, &q) in quality.iter().enumerate() {
        if free[i] && best.is_none_or(|b| q < quality[b]) {
            best = Some(i);
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Unannotated frame with the worst J&F of its prediction.
pub fn select_worst_oracle(preds: &[Mask], gt: &[Mask], annotated: &[usize], tol: f64) -> Result<usize> {
    if preds.len() != gt.len() {
        return Err(Error::Shape(format!("{} predictions for {} ground-truth frames", preds.len(), gt.len())));
    }
    let quality = preds.iter().zip(gt).map(|(p, g)| jf(p, g, tol)).collect::<Result<Vec<_>>>()?;
    worst_quality(&quality, annotated)
}

/// For every unannotated frame, draws a mask with `draw`, re-propagates and
/// scores the whole session; returns the frame with the best resulting mean
/// J&F. Nothing in the session is modified.
#[allow(clippy::too_many_arguments)]
pub fn select_upper_bound(
    video: &Video,
    object: usize,
    k: &AnnotatedSet,
    preds: &[Mask],
    params: &PropagationParams,
    propagation_seed: u64,
    tol: f64,
    mut draw: impl FnMut(usize) -> Result<Mask>,
) -> Result<usize> {
    let n = video.n_frames();
    if preds.len() != n {
        return Err(Error::Shape(format!("{} predictions for {} frames", preds.len(), n)));
    }
    let free = candidates(n, k.sorted_frames())?;
    let gt = &video.gt[object];
    let base = preds.iter().zip(gt).map(|(p, g)| jf(p, g, tol)).collect::<Result<Vec<_>>>()?;
    let total: f64 = base.iter().sum();
    let mut best: Option<(usize, f64)> = None;
    for c in (0..n).filter(|&c| free[c]) {
        let drawn = draw(c)?;
        let (range, new) = propagate_with_candidate(video, object, k, c, &drawn, params, propagation_seed)?;
        let mut score = total;
        for (i, m) in range.zip(&new) {
            score += jf(m, &gt[i], tol)? - base[i];
        }
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((c, score));
        }
    }
    Ok(best.expect("at least one candidate").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotator::{draw_mask, AnnotatorModel};
    use crate::metrics::session_jf;
    use crate::propagation::{propagate, Provenance};
    use crate::rng::stream;
    use crate::synthworld::{generate_video, WorldConfig};
    use proptest::prelude::*;

    fn brute_force(emb: &[Vec<f64>], k: &[usize]) -> usize {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..emb.len() {
            if k.contains(&i) {
                continue;
            }
            let mut d = f64::INFINITY;
            for &j in k {
                let mut s = 0.0;
                for t in 0..emb[i].len() {
                    s += (emb[i][t] - emb[j][t]).powi(2);
                }
                d = d.min(s.sqrt());
            }
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    #[test]
    fn farthest_examples() {
        let e = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert_eq!(select_farthest(&e, &[0]).unwrap(), 2);
        let e = vec![vec![0.0], vec![2.0], vec![2.0]];
        assert_eq!(select_farthest(&e, &[0]).unwrap(), 1);
        assert!(matches!(select_farthest(&e, &[0, 1, 2]), Err(Error::Exhausted)));
        assert!(matches!(select_farthest(&e, &[]), Err(Error::State(_))));
    }

    #[test]
    fn worst_oracle_example() {
        assert_eq!(worst_quality(&[0.9, 0.2, 0.6], &[0]).unwrap(), 1);
        assert_eq!(worst_quality(&[0.1, 0.5, 0.5], &[0]).unwrap(), 1);
    }

    #[test]
    fn random_forced_choice() {
        let k: Vec<usize> = (0..10).filter(|&f| f != 3).collect();
        assert_eq!(select_random(&mut stream(0, &[]), 10, &k).unwrap(), 3);
    }

    #[test]
    fn upper_bound_equals_enumeration() {
        let cfg = WorldConfig { n_frames: 5, seed: 12, ..WorldConfig::default() };
        let v = generate_video(&cfg).unwrap();
        let model = AnnotatorModel::default();
        let params = PropagationParams::default();
        let tol = 1.0;
        let draw = |f: usize| -> Result<Mask> { Ok(draw_mask(&v.gt[0][f], &model, &mut stream(7, &[f as u64]))) };
        let mut k = AnnotatedSet::new();
        k.insert(0, draw(0).unwrap(), Provenance::Drawn).unwrap();
        let preds = propagate(&v, 0, &k, &params, 5).unwrap();
        let chosen = select_upper_bound(&v, 0, &k, &preds, &params, 5, tol, draw).unwrap();

        let mut best = (0, f64::NEG_INFINITY);
        for c in 1..5 {
            let mut kc = k.clone();
            kc.insert(c, draw(c).unwrap(), Provenance::Drawn).unwrap();
            let s = session_jf(&propagate(&v, 0, &kc, &params, 5).unwrap(), &v.gt[0], tol).unwrap();
            if s > best.1 + 1e-12 {
                best = (c, s);
            }
        }
        assert_eq!(chosen, best.0);
        // the session itself is untouched
        assert_eq!(k.len(), 1);
    }

    #[test]
    fn selector_names_round_trip() {
        for f in FrameSelector::ALL {
            assert_eq!(f.to_string().parse::<FrameSelector>().unwrap(), f);
        }
        assert!("best".parse::<FrameSelector>().is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (2usize..=50, 1usize..=8).prop_flat_map(|(n, dim)| {
            let emb = proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, dim), n);
            let k = proptest::collection::btree_set(0..n, 1..=10.min(n - 1));
            (emb, k.prop_map(|s| s.into_iter().collect::<Vec<_>>()))
        })
    }

    proptest! {
        #[test]
        fn farthest_matches_double_loop((emb, k) in instance()) {
            let f = select_farthest(&emb, &k).unwrap();
            prop_assert!(!k.contains(&f));
            prop_assert_eq!(f, brute_force(&emb, &k));
        }

        #[test]
        fn farthest_ignores_uniform_scaling((emb, k) in instance(), s in 0.5f64..4.0) {
            // powers of two keep the arithmetic exact
            let s = 2f64.powi(s as i32);
            let scaled: Vec<Vec<f64>> = emb.iter().map(|e| e.iter().map(|x| x * s).collect()).collect();
            prop_assert_eq!(select_farthest(&emb, &k).unwrap(), select_farthest(&scaled, &k).unwrap());
        }

        #[test]
        fn random_never_reselects(n in 2usize..40, seed in 0u64..1000) {
            let k: Vec<usize> = (0..n).step_by(2).collect();
            if k.len() < n {
                let f = select_random(&mut stream(seed, &[]), n, &k).unwrap();
                prop_assert!(!k.contains(&f) && f < n);
            }
        }
    }
}
