//! Simulated annotator and annotation-to-mask model.
//!
//! Mask drawing returns the ground truth with calibrated boundary noise, so
//! drawn masks agree with the truth at the configured human-agreement level.
//! Clicks follow the corrective protocol: the click lands deep inside the
//! largest error region, a bounded area around it is fixed, and the
//! re-predicted boundary carries noise calibrated to the annotation-to-mask
//! ceiling.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::Mask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnnotationType {
    /// `k` corrective clicks applied one after another.
    ClickBatch(usize),
    MaskDraw,
    /// Bounding box re-anchoring the current mask.
    Box,
}

impl AnnotationType {
    pub fn validate(&self) -> Result<()> {
        match self {
            AnnotationType::ClickBatch(0) => Err(Error::Config("click batch needs at least one click".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AnnotationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotationType::ClickBatch(k) => write!(f, "clicks{k}"),
            AnnotationType::MaskDraw => write!(f, "mask"),
            AnnotationType::Box => write!(f, "box"),
        }
    }
}

impl std::str::FromStr for AnnotationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mask" => Ok(AnnotationType::MaskDraw),
            "box" => Ok(AnnotationType::Box),
            _ => {
                let k = s
                    .strip_prefix("clicks")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown annotation type `{s}`")))?;
                let a = AnnotationType::ClickBatch(k);
                a.validate()?;
                Ok(a)
            }
        }
    }
}

/// The default action pool: one click, three clicks, or a drawn mask.
pub fn default_action_pool() -> Vec<AnnotationType> {
    vec![AnnotationType::ClickBatch(1), AnnotationType::ClickBatch(3), AnnotationType::MaskDraw]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Click {
    pub x: usize,
    pub y: usize,
    pub polarity: Polarity,
}

/// Seconds billed per annotation type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub seconds_per_click: f64,
    pub seconds_per_mask_draw: f64,
    pub seconds_per_box: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { seconds_per_click: 1.5, seconds_per_mask_draw: 79.0, seconds_per_box: 7.0 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("seconds_per_click", self.seconds_per_click),
            ("seconds_per_mask_draw", self.seconds_per_mask_draw),
            ("seconds_per_box", self.seconds_per_box),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn cost(&self, a: AnnotationType) -> f64 {
        match a {
            AnnotationType::ClickBatch(k) => k as f64 * self.seconds_per_click,
            AnnotationType::MaskDraw => self.seconds_per_mask_draw,
            AnnotationType::Box => self.seconds_per_box,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnotatorModel {
    /// Expected J&F of a drawn mask against the ground truth.
    pub human_agreement_jf: f64,
    /// Expected J&F the annotation-to-mask model can reach at best.
    pub a2m_ceiling_jf: f64,
    /// Maximum number of pixels one click corrects.
    pub click_area_cap: usize,
    /// Scale of the re-prediction boundary noise; 1 matches the ceiling,
    /// 0 disables it.
    pub residual_noise: f64,
}

impl Default for AnnotatorModel {
    fn default() -> Self {
        AnnotatorModel { human_agreement_jf: 0.92, a2m_ceiling_jf: 0.88, click_area_cap: 150, residual_noise: 1.0 }
    }
}

impl AnnotatorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.human_agreement_jf > 0.0 && self.human_agreement_jf <= 1.0) {
            return Err(Error::Config(format!("human_agreement_jf must lie in (0, 1], got {}", self.human_agreement_jf)));
        }
        if !(self.a2m_ceiling_jf > 0.0 && self.a2m_ceiling_jf < 1.0) {
            return Err(Error::Config(format!("a2m_ceiling_jf must lie in (0, 1), got {}", self.a2m_ceiling_jf)));
        }
        if self.a2m_ceiling_jf >= self.human_agreement_jf {
            return Err(Error::Config("a2m_ceiling_jf must be below human_agreement_jf".into()));
        }
        if self.click_area_cap == 0 {
            return Err(Error::Config("click_area_cap must be positive".into()));
        }
        if !(self.residual_noise >= 0.0 && self.residual_noise <= 1.0) {
            return Err(Error::Config(format!("residual_noise must lie in [0, 1], got {}", self.residual_noise)));
        }
        Ok(())
    }
}

/// Per-pixel flip probability on the boundary band of `gt` that yields an
/// expected J&F of about `target`.
///
/// Flips confined to the inner and outer boundary rings stay within one
/// pixel of the true boundary, so the boundary measure stays near 1 and
/// J&F ≈ (1 + J)/2. With inner ring `I`, outer ring `O` and area `A`, flipping
/// each ring pixel with probability `r` gives E[J] ≈ (A − r|I|) / (A + r|O|).
pub fn band_noise_rate(gt: &Mask, target: f64) -> f64 {
    if target >= 1.0 || gt.is_empty() {
        return 0.0;
    }
    let j = 2.0 * target - 1.0;
    if j <= 0.0 {
        return 1.0;
    }
    let area = gt.area() as f64;
    let inner = gt.boundary().area() as f64;
    let outer = gt.outer_ring().area() as f64;
    (area * (1.0 - j) / (j * outer + inner)).clamp(0.0, 1.0)
}

/// Draws a mask for `gt` at the human-agreement quality.
pub fn draw_mask<R: Rng + ?Sized>(gt: &Mask, model: &AnnotatorModel, rng: &mut R) -> Mask {
    let rate = band_noise_rate(gt, model.human_agreement_jf);
    let mut out = gt.clone();
    if rate == 0.0 {
        return out;
    }
    for p in gt.boundary().ones() {
        if rng.random_bool(rate) {
            out.set_index(p, false);
        }
    }
    for p in gt.outer_ring().ones() {
        if rng.random_bool(rate) {
            out.set_index(p, true);
        }
    }
    out
}

/// Places the next corrective click, or `None` when `pred` equals `gt`.
///
/// The click goes to the pixel of the largest 4-connected error component
/// farthest from that component's border (ties: smallest row-major index).
/// It is positive on missed object pixels and negative on false positives.
pub fn simulate_click(gt: &Mask, pred: &Mask) -> Result<Option<Click>> {
    gt.check_shape(pred)?;
    let err = gt.xor(pred);
    let comps = err.components4();
    let Some(largest) = comps.iter().fold(None::<&Vec<usize>>, |best, c| match best {
        Some(b) if b.len() >= c.len() => Some(b),
        _ => Some(c),
    }) else {
        return Ok(None);
    };
    let mut comp_mask = Mask::empty(gt.width(), gt.height());
    for &p in largest {
        comp_mask.set_index(p, true);
    }
    let dist = comp_mask.distance_to_background_sq();
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for p in comp_mask.ones() {
        if dist[p] > best.0 {
            best = (dist[p], p);
        }
    }
    let p = best.1;
    let (x, y) = (p % gt.width(), p / gt.width());
    let polarity = if gt.get(x, y) { Polarity::Positive } else { Polarity::Negative };
    Ok(Some(Click { x, y, polarity }))
}

fn component_at(err: &Mask, start: usize) -> Vec<usize> {
    let w = err.width();
    let h = err.height();
    let mut seen = vec![false; err.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut comp = Vec::new();
    while let Some(p) = stack.pop() {
        comp.push(p);
        let (x, y) = (p % w, p / w);
        let mut nbrs = [None; 4];
        if x > 0 {
            nbrs[0] = Some(p - 1);
        }
        if x + 1 < w {
            nbrs[1] = Some(p + 1);
        }
        if y > 0 {
            nbrs[2] = Some(p - w);
        }
        if y + 1 < h {
            nbrs[3] = Some(p + w);
        }
        for q in nbrs.into_iter().flatten() {
            if !seen[q] && err.get_index(q) {
                seen[q] = true;
                stack.push(q);
            }
        }
    }
    comp
}

/// Re-predicts the boundary band of `gt` near already-correct object pixels:
/// each such band pixel takes its true value except with probability `rate`.
fn repredict_band<R: Rng + ?Sized>(pred: &mut Mask, gt: &Mask, rate: f64, rng: &mut R) {
    if gt.is_empty() {
        return;
    }
    let acquired = pred.and(gt).dilate_disc(std::f64::consts::SQRT_2);
    let band = gt.boundary().or(&gt.outer_ring()).and(&acquired);
    for p in band.ones() {
        let wrong = rate > 0.0 && rng.random_bool(rate);
        pred.set_index(p, gt.get_index(p) ^ wrong);
    }
}

/// One refinement step of the annotation-to-mask model for `click`.
///
/// Up to `click_area_cap` pixels of the error component under the click are
/// set to the truth, nearest to the click first; then the boundary band is
/// re-predicted with residual noise. A click on a correct pixel only
/// re-predicts the band.
pub fn apply_click<R: Rng + ?Sized>(pred: &Mask, gt: &Mask, click: Click, model: &AnnotatorModel, rng: &mut R) -> Result<Mask> {
    gt.check_shape(pred)?;
    if click.x >= gt.width() || click.y >= gt.height() {
        return Err(Error::Bounds { index: click.y * gt.width() + click.x, len: gt.len() });
    }
    let mut out = pred.clone();
    let err = gt.xor(pred);
    let start = click.y * gt.width() + click.x;
    if err.get_index(start) {
        let w = gt.width() as isize;
        let mut comp = component_at(&err, start);
        let key = |p: usize| {
            let (dx, dy) = ((p as isize % w) - click.x as isize, (p as isize / w) - click.y as isize);
            (dx * dx + dy * dy, p)
        };
        comp.sort_unstable_by_key(|&p| key(p));
        for &p in comp.iter().take(model.click_area_cap) {
            out.set_index(p, gt.get_index(p));
        }
    }
    let rate = model.residual_noise * band_noise_rate(gt, model.a2m_ceiling_jf);
    repredict_band(&mut out, gt, rate, rng);
    Ok(out)
}

/// Box annotation: the current mask is moved so its bounding box centre
/// matches the (tight) box around the object and clipped to that box.
fn apply_box<R: Rng + ?Sized>(pred: &Mask, gt: &Mask, model: &AnnotatorModel, rng: &mut R) -> Mask {
    let bbox = |m: &Mask| {
        let w = m.width();
        m.ones().fold(None, |acc: Option<(usize, usize, usize, usize)>, p| {
            let (x, y) = (p % w, p / w);
            Some(match acc {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            })
        })
    };
    let Some(gb) = bbox(gt) else {
        return Mask::empty(gt.width(), gt.height());
    };
    let boxed = Mask::rect(gt.width(), gt.height(), gb.0, gb.1, gb.2 - gb.0 + 1, gb.3 - gb.1 + 1);
    let mut out = match bbox(pred) {
        Some(pb) => {
            let dx = (gb.0 + gb.2) as isize / 2 - (pb.0 + pb.2) as isize / 2;
            let dy = (gb.1 + gb.3) as isize / 2 - (pb.1 + pb.3) as isize / 2;
            pred.shifted(dx, dy).and(&boxed)
        }
        None => boxed,
    };
    let rate = model.residual_noise * band_noise_rate(gt, model.a2m_ceiling_jf);
    repredict_band(&mut out, gt, rate, rng);
    out
}

/// Executes annotation `a` on a frame and returns the new mask and the
/// billed seconds. Click batches start from `current` (the frame's current
/// prediction) and stop early once it matches the truth; the whole batch is
/// billed regardless.
pub fn annotate<R: Rng + ?Sized>(
    a: AnnotationType,
    current: Option<&Mask>,
    gt: &Mask,
    model: &AnnotatorModel,
    cost: &CostModel,
    rng: &mut R,
) -> Result<(Mask, f64)> {
    a.validate()?;
    let seconds = cost.cost(a);
    let mask = match a {
        AnnotationType::MaskDraw => draw_mask(gt, model, rng),
        AnnotationType::ClickBatch(k) => {
            let mut cur = current
                .ok_or_else(|| Error::State("click refinement needs the frame's current mask".into()))?
                .clone();
            for _ in 0..k {
                match simulate_click(gt, &cur)? {
                    Some(click) => cur = apply_click(&cur, gt, click, model, rng)?,
                    None => break,
                }
            }
            cur
        }
        AnnotationType::Box => {
            let cur = current.ok_or_else(|| Error::State("box re-anchoring needs the frame's current mask".into()))?;
            apply_box(cur, gt, model, rng)
        }
    };
    Ok((mask, seconds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::jf;
    use crate::rng::stream;
    use crate::synthworld::{generate_video, WorldConfig};

    fn noiseless() -> AnnotatorModel {
        AnnotatorModel { residual_noise: 0.0, ..AnnotatorModel::default() }
    }

    #[test]
    fn click_on_missed_square_hits_centre() {
        let gt = Mask::rect(16, 16, 3, 4, 5, 5);
        let c = simulate_click(&gt, &Mask::empty(16, 16)).unwrap().unwrap();
        assert_eq!((c.x, c.y, c.polarity), (5, 6, Polarity::Positive));
    }

    #[test]
    fn click_on_extra_block_is_negative() {
        let gt = Mask::rect(16, 16, 1, 1, 4, 4);
        let pred = gt.or(&Mask::rect(16, 16, 10, 10, 3, 3));
        let c = simulate_click(&gt, &pred).unwrap().unwrap();
        assert_eq!((c.x, c.y, c.polarity), (11, 11, Polarity::Negative));
    }

    #[test]
    fn click_targets_the_larger_component() {
        // error components of 12 (3x4) and 7 (1x7) pixels
        let gt = Mask::rect(20, 20, 2, 2, 3, 4).or(&Mask::rect(20, 20, 10, 12, 7, 1));
        let comps = gt.components4();
        let mut sizes: Vec<usize> = comps.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![7, 12]);
        let c = simulate_click(&gt, &Mask::empty(20, 20)).unwrap().unwrap();
        assert!(Mask::rect(20, 20, 2, 2, 3, 4).get(c.x, c.y));
    }

    #[test]
    fn no_click_without_error() {
        let gt = Mask::rect(8, 8, 1, 1, 3, 3);
        assert_eq!(simulate_click(&gt, &gt).unwrap(), None);
    }

    #[test]
    fn uncapped_component_is_fully_fixed() {
        let gt = Mask::rect(16, 16, 2, 2, 8, 8);
        let pred = gt.and_not(&Mask::rect(16, 16, 4, 4, 3, 3));
        let click = simulate_click(&gt, &pred).unwrap().unwrap();
        let out = apply_click(&pred, &gt, click, &noiseless(), &mut stream(0, &[])).unwrap();
        assert_eq!(out, gt);
    }

    #[test]
    fn noiseless_clicks_converge_monotonically() {
        for seed in 0..10 {
            let cfg = WorldConfig { n_objects: 2, seed, ..WorldConfig::default() };
            let v = generate_video(&cfg).unwrap();
            let gt = &v.gt[0][30];
            let mut pred = v.gt[1][0].clone();
            let mut rng = stream(seed, &[1]);
            let mut last = jf(&pred, gt, 1.0).unwrap();
            let mut steps = 0;
            while let Some(c) = simulate_click(gt, &pred).unwrap() {
                pred = apply_click(&pred, gt, c, &noiseless(), &mut rng).unwrap();
                let q = jf(&pred, gt, 1.0).unwrap();
                assert!(q >= last - 1e-12, "seed {seed}: quality fell from {last} to {q}");
                last = q;
                steps += 1;
                assert!(steps < 500);
            }
            assert_eq!(&pred, gt);
        }
    }

    #[test]
    fn click_quality_stays_below_ceiling() {
        let model = AnnotatorModel::default();
        let mut total = 0.0;
        let n = 50;
        for seed in 0..n {
            let v = generate_video(&WorldConfig { seed, ..WorldConfig::default() }).unwrap();
            let gt = &v.gt[0][0];
            let mut pred = Mask::empty(64, 64);
            let mut rng = stream(seed, &[2]);
            for _ in 0..30 {
                match simulate_click(gt, &pred).unwrap() {
                    Some(c) => pred = apply_click(&pred, gt, c, &model, &mut rng).unwrap(),
                    None => break,
                }
            }
            total += jf(&pred, gt, 1.0).unwrap();
        }
        let mean = total / n as f64;
        assert!(mean <= model.a2m_ceiling_jf + 0.03, "mean {mean}");
    }

    #[test]
    fn drawing_with_perfect_agreement_is_exact() {
        let v = generate_video(&WorldConfig::default()).unwrap();
        let model = AnnotatorModel { human_agreement_jf: 1.0, ..AnnotatorModel::default() };
        let gt = &v.gt[0][0];
        assert_eq!(&draw_mask(gt, &model, &mut stream(1, &[])), gt);
        assert!(draw_mask(&Mask::empty(64, 64), &AnnotatorModel::default(), &mut stream(1, &[])).is_empty());
    }

    #[test]
    fn drawing_matches_human_agreement() {
        let model = AnnotatorModel::default();
        let v = generate_video(&WorldConfig { n_objects: 4, seed: 3, ..WorldConfig::default() }).unwrap();
        for o in 0..4 {
            let gt = &v.gt[o][0];
            let mut rng = stream(7, &[o as u64]);
            let mean = (0..100).map(|_| jf(&draw_mask(gt, &model, &mut rng), gt, 1.0).unwrap()).sum::<f64>() / 100.0;
            assert!((0.89..=0.95).contains(&mean), "object {o}: mean {mean}");
        }
    }

    #[test]
    fn annotate_examples() {
        let v = generate_video(&WorldConfig::default()).unwrap();
        let gt = &v.gt[0][10];
        let cost = CostModel::default();
        let perfect = AnnotatorModel { human_agreement_jf: 1.0, ..AnnotatorModel::default() };
        let (m, s) = annotate(AnnotationType::MaskDraw, None, gt, &perfect, &cost, &mut stream(0, &[])).unwrap();
        assert_eq!((&m, s), (gt, 79.0));

        let (m, s) =
            annotate(AnnotationType::ClickBatch(3), Some(gt), gt, &AnnotatorModel::default(), &cost, &mut stream(0, &[])).unwrap();
        assert_eq!((&m, s), (gt, 4.5));

        let pred = gt.shifted(2, 1);
        let before = jf(&pred, gt, 1.0).unwrap();
        let (m, _) = annotate(AnnotationType::ClickBatch(1), Some(&pred), gt, &noiseless(), &cost, &mut stream(0, &[])).unwrap();
        assert!(jf(&m, gt, 1.0).unwrap() > before);

        assert!(annotate(AnnotationType::ClickBatch(1), None, gt, &noiseless(), &cost, &mut stream(0, &[])).is_err());
        assert!(annotate(AnnotationType::ClickBatch(0), Some(gt), gt, &noiseless(), &cost, &mut stream(0, &[])).is_err());
    }

    #[test]
    fn box_reanchors_the_mask() {
        let v = generate_video(&WorldConfig::default()).unwrap();
        let gt = &v.gt[0][0];
        let pred = gt.shifted(6, -5);
        let (m, s) = annotate(AnnotationType::Box, Some(&pred), gt, &noiseless(), &CostModel::default(), &mut stream(0, &[])).unwrap();
        assert_eq!(s, 7.0);
        assert!(jf(&m, gt, 1.0).unwrap() > jf(&pred, gt, 1.0).unwrap());
    }

    #[test]
    fn model_validation() {
        assert!(AnnotatorModel::default().validate().is_ok());
        let inverted = AnnotatorModel { a2m_ceiling_jf: 0.95, ..AnnotatorModel::default() };
        assert!(inverted.validate().is_err());
        assert!(CostModel { seconds_per_click: 0.0, ..CostModel::default() }.validate().is_err());
        assert_eq!("clicks3".parse::<AnnotationType>().unwrap(), AnnotationType::ClickBatch(3));
        assert!("clicks0".parse::<AnnotationType>().is_err());
        assert!("scribble".parse::<AnnotationType>().is_err());
    }
}
