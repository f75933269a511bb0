//! Region similarity (J), boundary accuracy (F), their mean and quality bins.

use crate::error::{Error, Result};
use crate::mask::Mask;

/// Boundary tolerance for a `width × height` image: 0.8% of the diagonal,
/// rounded, and at least one pixel.
pub fn default_tolerance(width: usize, height: usize) -> f64 {
    let diag = ((width * width + height * height) as f64).sqrt();
    (0.008 * diag).round().max(1.0)
}

/// Intersection over union; 1.0 when both masks are empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    a.check_shape(b)?;
    let union = a.union_area(b);
    if union == 0 {
        return Ok(1.0);
    }
    Ok(a.intersection_area(b) as f64 / union as f64)
}

/// Boundary F-measure with distance tolerance `tol` (pixels, Euclidean).
///
/// Boundary pixels are mask pixels with a 4-neighbour outside the mask.
/// Precision is the share of `a`'s boundary within `tol` of `b`'s boundary,
/// recall the converse.
pub fn boundary_f(a: &Mask, b: &Mask, tol: f64) -> Result<f64> {
    a.check_shape(b)?;
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("boundary tolerance must be non-negative, got {tol}")));
    }
    let ba = a.boundary();
    let bb = b.boundary();
    let (na, nb) = (ba.area(), bb.area());
    match (na, nb) {
        (0, 0) => return Ok(1.0),
        (0, _) | (_, 0) => return Ok(0.0),
        _ => {}
    }
    let precision = ba.intersection_area(&bb.dilate_disc(tol)) as f64 / na as f64;
    let recall = bb.intersection_area(&ba.dilate_disc(tol)) as f64 / nb as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean of [`iou`] and [`boundary_f`].
pub fn jf(a: &Mask, b: &Mask, tol: f64) -> Result<f64> {
    Ok(0.5 * (iou(a, b)? + boundary_f(a, b, tol)?))
}

/// Mean per-frame J&F of a predicted track against ground truth.
///
/// Frames where both masks are empty score 1; frames where only one is
/// empty score 0.
pub fn session_jf(pred: &[Mask], gt: &[Mask], tol: f64) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("{} predicted frames vs {} ground-truth frames", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty session".into()));
    }
    let total = pred.iter().zip(gt).map(|(p, g)| jf(p, g, tol)).sum::<Result<f64>>()?;
    Ok(total / pred.len() as f64)
}

/// A quality class in `0..bins`; 0 is the worst quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualityBin {
    pub bin: usize,
    pub bins: usize,
}

/// `floor(q · bins)` clamped to `bins − 1`.
pub fn quality_to_bin(q: f64, bins: usize) -> Result<QualityBin> {
    if bins < 2 {
        return Err(Error::Domain(format!("need at least 2 quality bins, got {bins}")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quality {q} outside [0, 1]")));
    }
    let bin = ((q * bins as f64).floor() as usize).min(bins - 1);
    Ok(QualityBin { bin, bins })
}

/// Quality as a function of annotation time: `(elapsed_seconds, mean_jf)`
/// points with strictly increasing time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curve {
    points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        let mut c = Curve::new();
        for (t, v) in points {
            c.push(t, v)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, elapsed: f64, value: f64) -> Result<()> {
        if !(elapsed >= 0.0 && elapsed.is_finite()) {
            return Err(Error::Domain(format!("curve time must be finite and non-negative, got {elapsed}")));
        }
        if let Some(&(last, _)) = self.points.last() {
            if elapsed <= last {
                return Err(Error::Domain(format!("curve time {elapsed} does not increase past {last}")));
            }
        }
        self.points.push((elapsed, value));
        Ok(())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<(f64, f64)> {
        self.points.first().copied()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.points.last().copied()
    }

    /// Value of the step function at time `t` (0 before the first point).
    pub fn value_at(&self, t: f64) -> f64 {
        match self.points.partition_point(|&(x, _)| x <= t) {
            0 => 0.0,
            i => self.points[i - 1].1,
        }
    }

    /// Pointwise mean of the step functions of several curves, evaluated at
    /// the union of their time points.
    pub fn mean_of(curves: &[Curve]) -> Curve {
        let mut times: Vec<f64> = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let n = curves.len().max(1) as f64;
        Curve {
            points: times
                .into_iter()
                .map(|t| (t, curves.iter().map(|c| c.value_at(t)).sum::<f64>() / n))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// All-pairs reference for boundary F.
    fn brute_boundary_f(a: &Mask, b: &Mask, tol: f64) -> f64 {
        let bd = |m: &Mask| -> Vec<(isize, isize)> {
            let mut v = Vec::new();
            for y in 0..m.height() as isize {
                for x in 0..m.width() as isize {
                    if m.get_signed(x, y)
                        && !(m.get_signed(x - 1, y) && m.get_signed(x + 1, y) && m.get_signed(x, y - 1) && m.get_signed(x, y + 1))
                    {
                        v.push((x, y));
                    }
                }
            }
            v
        };
        let (pa, pb) = (bd(a), bd(b));
        if pa.is_empty() && pb.is_empty() {
            return 1.0;
        }
        if pa.is_empty() || pb.is_empty() {
            return 0.0;
        }
        let hit = |from: &[(isize, isize)], to: &[(isize, isize)]| {
            from.iter()
                .filter(|&&(x, y)| to.iter().any(|&(u, v)| (((x - u).pow(2) + (y - v).pow(2)) as f64).sqrt() <= tol))
                .count() as f64
                / from.len() as f64
        };
        let (p, r) = (hit(&pa, &pb), hit(&pb, &pa));
        if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) }
    }

    #[test]
    fn iou_examples() {
        let a = Mask::rect(8, 8, 1, 1, 3, 3);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let b = Mask::rect(8, 8, 5, 5, 2, 2);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        // two 2x4 rectangles sharing a 2x2 block
        let r1 = Mask::rect(8, 8, 0, 0, 4, 2);
        let r2 = Mask::rect(8, 8, 2, 0, 4, 2);
        assert!((iou(&r1, &r2).unwrap() - 4.0 / 12.0).abs() < 1e-15);
        let e = Mask::empty(8, 8);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Mask::empty(4, 4);
        let b = Mask::empty(5, 4);
        assert!(matches!(iou(&a, &b), Err(Error::Shape(_))));
        assert!(matches!(boundary_f(&a, &b, 1.0), Err(Error::Shape(_))));
        assert!(session_jf(std::slice::from_ref(&a), &[], 1.0).is_err());
    }

    #[test]
    fn boundary_f_examples() {
        let a = Mask::rect(16, 16, 4, 4, 5, 5);
        assert_eq!(boundary_f(&a, &a, 1.0).unwrap(), 1.0);
        assert_eq!(boundary_f(&a, &Mask::empty(16, 16), 1.0).unwrap(), 0.0);
        let shifted = Mask::rect(16, 16, 5, 4, 5, 5);
        assert_eq!(brute_boundary_f(&a, &shifted, 1.0), 1.0);
        assert_eq!(boundary_f(&a, &shifted, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn jf_examples() {
        let a = Mask::rect(16, 16, 4, 4, 5, 5);
        assert_eq!(jf(&a, &a, 1.0).unwrap(), 1.0);
        let far = Mask::rect(16, 16, 12, 12, 3, 3);
        let small = Mask::rect(16, 16, 0, 0, 3, 3);
        assert_eq!(jf(&small, &far, 1.0).unwrap(), 0.0);

        let r1 = Mask::rect(8, 8, 0, 0, 4, 2);
        let r2 = Mask::rect(8, 8, 2, 0, 4, 2);
        let f = brute_boundary_f(&r1, &r2, 1.0);
        // both 2x4 rectangles are all boundary; columns 0 and 5 are the only
        // pixels farther than 1 from the other rectangle
        assert!((f - 0.75).abs() < 1e-15);
        let expect = (1.0 / 3.0 + f) / 2.0;
        assert!((jf(&r1, &r2, 1.0).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn session_jf_examples() {
        let g = Mask::rect(8, 8, 2, 2, 3, 3);
        let e = Mask::empty(8, 8);
        assert_eq!(session_jf(&[g.clone(), g.clone()], &[g.clone(), g.clone()], 1.0).unwrap(), 1.0);
        let far = Mask::rect(8, 8, 6, 6, 2, 2);
        let small = Mask::rect(8, 8, 0, 0, 2, 2);
        assert_eq!(session_jf(&[g.clone(), small], &[g.clone(), far], 1.0).unwrap(), 0.5);
        // absent object predicted absent scores 1, predicted present scores 0
        assert_eq!(session_jf(std::slice::from_ref(&e), std::slice::from_ref(&e), 1.0).unwrap(), 1.0);
        assert_eq!(session_jf(std::slice::from_ref(&g), std::slice::from_ref(&e), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn bins() {
        assert_eq!(quality_to_bin(0.0, 5).unwrap().bin, 0);
        assert_eq!(quality_to_bin(1.0, 5).unwrap().bin, 4);
        assert_eq!(quality_to_bin(0.55, 5).unwrap().bin, 2);
        assert!(quality_to_bin(1.01, 5).is_err());
        assert!(quality_to_bin(-0.1, 5).is_err());
        assert!(quality_to_bin(0.5, 1).is_err());
    }

    #[test]
    fn tolerance_for_default_world() {
        assert_eq!(default_tolerance(64, 64), 1.0);
        assert_eq!(default_tolerance(854, 480), 8.0);
    }

    #[test]
    fn curve_rejects_non_increasing_time() {
        let mut c = Curve::new();
        c.push(1.0, 0.5).unwrap();
        assert!(c.push(1.0, 0.6).is_err());
        assert_eq!(c.value_at(0.5), 0.0);
        assert_eq!(c.value_at(3.0), 0.5);
    }

    fn arb_pair(max: usize) -> impl Strategy<Value = (Mask, Mask)> {
        (1..=max, 1..=max).prop_flat_map(|(w, h)| {
            (
                proptest::collection::vec(any::<bool>(), w * h),
                proptest::collection::vec(any::<bool>(), w * h),
            )
                .prop_map(move |(a, b)| (Mask::from_bools(w, h, &a).unwrap(), Mask::from_bools(w, h, &b).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded((a, b) in arb_pair(9), tol in 0.0f64..3.0) {
            let j = iou(&a, &b).unwrap();
            let f = boundary_f(&a, &b, tol).unwrap();
            prop_assert_eq!(j, iou(&b, &a).unwrap());
            prop_assert_eq!(f, boundary_f(&b, &a, tol).unwrap());
            prop_assert!((0.0..=1.0).contains(&j) && (0.0..=1.0).contains(&f));
        }

        #[test]
        fn boundary_f_matches_brute_force((a, b) in arb_pair(9), tol in 0.0f64..3.0) {
            let fast = boundary_f(&a, &b, tol).unwrap();
            prop_assert!((fast - brute_boundary_f(&a, &b, tol)).abs() <= 1e-12);
        }

        #[test]
        fn binning_is_monotone(q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0, bins in 2usize..12) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            prop_assert!(quality_to_bin(lo, bins).unwrap() <= quality_to_bin(hi, bins).unwrap());
        }
    }
}
