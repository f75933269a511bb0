use crate::error::{Error, Result};
use crate::metrics::Curve;

/// First time the curve reaches `threshold`, linearly interpolated between
/// the bracketing points. `None` if it never does.
pub fn time_to_threshold(curve: &Curve, threshold: f64) -> Result<Option<f64>> {
    let pts = curve.points();
    if pts.is_empty() {
        return Err(Error::Domain("empty curve".into()));
    }
    let Some(i) = pts.iter().position(|&(_, v)| v >= threshold) else {
        return Ok(None);
    };
    if i == 0 {
        return Ok(Some(pts[0].0));
    }
    let ((t0, v0), (t1, v1)) = (pts[i - 1], pts[i]);
    Ok(Some(t0 + (threshold - v0) / (v1 - v0) * (t1 - t0)))
}

pub fn hours_to_threshold(curve: &Curve, thresholds: &[f64]) -> Result<Vec<Option<f64>>> {
    thresholds.iter().map(|&t| time_to_threshold(curve, t)).collect()
}

/// Time-weighted mean of the step curve over `[0, cap]`. The value is 0
/// before the first point and the last value holds until `cap`.
pub fn avg_jf_up_to(curve: &Curve, cap: f64) -> Result<f64> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::Domain(format!("cap must be positive, got {cap}")));
    }
    let pts = curve.points();
    let mut area = 0.0;
    for (i, &(t, v)) in pts.iter().enumerate() {
        if t >= cap {
            break;
        }
        let end = pts.get(i + 1).map_or(cap, |p| p.0.min(cap));
        area += v * (end - t);
    }
    Ok(area / cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(p: &[(f64, f64)]) -> Curve {
        Curve::from_points(p.to_vec()).unwrap()
    }

    #[test]
    fn interpolates_between_points() {
        let curve = c(&[(0.0, 0.5), (100.0, 0.9)]);
        assert_eq!(time_to_threshold(&curve, 0.75).unwrap(), Some(62.5));
        assert_eq!(time_to_threshold(&curve, 0.95).unwrap(), None);
        assert_eq!(time_to_threshold(&curve, 0.9).unwrap(), Some(100.0));
        assert_eq!(time_to_threshold(&curve, 0.5).unwrap(), Some(0.0));
        assert_eq!(hours_to_threshold(&curve, &[0.75, 0.95]).unwrap(), vec![Some(62.5), None]);
    }

    #[test]
    fn first_crossing_wins() {
        let curve = c(&[(0.0, 0.2), (10.0, 0.8), (20.0, 0.4), (30.0, 0.9)]);
        assert!((time_to_threshold(&curve, 0.5).unwrap().unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_curve_is_an_error() {
        assert!(time_to_threshold(&Curve::new(), 0.5).is_err());
    }

    #[test]
    fn step_average() {
        assert_eq!(avg_jf_up_to(&c(&[(0.0, 0.7)]), 40.0).unwrap(), 0.7);
        assert_eq!(avg_jf_up_to(&c(&[(0.0, 0.0), (50.0, 1.0)]), 100.0).unwrap(), 0.5);
        assert_eq!(avg_jf_up_to(&c(&[(50.0, 1.0)]), 20.0).unwrap(), 0.0);
        assert_eq!(avg_jf_up_to(&c(&[(50.0, 1.0)]), 100.0).unwrap(), 0.5);
        assert!(avg_jf_up_to(&c(&[(0.0, 1.0)]), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn average_lies_within_the_values(vals in prop::collection::vec(0.0f64..1.0, 1..12), cap in 1.0f64..200.0) {
            let curve = c(&vals.iter().enumerate().map(|(i, &v)| (i as f64 * 10.0, v)).collect::<Vec<_>>());
            let avg = avg_jf_up_to(&curve, cap).unwrap();
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            prop_assert!((0.0..=hi + 1e-12).contains(&avg));
        }
    }
}
