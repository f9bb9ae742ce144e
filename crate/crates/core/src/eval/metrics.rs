use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// What ASR and MAR need from one attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub success: bool,
    /// Patch area in px² (analytic for primitive masks, exact for rectangles).
    pub area: f64,
    /// Target-box area in px².
    pub object_area: f64,
}

impl AttackOutcome {
    pub fn area_ratio(&self) -> f64 {
        if self.object_area > 0.0 {
            self.area / self.object_area
        } else {
            f64::INFINITY
        }
    }
}

/// Fraction of attacks that succeed with `area / object_area ≤ threshold`.
pub fn compute_asr(outcomes: &[AttackOutcome], area_threshold: f64) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("attack results"));
    }
    let hits = outcomes
        .iter()
        .filter(|o| o.success && o.area_ratio() <= area_threshold)
        .count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// Mean area ratio over successful attacks.
pub fn compute_mar(outcomes: &[AttackOutcome]) -> Result<f64> {
    let ratios: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.success)
        .map(AttackOutcome::area_ratio)
        .collect();
    if ratios.is_empty() {
        return Err(Error::NoSuccesses);
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Root-mean-square difference over every pixel and channel.
pub fn texture_distance(adv: &Image, clean: &Image) -> Result<f64> {
    clean.ensure_same_dims(adv)?;
    let n = adv.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let ss: f64 = adv
        .data()
        .iter()
        .zip(clean.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n as f64).sqrt())
}

/// One attacked image in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub method: String,
    pub seed: u64,
    pub success: bool,
    pub area: f64,
    pub object_area: f64,
    pub area_ratio: f64,
    /// Pixels with mask above one half, over object area.
    pub effective_area_ratio: f64,
    pub texture_distance: f64,
    pub steps_to_success: Option<usize>,
    /// Patch-detector probability that the image is adversarial, when scored.
    pub detector_probability: Option<f64>,
}

impl ImageRow {
    pub fn outcome(&self) -> AttackOutcome {
        AttackOutcome {
            success: self.success,
            area: self.area,
            object_area: self.object_area,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub images: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub asr: f64,
    pub area_threshold: f64,
    /// Absent when nothing succeeded.
    pub mar: Option<f64>,
    pub effective_mar: Option<f64>,
    /// Mean over all images.
    pub texture_distance: f64,
    /// Mean over successful images.
    pub texture_distance_success: Option<f64>,
    pub ada: Option<f64>,
}

impl MetricsReport {
    /// Aggregates rows that all belong to one method.
    pub fn from_rows(method: &str, rows: &[ImageRow], area_threshold: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("report rows"));
        }
        let outcomes: Vec<AttackOutcome> = rows.iter().map(ImageRow::outcome).collect();
        let successes: Vec<&ImageRow> = rows.iter().filter(|r| r.success).collect();
        let mean = |v: &mut dyn Iterator<Item = f64>| {
            let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            (n > 0).then(|| s / n as f64)
        };
        Ok(Self {
            method: method.to_string(),
            images: rows.len(),
            successes: successes.len(),
            success_rate: successes.len() as f64 / rows.len() as f64,
            asr: compute_asr(&outcomes, area_threshold)?,
            area_threshold,
            mar: compute_mar(&outcomes).ok(),
            effective_mar: mean(&mut successes.iter().map(|r| r.effective_area_ratio)),
            texture_distance: mean(&mut rows.iter().map(|r| r.texture_distance)).unwrap_or(0.0),
            texture_distance_success: mean(&mut successes.iter().map(|r| r.texture_distance)),
            ada: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn o(success: bool, area: f64, object_area: f64) -> AttackOutcome {
        AttackOutcome {
            success,
            area,
            object_area,
        }
    }

    #[test]
    fn asr_examples() {
        let fails = vec![o(false, 1.0, 100.0); 3];
        assert_eq!(compute_asr(&fails, 1.0).unwrap(), 0.0);
        let mixed = vec![
            o(true, 10.0, 100.0),
            o(true, 10.0, 100.0),
            o(true, 10.0, 100.0),
            o(false, 10.0, 100.0),
        ];
        assert_eq!(compute_asr(&mixed, 0.2).unwrap(), 0.75);
        let big = vec![o(true, 50.0, 100.0)];
        assert_eq!(compute_asr(&big, 0.2).unwrap(), 0.0);
        assert!(compute_asr(&[], 0.2).is_err());
    }

    #[test]
    fn mar_examples() {
        assert!((compute_mar(&[o(true, 200.0, 2000.0)]).unwrap() - 0.1).abs() < 1e-15);
        let with_fail = [o(true, 200.0, 2000.0), o(false, 1900.0, 2000.0)];
        assert!((compute_mar(&with_fail).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(compute_mar(&[o(false, 1.0, 1.0)]), Err(Error::NoSuccesses)));
    }

    #[test]
    fn texture_distance_examples() {
        let a = Image::filled(3, 3, [0.2, 0.3, 0.4]);
        assert_eq!(texture_distance(&a, &a).unwrap(), 0.0);
        let b = Image::filled(3, 3, [0.3, 0.4, 0.5]);
        assert!((texture_distance(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        assert!(texture_distance(&Image::zeros(2, 3), &a).is_err());
    }

    #[test]
    fn report_matches_rows() {
        let row = |success, area: f64| ImageRow {
            method: "m".into(),
            seed: 0,
            success,
            area,
            object_area: 400.0,
            area_ratio: area / 400.0,
            effective_area_ratio: area / 500.0,
            texture_distance: 0.01,
            steps_to_success: None,
            detector_probability: None,
        };
        let rows = vec![row(true, 40.0), row(true, 120.0), row(false, 10.0)];
        let r = MetricsReport::from_rows("m", &rows, 0.2).unwrap();
        assert_eq!(r.successes, 2);
        assert!((r.asr - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.mar.unwrap() - 0.2).abs() < 1e-15);
    }

    fn arb_image(n: usize) -> impl Strategy<Value = Image> {
        prop::collection::vec(0.0..1.0f64, n * 3).prop_map(move |d| Image::from_data(n, 1, d).unwrap())
    }

    proptest! {
        #[test]
        fn asr_monotone_in_threshold(
            items in prop::collection::vec((any::<bool>(), 0.0..500.0f64), 1..20),
            t1 in 0.0..2.0f64,
            t2 in 0.0..2.0f64,
        ) {
            let outs: Vec<_> = items.iter().map(|&(s, a)| o(s, a, 300.0)).collect();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(compute_asr(&outs, lo).unwrap() <= compute_asr(&outs, hi).unwrap());
        }

        #[test]
        fn texture_distance_is_a_metric(a in arb_image(6), b in arb_image(6), c in arb_image(6)) {
            let d = |x: &Image, y: &Image| texture_distance(x, y).unwrap();
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert_eq!(d(&a, &b) == 0.0, a == b);
        }

        #[test]
        fn texture_distance_grows_with_support(k in 1usize..10, mag in 0.01..0.5f64) {
            let clean = Image::filled(10, 1, [0.25, 0.25, 0.25]);
            let with = |n: usize| {
                let mut adv = clean.clone();
                for i in 0..n * 3 {
                    adv.data_mut()[i] += mag;
                }
                texture_distance(&adv, &clean).unwrap()
            };
            prop_assert!(with(k) <= with(k + 1));
        }
    }
}
