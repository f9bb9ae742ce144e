//! The detector contract the attack optimizes against.
//!
//! A detector enumerates a fixed set of raw detections (one per anchor), each
//! with per-category scores and an x regression offset, then filters by
//! confidence and applies NMS. It must expose the exact gradient of any
//! weighted sum of scores and offsets with respect to the input pixels.

mod scene;
mod toy;

pub use scene::{generate_scene, GroundTruth, ObjectShape, Scene, SceneSpec, MAX_SCENE_ATTEMPTS};
pub use toy::{CategoryTemplate, ToyDetector, ToyDetectorConfig};

use serde::{Deserialize, Serialize};

use crate::bbox::{iou, BBox, Scored};
use crate::error::Result;
use crate::image::Image;

/// Minimum score for a detection to be reported (and to enter B*).
pub const CONFIDENCE_THRESHOLD: f64 = 0.3;

/// Minimum IoU with the target box for a raw detection to enter B*.
pub const TARGET_IOU_GATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub category_scores: Vec<f64>,
    /// Horizontal regression offset in anchor widths, positive = rightward.
    pub offset_x: f64,
}

impl Detection {
    pub fn score(&self, category: usize) -> f64 {
        self.category_scores.get(category).copied().unwrap_or(0.0)
    }

    /// Highest-scoring category; ties go to the lower id.
    pub fn best_category(&self) -> usize {
        let mut best = 0;
        for (c, &s) in self.category_scores.iter().enumerate() {
            if s > self.category_scores[best] {
                best = c;
            }
        }
        best
    }

    pub fn max_score(&self) -> f64 {
        self.category_scores.iter().copied().fold(0.0, f64::max)
    }
}

impl Scored for Detection {
    fn bbox(&self) -> BBox {
        self.bbox
    }

    fn confidence(&self) -> f64 {
        self.max_score()
    }

    fn category(&self) -> usize {
        self.best_category()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    /// Every anchor's detection, before thresholding and NMS.
    pub raw: Vec<Detection>,
    /// Indices into `raw` surviving the confidence threshold and NMS, in
    /// descending confidence order.
    pub kept: Vec<usize>,
}

impl DetectorOutput {
    pub fn kept_detections(&self) -> impl Iterator<Item = &Detection> {
        self.kept.iter().map(|&i| &self.raw[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    Classification,
    Localization,
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cls" | "classification" => Ok(Task::Classification),
            "loc" | "localization" => Ok(Task::Localization),
            other => Err(format!("unknown task `{other}` (expected cls or loc)")),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Classification => "cls",
            Task::Localization => "loc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub target_box: BBox,
    pub target_category: usize,
    pub task: Task,
}

/// Weights applied to one raw detection's heads in a backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadWeight {
    pub detection: usize,
    /// Category whose score head receives `score`.
    pub category: usize,
    pub score: f64,
    pub offset: f64,
}

/// A differentiable detector.
pub trait Detector {
    /// `(width, height)` the detector accepts.
    fn input_dims(&self) -> (usize, usize);

    fn num_categories(&self) -> usize;

    fn forward(&self, img: &Image) -> Result<DetectorOutput>;

    /// Gradient of `Σ_i (score_i · C_{category_i}(d_i) + offset_i · R_x(d_i))`
    /// with respect to every pixel and channel of `img`.
    fn backward(&self, img: &Image, weights: &[HeadWeight]) -> Result<Image>;
}

/// The set B*: raw detections that count as detections of the target, each
/// paired with its IoU against the target box.
///
/// Weights are plain numbers; no gradient flows through them.
pub fn select_target_boxes(out: &DetectorOutput, spec: &TargetSpec) -> Vec<(usize, f64)> {
    out.raw
        .iter()
        .enumerate()
        .filter_map(|(i, d)| {
            if d.score(spec.target_category) < CONFIDENCE_THRESHOLD {
                return None;
            }
            let w = iou(&d.bbox, &spec.target_box);
            (w >= TARGET_IOU_GATE).then_some((i, w))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(b: BBox, scores: &[f64]) -> Detection {
        Detection {
            bbox: b,
            category_scores: scores.to_vec(),
            offset_x: 0.0,
        }
    }

    fn output(raw: Vec<Detection>) -> DetectorOutput {
        DetectorOutput { raw, kept: vec![] }
    }

    #[test]
    fn target_box_selection() {
        let bt = BBox::new(10.0, 10.0, 30.0, 30.0);
        let spec = TargetSpec {
            target_box: bt,
            target_category: 1,
            task: Task::Classification,
        };
        let shifted = bt.translated(6.0, 0.0); // IoU 14/26
        let far = bt.translated(9.0, 0.0); // IoU 11/29 < 0.5
        let out = output(vec![
            det(bt, &[0.1, 0.9]),
            det(bt, &[0.9, 0.2]),
            det(far, &[0.0, 0.95]),
            det(shifted, &[0.0, 0.3]),
        ]);
        let sel = select_target_boxes(&out, &spec);
        assert_eq!(sel.len(), 2);
        assert_eq!(sel[0], (0, 1.0));
        assert_eq!(sel[1].0, 3);
        assert!((sel[1].1 - 14.0 / 26.0).abs() < 1e-12);
    }

    #[test]
    fn best_category_ties_to_lower_id() {
        let d = det(BBox::new(0.0, 0.0, 1.0, 1.0), &[0.2, 0.7, 0.7]);
        assert_eq!(d.best_category(), 1);
        assert_eq!(d.max_score(), 0.7);
    }

    #[test]
    fn task_parsing() {
        assert_eq!("cls".parse::<Task>().unwrap(), Task::Classification);
        assert_eq!("localization".parse::<Task>().unwrap(), Task::Localization);
        assert!("x".parse::<Task>().is_err());
        assert_eq!(Task::Localization.to_string(), "loc");
    }
}
