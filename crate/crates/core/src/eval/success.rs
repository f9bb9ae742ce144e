use serde::{Deserialize, Serialize};

use crate::bbox::iou;
use crate::detector::{DetectorOutput, TargetSpec, Task};

/// Localization attacks succeed when the best correct-category IoU falls
/// below this.
pub const LOCALIZATION_IOU_CUTOFF: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriterion {
    pub task: Task,
    pub iou_cutoff: f64,
}

impl SuccessCriterion {
    pub fn for_task(task: Task) -> Self {
        Self {
            task,
            iou_cutoff: LOCALIZATION_IOU_CUTOFF,
        }
    }
}

/// Highest IoU with the target box among kept detections of the target
/// category; 0 when there are none.
pub fn max_correct_iou(out: &DetectorOutput, spec: &TargetSpec) -> f64 {
    out.kept_detections()
        .filter(|d| d.best_category() == spec.target_category)
        .map(|d| iou(&d.bbox, &spec.target_box))
        .fold(0.0, f64::max)
}

/// Judges the post-NMS output of an attacked image.
///
/// Classification succeeds when no kept detection of the target category
/// overlaps the target box at all; localization when the best such overlap
/// is below the cutoff.
pub fn is_success(out: &DetectorOutput, spec: &TargetSpec, crit: &SuccessCriterion) -> bool {
    let best = max_correct_iou(out, spec);
    match crit.task {
        Task::Classification => best <= 0.0,
        Task::Localization => best < crit.iou_cutoff,
    }
}
