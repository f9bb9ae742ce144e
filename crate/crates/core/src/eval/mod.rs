//! Success criteria, aggregate metrics and the patch detector behind ADA.

mod metrics;
pub mod patch_detector;
mod success;

pub use metrics::{compute_asr, compute_mar, texture_distance, AttackOutcome, ImageRow, MetricsReport};
pub use success::{is_success, max_correct_iou, SuccessCriterion, LOCALIZATION_IOU_CUTOFF};
