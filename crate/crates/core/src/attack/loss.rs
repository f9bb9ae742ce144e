//! Attack losses over the target box set and the texture-norm penalty.

use serde::{Deserialize, Serialize};

use crate::detector::{select_target_boxes, DetectorOutput, HeadWeight, TargetSpec, Task};
use crate::image::Image;
use crate::mask::TextureLayer;

/// How the attack loss combines the detections in B*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// IoU-weighted sum over every box in B*.
    Soft,
    /// Only the box with the highest target-category confidence.
    MaxConfidence,
    /// Unweighted mean over B*.
    Equal,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "soft" => Ok(Strategy::Soft),
            "a1" | "max_confidence" => Ok(Strategy::MaxConfidence),
            "ae" | "equal" => Ok(Strategy::Equal),
            other => Err(format!("unknown strategy `{other}` (expected soft, a1 or ae)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Soft => "soft",
            Strategy::MaxConfidence => "a1",
            Strategy::Equal => "ae",
        })
    }
}

/// Attack loss value and the head weights that reproduce it in a backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackLoss {
    pub value: f64,
    pub weights: Vec<HeadWeight>,
    /// Raw-detection indices of B*.
    pub target_boxes: Vec<usize>,
}

/// Attack loss with the default rightward shift for localization.
pub fn attack_loss(out: &DetectorOutput, spec: &TargetSpec, strategy: Strategy) -> AttackLoss {
    attack_loss_directed(out, spec, strategy, 1.0)
}

/// Attack loss; `shift_direction` is +1 to push boxes right, -1 to push left.
///
/// The per-box term is the target-category score for classification and
/// `-shift_direction · R_x` for localization.
pub fn attack_loss_directed(
    out: &DetectorOutput,
    spec: &TargetSpec,
    strategy: Strategy,
    shift_direction: f64,
) -> AttackLoss {
    let selected = select_target_boxes(out, spec);
    let target_boxes: Vec<usize> = selected.iter().map(|&(i, _)| i).collect();
    let coefficients: Vec<(usize, f64)> = match strategy {
        Strategy::Soft => selected,
        Strategy::Equal => {
            let n = selected.len() as f64;
            selected.into_iter().map(|(i, _)| (i, 1.0 / n)).collect()
        }
        Strategy::MaxConfidence => {
            let mut best: Option<usize> = None;
            for &(i, _) in &selected {
                let s = out.raw[i].score(spec.target_category);
                if best.map_or(true, |b| s > out.raw[b].score(spec.target_category)) {
                    best = Some(i);
                }
            }
            best.map(|i| vec![(i, 1.0)]).unwrap_or_default()
        }
    };

    let weights: Vec<HeadWeight> = coefficients
        .into_iter()
        .map(|(i, c)| match spec.task {
            Task::Classification => HeadWeight {
                detection: i,
                category: spec.target_category,
                score: c,
                offset: 0.0,
            },
            Task::Localization => HeadWeight {
                detection: i,
                category: spec.target_category,
                score: 0.0,
                offset: -shift_direction * c,
            },
        })
        .collect();
    AttackLoss {
        value: weighted_heads(out, &weights),
        weights,
        target_boxes,
    }
}

/// `Σ score·C + offset·R_x` for fixed head weights.
pub fn weighted_heads(out: &DetectorOutput, weights: &[HeadWeight]) -> f64 {
    weights
        .iter()
        .map(|w| {
            let d = &out.raw[w.detection];
            w.score * d.score(w.category) + w.offset * d.offset_x
        })
        .sum()
}

/// Euclidean norm of every texture entry.
pub fn texture_loss(t: &TextureLayer) -> f64 {
    t.norm()
}

/// `t / ‖t‖`, or zero at the origin.
pub fn texture_loss_grad(t: &TextureLayer) -> Image {
    let n = t.norm();
    let (w, h) = t.dims();
    let mut g = Image::zeros(w, h);
    if n > 0.0 {
        for (o, &v) in g.data_mut().iter_mut().zip(t.data()) {
            *o = v / n;
        }
    }
    g
}
