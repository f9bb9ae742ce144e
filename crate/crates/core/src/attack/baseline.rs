//! Fixed-position rectangular patches grown until the attack succeeds.
//!
//! For each size level the hard-edged rectangles are fixed at the placement's
//! anchor points and only the texture is optimized. The first level that
//! succeeds is returned.

use serde::{Deserialize, Serialize};

use super::ldap::{AttackConfig, AttackProblem, LossBreakdown};
use super::loss::{attack_loss_directed, texture_loss, Strategy};
use super::{compose_adversarial, random_texture, AttackResult};
use crate::bbox::BBox;
use crate::detector::{Detector, TargetSpec, Task};
use crate::error::{Error, Result};
use crate::eval::{is_success, SuccessCriterion};
use crate::image::Image;
use crate::mask::{MaskGrid, TextureLayer};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placement {
    /// One patch in the image's upper-left corner.
    DPatchCorner,
    /// One patch at the target-box center.
    AdvPatchCenter,
    /// Two patches at the centers of the target's upper and lower halves.
    Rp2TwoPatch,
    /// Two patches at the centers of the target's left and right halves.
    TwoRectsH,
    /// Four patches at the centers of the target's quarters.
    FourRects,
}

impl Placement {
    pub const ALL: [Placement; 5] = [
        Placement::DPatchCorner,
        Placement::AdvPatchCenter,
        Placement::Rp2TwoPatch,
        Placement::TwoRectsH,
        Placement::FourRects,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placement::DPatchCorner => "dpatch",
            Placement::AdvPatchCenter => "advpatch",
            Placement::Rp2TwoPatch => "rp2",
            Placement::TwoRectsH => "two_rects_h",
            Placement::FourRects => "four_rects",
        }
    }

    /// Patch centers for a target box; `None` means "anchored at the image
    /// origin" (the corner placement).
    fn centers(self, t: &BBox) -> Option<Vec<(f64, f64)>> {
        let (cx, cy) = t.center();
        let (qx1, qx3) = (t.x1 + t.width() / 4.0, t.x1 + 3.0 * t.width() / 4.0);
        let (qy1, qy3) = (t.y1 + t.height() / 4.0, t.y1 + 3.0 * t.height() / 4.0);
        match self {
            Placement::DPatchCorner => None,
            Placement::AdvPatchCenter => Some(vec![(cx, cy)]),
            Placement::Rp2TwoPatch => Some(vec![(cx, qy1), (cx, qy3)]),
            Placement::TwoRectsH => Some(vec![(qx1, cy), (qx3, cy)]),
            Placement::FourRects => Some(vec![(qx1, qy1), (qx3, qy1), (qx1, qy3), (qx3, qy3)]),
        }
    }

    /// Integer-aligned patch rectangles, each `fraction` of the target's
    /// width and height, clipped to the image.
    pub fn patch_boxes(self, target: &BBox, fraction: f64, width: usize, height: usize) -> Vec<BBox> {
        let pw = (fraction * target.width()).round().max(1.0);
        let ph = (fraction * target.height()).round().max(1.0);
        let (w, h) = (width as f64, height as f64);
        match self.centers(target) {
            None => vec![BBox::new(0.0, 0.0, pw, ph).clipped(w, h)],
            Some(cs) => cs
                .into_iter()
                .map(|(cx, cy)| {
                    let x1 = (cx - pw / 2.0).round();
                    let y1 = (cy - ph / 2.0).round();
                    BBox::new(x1, y1, x1 + pw, y1 + ph).clipped(w, h)
                })
                .collect(),
        }
    }
}

impl std::str::FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Placement::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown placement `{s}`"))
    }
}

impl std::fmt::Display for Placement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Patch side at the first level, as a fraction of the target side.
    pub start_fraction: f64,
    pub growth: f64,
    pub max_fraction: f64,
    pub steps_per_level: usize,
    pub lr_texture: f64,
    pub strategy: Strategy,
    pub task: Task,
    pub shift_direction: f64,
    pub seed: RngSeed,
    /// Starting texture: uniform noise inside the patch when true, the clean
    /// image otherwise.
    pub random_init: bool,
    /// `(λ₂ initial, Δλ)` to add the texture-norm penalty; `None` for the
    /// unconstrained comparison methods.
    pub texture_penalty: Option<(f64, f64)>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self::from_attack(&AttackConfig::default())
    }
}

impl BaselineConfig {
    /// Shares losses, step size and seed with an LDAP configuration.
    pub fn from_attack(cfg: &AttackConfig) -> Self {
        Self {
            start_fraction: 0.04,
            growth: 1.25,
            max_fraction: 0.6,
            steps_per_level: 400,
            lr_texture: cfg.lr_texture,
            strategy: cfg.strategy,
            task: cfg.task,
            shift_direction: cfg.shift_direction,
            seed: cfg.seed,
            random_init: true,
            texture_penalty: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_fraction > 0.0 && self.growth > 1.0 && self.max_fraction >= self.start_fraction) {
            return Err(Error::InvalidConfig("baseline size schedule".into()));
        }
        if !(self.lr_texture > 0.0) {
            return Err(Error::InvalidConfig("lr_texture must be positive".into()));
        }
        Ok(())
    }

    /// Patch-side fractions `start · growth^k` up to `max_fraction`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let f = self.start_fraction * self.growth.powi(k);
            if f > self.max_fraction + 1e-12 {
                break;
            }
            out.push(f);
            k += 1;
        }
        out
    }

    fn attack_config(&self) -> AttackConfig {
        AttackConfig {
            strategy: self.strategy,
            task: self.task,
            shift_direction: self.shift_direction,
            lr_texture: self.lr_texture,
            seed: self.seed,
            ..AttackConfig::default()
        }
    }
}

/// Binary mask of the union of `boxes` (integer-aligned).
pub fn hard_mask(boxes: &[BBox], width: usize, height: usize) -> MaskGrid {
    let mut grid = MaskGrid::zeros(width, height);
    for b in boxes {
        let (x1, y1) = (b.x1.max(0.0) as usize, b.y1.max(0.0) as usize);
        let (x2, y2) = ((b.x2.max(0.0) as usize).min(width), (b.y2.max(0.0) as usize).min(height));
        for y in y1..y2 {
            for x in x1..x2 {
                grid.values[y * width + x] = 1.0;
            }
        }
    }
    grid
}

/// Result of optimizing one size level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutcome {
    pub success: bool,
    pub steps_to_success: Option<usize>,
    pub texture: TextureLayer,
    pub mask: MaskGrid,
    pub patches: Vec<BBox>,
    pub trace: Vec<LossBreakdown>,
}

/// Optimizes the texture of one size level, stopping at the first success.
pub fn run_level<D: Detector + ?Sized>(
    clean: &Image,
    spec: &TargetSpec,
    detector: &D,
    placement: Placement,
    level: usize,
    cfg: &BaselineConfig,
) -> Result<LevelOutcome> {
    cfg.validate()?;
    let problem = AttackProblem::new(clean, detector, *spec)?;
    let fraction = cfg.start_fraction * cfg.growth.powi(level as i32);
    let (w, h) = clean.dims();
    let patches = placement.patch_boxes(&spec.target_box, fraction, w, h);
    let mask = hard_mask(&patches, w, h);
    let acfg = cfg.attack_config();
    let crit = SuccessCriterion::for_task(cfg.task);

    let mut texture = if cfg.random_init {
        random_texture(clean, &mask, cfg.seed.derive(level as u64))
    } else {
        TextureLayer::zeros(w, h)
    };

    let area = mask.values.iter().sum::<f64>();
    let mut trace = Vec::new();
    for step in 1..=cfg.steps_per_level {
        let lambda2 = cfg
            .texture_penalty
            .map_or(0.0, |(l0, dl)| l0 + (step - 1) as f64 * dl);
        let (_, adv) = compose_adversarial(clean, &texture, &mask)?;
        let (_, _, mut grad) = problem.image_gradient(&adv, &acfg)?;
        let norm = texture.norm();
        let shrink = if norm > 0.0 { lambda2 / norm } else { 0.0 };
        for (i, g) in grad.data_mut().iter_mut().enumerate() {
            *g = *g * mask.values[i / 3] + shrink * texture.data()[i];
        }
        for (t, g) in texture.data_mut().iter_mut().zip(grad.data()) {
            *t -= cfg.lr_texture * g;
        }
        texture.project(clean);

        let (_, adv) = compose_adversarial(clean, &texture, &mask)?;
        let out = detector.forward(&adv)?;
        let success = is_success(&out, spec, &crit);
        let loss = attack_loss_directed(&out, spec, cfg.strategy, cfg.shift_direction);
        let tl = texture_loss(&texture);
        let lambda2_after = cfg.texture_penalty.map_or(0.0, |(l0, dl)| l0 + step as f64 * dl);
        trace.push(LossBreakdown {
            step,
            attack: loss.value,
            area,
            texture: tl,
            total: loss.value,
            texture_objective: loss.value + lambda2_after * tl,
            success,
            target_boxes: loss.target_boxes,
        });
        if success {
            return Ok(LevelOutcome {
                success,
                steps_to_success: Some(step),
                texture,
                mask,
                patches,
                trace,
            });
        }
    }
    Ok(LevelOutcome {
        success: false,
        steps_to_success: None,
        texture,
        mask,
        patches,
        trace,
    })
}

/// Grows the patches level by level and returns the first success, or the
/// largest level when none succeeds.
pub fn run_fixed_baseline<D: Detector + ?Sized>(
    clean: &Image,
    spec: &TargetSpec,
    detector: &D,
    placement: Placement,
    cfg: &BaselineConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    let levels = cfg.schedule().len();
    let mut trace = Vec::new();
    let mut offset = 0;
    let mut last = None;
    for level in 0..levels {
        let mut outcome = run_level(clean, spec, detector, placement, level, cfg)?;
        for row in &mut outcome.trace {
            row.step += offset;
        }
        offset += outcome.trace.len();
        trace.extend(outcome.trace.iter().cloned());
        let done = outcome.success;
        last = Some(outcome);
        if done {
            break;
        }
    }
    let outcome = last.ok_or_else(|| Error::InvalidConfig("empty baseline schedule".into()))?;
    let (perturbation, adversarial) = compose_adversarial(clean, &outcome.texture, &outcome.mask)?;
    let area = outcome.mask.values.iter().sum::<f64>();
    Ok(AttackResult {
        success: outcome.success,
        adversarial,
        perturbation,
        effective_area: outcome.mask.count_above_half(),
        mask: outcome.mask,
        primitives: None,
        patches: outcome.patches,
        area,
        steps_to_success: outcome.success.then_some(offset),
        returned_step: offset,
        loss_trace: trace,
    })
}
