//! Attack losses, the alternating mask/texture search and fixed-position
//! baselines.

pub mod baseline;
mod ldap;
mod loss;

pub use baseline::{run_fixed_baseline, BaselineConfig, Placement};
pub use ldap::{
    mask_objective_grad, mask_search_step, run_ldap, run_ldap_with_mask, texture_objective_grad,
    texture_search_step, trace_to_csv, AttackConfig, AttackProblem, AttackState, LdapSession, LossBreakdown,
};
pub use loss::{
    attack_loss, attack_loss_directed, texture_loss, texture_loss_grad, weighted_heads, AttackLoss, Strategy,
};

use crate::bbox::BBox;
use crate::error::Result;
use crate::eval::AttackOutcome;
use crate::image::Image;
use crate::mask::{compose_perturbation, MaskGrid, MaskLayer, Perturbation, TextureLayer};
use crate::rng::RngSeed;
use rand::Rng;

/// Outcome of one attack on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub success: bool,
    /// `clean + δ`, clamped to `[0, 1]`.
    pub adversarial: Image,
    pub perturbation: Perturbation,
    /// Rendered mask of the returned iterate.
    pub mask: MaskGrid,
    /// Primitive parameters, for primitive-mask attacks.
    pub primitives: Option<MaskLayer>,
    /// Hard rectangles, for fixed-position attacks.
    pub patches: Vec<BBox>,
    /// Analytic `Σ s₁s₂` for primitive masks; exact pixel count for rectangles.
    pub area: f64,
    /// Pixels with mask above one half.
    pub effective_area: usize,
    pub steps_to_success: Option<usize>,
    /// Step (1-based) at which the returned iterate was produced; 0 for the
    /// initial state.
    pub returned_step: usize,
    pub loss_trace: Vec<LossBreakdown>,
}

impl AttackResult {
    pub fn outcome(&self, object_area: f64) -> AttackOutcome {
        AttackOutcome {
            success: self.success,
            area: self.area,
            object_area,
        }
    }
}

/// `clean + t⊙M`, clamped against rounding.
pub(crate) fn compose_adversarial(clean: &Image, texture: &TextureLayer, mask: &MaskGrid) -> Result<(Perturbation, Image)> {
    let delta = compose_perturbation(texture, mask)?;
    let adv = delta.apply(clean)?.clamped();
    Ok((delta, adv))
}

/// Texture that paints uniform random colors wherever `mask` is nonzero.
pub(crate) fn random_texture(clean: &Image, mask: &MaskGrid, seed: RngSeed) -> TextureLayer {
    let (w, h) = clean.dims();
    let mut texture = TextureLayer::zeros(w, h);
    let mut rng = seed.rng();
    for (p, &m) in mask.values.iter().enumerate() {
        if m > 0.0 {
            for c in 0..3 {
                let i = p * 3 + c;
                texture.data_mut()[i] = rng.gen_range(0.0..1.0) - clean.data()[i];
            }
        }
    }
    texture
}
