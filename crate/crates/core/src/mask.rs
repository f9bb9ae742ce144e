//! Mask layer built from rectangle primitives with cosine-relaxed edges.
//!
//! A primitive with center `c` and size `s` evaluates to
//! `phi(2π/s₁·(x₁-c₁)) · phi(2π/s₂·(x₂-c₂))`, where `phi` is 1 on a plateau of
//! half-width `s/4`, ramps down along a half cosine period and vanishes beyond
//! `3s/4`. The mask is the weighted sum of primitives, clamped to `[0, 1]`,
//! sampled at pixel centers (`i + 0.5`). Because `phi` is C¹, the rendered mask
//! is differentiable in every center, size and weight, and [`mask_backward`]
//! returns those derivatives exactly.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::RngSeed;

const THREE_HALVES_PI: f64 = 3.0 * FRAC_PI_2;

/// Initial primitive side as a fraction of the smaller target-box side.
pub const INIT_SIZE_FRACTION: f64 = 0.4;

/// Relaxed boundary profile.
#[inline]
pub fn phi(z: f64) -> f64 {
    let a = z.abs();
    if a <= FRAC_PI_2 {
        1.0
    } else if a < THREE_HALVES_PI {
        0.5 * ((a - FRAC_PI_2).cos() + 1.0)
    } else {
        0.0
    }
}

/// Derivative of [`phi`]; 0 on the plateau, outside the support and at the
/// branch points.
#[inline]
pub fn phi_grad(z: f64) -> f64 {
    if z > FRAC_PI_2 && z < THREE_HALVES_PI {
        -0.5 * (z - FRAC_PI_2).sin()
    } else if z < -FRAC_PI_2 && z > -THREE_HALVES_PI {
        -0.5 * (z + FRAC_PI_2).sin()
    } else {
        0.0
    }
}

/// True when `z` is within `tol` of one of the four branch points of `phi`.
pub fn near_branch_point(z: f64, tol: f64) -> bool {
    let a = z.abs();
    (a - FRAC_PI_2).abs() <= tol || (a - THREE_HALVES_PI).abs() <= tol
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectPrimitive {
    /// `(x, y)` in pixels.
    pub center: [f64; 2],
    /// `(width, height)` in pixels; a zero component means the primitive is dead.
    pub size: [f64; 2],
    pub weight: f64,
}

impl RectPrimitive {
    pub fn new(center: [f64; 2], size: [f64; 2], weight: f64) -> Self {
        Self {
            center,
            size,
            weight,
        }
    }

    #[inline]
    pub fn is_alive(&self) -> bool {
        self.size[0] > 0.0 && self.size[1] > 0.0
    }

    /// Unweighted primitive value at point `x`.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        if !self.is_alive() {
            return 0.0;
        }
        let zx = 2.0 * PI / self.size[0] * (x[0] - self.center[0]);
        let zy = 2.0 * PI / self.size[1] * (x[1] - self.center[1]);
        phi(zx) * phi(zy)
    }

    pub fn area(&self) -> f64 {
        self.size[0] * self.size[1]
    }

    /// Inclusive pixel-index range along one axis whose centers fall inside
    /// the support `|i + 0.5 - c| < 3s/4`, clipped to `[0, len)`.
    fn support_range(&self, axis: usize, len: usize) -> Option<(usize, usize)> {
        let reach = 0.75 * self.size[axis];
        let lo = (self.center[axis] - reach - 0.5).ceil().max(0.0);
        let hi = (self.center[axis] + reach - 0.5).floor().min(len as f64 - 1.0);
        if lo > hi || hi < 0.0 {
            None
        } else {
            Some((lo as usize, hi as usize))
        }
    }
}

/// Evaluates a primitive at a point; zero-size primitives give 0.
pub fn eval_primitive(p: &RectPrimitive, x: [f64; 2]) -> f64 {
    p.eval(x)
}

/// Per-axis samples of one primitive over its clipped support.
struct AxisSamples {
    start: usize,
    z: Vec<f64>,
    phi: Vec<f64>,
}

impl AxisSamples {
    fn new(p: &RectPrimitive, axis: usize, len: usize) -> Option<Self> {
        let (lo, hi) = p.support_range(axis, len)?;
        let k = 2.0 * PI / p.size[axis];
        let z: Vec<f64> = (lo..=hi)
            .map(|i| k * (i as f64 + 0.5 - p.center[axis]))
            .collect();
        let phi = z.iter().map(|&z| phi(z)).collect();
        Some(Self { start: lo, z, phi })
    }
}

/// A W×H scalar field (mask values, upstream gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl MaskGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Number of pixels with value strictly above 0.5.
    pub fn count_above_half(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.5).count()
    }
}

/// Ordered list of primitives; the mask is their clamped weighted sum.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MaskLayer {
    pub primitives: Vec<RectPrimitive>,
}

/// Gradient of a scalar with respect to one primitive's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrimitiveGrad {
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub weight: f64,
}

impl MaskLayer {
    pub fn new(primitives: Vec<RectPrimitive>) -> Self {
        Self { primitives }
    }

    /// Places `n` primitives on a jittered grid inside `target`.
    ///
    /// Each primitive gets side `size_fraction * min(target w, h)` and
    /// weight 1. Jitter is at most a quarter cell and comes from `seed`.
    pub fn initialize(n: usize, target: &BBox, size_fraction: f64, seed: RngSeed) -> Self {
        let (bw, bh) = (target.width().max(1e-9), target.height().max(1e-9));
        let cols = ((n as f64 * bw / bh).sqrt().ceil() as usize).clamp(1, n.max(1));
        let rows = n.div_ceil(cols).max(1);
        let (cw, ch) = (bw / cols as f64, bh / rows as f64);
        let side = size_fraction * bw.min(bh);
        let mut rng = seed.rng();
        let primitives = (0..n)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                let jx: f64 = rng.gen_range(-0.25..0.25);
                let jy: f64 = rng.gen_range(-0.25..0.25);
                RectPrimitive::new(
                    [
                        target.x1 + (c as f64 + 0.5 + jx) * cw,
                        target.y1 + (r as f64 + 0.5 + jy) * ch,
                    ],
                    [side, side],
                    1.0,
                )
            })
            .collect();
        Self { primitives }
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Weighted sum before clamping.
    pub fn render_unclamped(&self, width: usize, height: usize) -> MaskGrid {
        let mut grid = MaskGrid::zeros(width, height);
        for p in self.primitives.iter().filter(|p| p.is_alive()) {
            let (Some(ax), Some(ay)) = (AxisSamples::new(p, 0, width), AxisSamples::new(p, 1, height))
            else {
                continue;
            };
            for (dy, &fy) in ay.phi.iter().enumerate() {
                if fy == 0.0 {
                    continue;
                }
                let row = (ay.start + dy) * width + ax.start;
                let wy = p.weight * fy;
                for (dx, &fx) in ax.phi.iter().enumerate() {
                    grid.values[row + dx] += wy * fx;
                }
            }
        }
        grid
    }

    /// The mask `M`, clamped to `[0, 1]`.
    pub fn render(&self, width: usize, height: usize) -> MaskGrid {
        let mut grid = self.render_unclamped(width, height);
        for v in &mut grid.values {
            *v = v.clamp(0.0, 1.0);
        }
        grid
    }

    pub fn area_loss(&self) -> f64 {
        self.primitives.iter().map(RectPrimitive::area).sum()
    }

    /// `∂L_area/∂s` per primitive: `(s₂, s₁)`.
    pub fn area_loss_grad(&self) -> Vec<[f64; 2]> {
        self.primitives.iter().map(|p| [p.size[1], p.size[0]]).collect()
    }

    /// Number of pixels whose rendered mask exceeds 0.5.
    pub fn half_level_area(&self, width: usize, height: usize) -> usize {
        self.render(width, height).count_above_half()
    }

    /// Clamps sizes at 0, weights to `[0, 1]` and centers into the image.
    pub fn project(&mut self, width: usize, height: usize) {
        self.project_shape(width, height);
        self.project_weights();
    }

    /// Size and center half of [`MaskLayer::project`].
    pub fn project_shape(&mut self, width: usize, height: usize) {
        for p in &mut self.primitives {
            p.size[0] = p.size[0].max(0.0);
            p.size[1] = p.size[1].max(0.0);
            p.center[0] = p.center[0].clamp(0.0, width as f64);
            p.center[1] = p.center[1].clamp(0.0, height as f64);
        }
    }

    pub fn project_weights(&mut self) {
        for p in &mut self.primitives {
            p.weight = p.weight.clamp(0.0, 1.0);
        }
    }

    /// Plain-text record: one line per primitive, `alpha cx cy sx sy`, each
    /// with 9 significant digits.
    pub fn to_record(&self) -> String {
        let mut out = String::from("# alpha center_x center_y size_x size_y\n");
        for p in &self.primitives {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                fmt_sig9(p.weight),
                fmt_sig9(p.center[0]),
                fmt_sig9(p.center[1]),
                fmt_sig9(p.size[0]),
                fmt_sig9(p.size[1])
            );
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut primitives = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidConfig(format!("mask record line {}: {e}", lineno + 1)))?;
            let [alpha, cx, cy, sx, sy] = vals[..] else {
                return Err(Error::InvalidConfig(format!(
                    "mask record line {}: expected 5 fields, got {}",
                    lineno + 1,
                    vals.len()
                )));
            };
            primitives.push(RectPrimitive::new([cx, cy], [sx, sy], alpha));
        }
        Ok(Self { primitives })
    }
}

/// Decimal rendering with 9 significant digits.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { format!("{v}") };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Chain-rule gradients of `Σ_x upstream(x)·M(x)` with respect to every
/// primitive parameter.
///
/// Gradients are those of the pre-clamp weighted sum; pixels where the clamp
/// is active contribute nothing. Dead primitives get zero gradient.
pub fn mask_backward(mask: &MaskLayer, upstream: &MaskGrid) -> Vec<PrimitiveGrad> {
    let (width, height) = (upstream.width, upstream.height);
    let pre = mask.render_unclamped(width, height);
    mask.primitives
        .iter()
        .map(|p| {
            let mut g = PrimitiveGrad::default();
            if !p.is_alive() {
                return g;
            }
            let (Some(ax), Some(ay)) = (AxisSamples::new(p, 0, width), AxisSamples::new(p, 1, height))
            else {
                return g;
            };
            let kx = 2.0 * PI / p.size[0];
            let ky = 2.0 * PI / p.size[1];
            let dphix: Vec<f64> = ax.z.iter().map(|&z| phi_grad(z)).collect();
            for (dy, (&fy, &zy)) in ay.phi.iter().zip(&ay.z).enumerate() {
                let dfy = phi_grad(zy);
                if fy == 0.0 && dfy == 0.0 {
                    continue;
                }
                let row = (ay.start + dy) * width + ax.start;
                for (dx, (&fx, &zx)) in ax.phi.iter().zip(&ax.z).enumerate() {
                    let idx = row + dx;
                    let s = pre.values[idx];
                    if !(0.0..=1.0).contains(&s) {
                        continue;
                    }
                    let u = upstream.values[idx];
                    if u == 0.0 {
                        continue;
                    }
                    let dfx = dphix[dx];
                    g.weight += u * fx * fy;
                    // d/dc = phi'(z)·(-k);  d/ds = phi'(z)·(-z/s)
                    let ux = u * p.weight * dfx * fy;
                    let uy = u * p.weight * fx * dfy;
                    g.center[0] -= ux * kx;
                    g.center[1] -= uy * ky;
                    g.size[0] -= ux * zx / p.size[0];
                    g.size[1] -= uy * zy / p.size[1];
                }
            }
            g
        })
        .collect()
}

/// The signed texture `t`, W×H×3.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureLayer(pub Image);

impl TextureLayer {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self(Image::zeros(width, height))
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        self.0.data_mut()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    /// Projects `t` into `[-I, 1 - I]` elementwise.
    ///
    /// Since every mask value lies in `[0, 1]`, `I + t⊙M` is then a convex
    /// combination of `I` and `I + t` and stays in `[0, 1]` for any mask.
    pub fn project(&mut self, clean: &Image) {
        for (t, &i) in self.0.data_mut().iter_mut().zip(clean.data()) {
            *t = t.clamp(-i, 1.0 - i);
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.data().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `δ = t ⊙ M`, mask broadcast over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation(pub Image);

impl Perturbation {
    pub fn apply(&self, clean: &Image) -> Result<Image> {
        clean.ensure_same_dims(&self.0)?;
        let data = clean
            .data()
            .iter()
            .zip(self.0.data())
            .map(|(a, b)| a + b)
            .collect();
        Image::from_data(clean.width(), clean.height(), data)
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.data().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn compose_perturbation(t: &TextureLayer, mask: &MaskGrid) -> Result<Perturbation> {
    let (w, h) = t.dims();
    if (mask.width, mask.height) != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            actual: (mask.width, mask.height),
        });
    }
    let mut delta = Image::zeros(w, h);
    for (px, &m) in mask.values.iter().enumerate() {
        for c in 0..3 {
            delta.data_mut()[px * 3 + c] = t.data()[px * 3 + c] * m;
        }
    }
    Ok(Perturbation(delta))
}
