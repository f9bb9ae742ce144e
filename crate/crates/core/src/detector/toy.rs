//! A fixed-weight anchor detector with a hand-derived backward pass.
//!
//! Each category owns a separable spatial template (a cosine-edged box matched
//! to the category's nominal object size) applied to the image projected onto
//! the category's chroma direction. The score head is
//! `sigmoid(gain · response + bias)`. A single class-agnostic offset template,
//! odd in x, reads luminance and yields the horizontal offset in anchor widths.
//! Boxes are the anchor square shifted by `offset_x · anchor_size`.
//!
//! Everything is linear in the pixels up to the sigmoid, so the gradient of a
//! weighted sum of heads is a weighted sum of templates.

use std::f64::consts::PI;

use crate::bbox::{nms_indices, BBox};
use crate::config::KeyValues;
use crate::detector::scene::ObjectShape;
use crate::detector::{Detection, Detector, DetectorOutput, HeadWeight, CONFIDENCE_THRESHOLD};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::phi;

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryTemplate {
    pub name: String,
    /// Prototype RGB color of objects in this category.
    pub color: [f64; 3],
    /// Nominal `(width, height)` of objects in pixels.
    pub size: [f64; 2],
    pub shape: ObjectShape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDetectorConfig {
    pub width: usize,
    pub height: usize,
    pub stride: usize,
    pub anchor_size: f64,
    pub categories: Vec<CategoryTemplate>,
    pub score_gain: f64,
    pub score_bias: f64,
    /// Luminance subtracted before the offset template; background level.
    pub offset_reference_luminance: f64,
    /// Object-minus-background luminance used to calibrate the offset gain.
    pub offset_reference_contrast: f64,
    pub nms_iou: f64,
}

impl Default for ToyDetectorConfig {
    fn default() -> Self {
        let cat = |name: &str, color, size, shape| CategoryTemplate {
            name: name.into(),
            color,
            size,
            shape,
        };
        Self {
            width: 64,
            height: 64,
            stride: 8,
            anchor_size: 24.0,
            categories: vec![
                cat("red_square", [0.90, 0.25, 0.20], [22.0, 22.0], ObjectShape::Rect),
                cat("lime_wide", [0.55, 0.88, 0.22], [26.0, 18.0], ObjectShape::Rect),
                cat("cyan_tall", [0.18, 0.78, 0.82], [18.0, 26.0], ObjectShape::Rect),
                cat("violet_disk", [0.58, 0.22, 0.92], [24.0, 24.0], ObjectShape::Ellipse),
            ],
            score_gain: 60.0,
            score_bias: -16.3,
            offset_reference_luminance: 0.22,
            offset_reference_contrast: 0.25,
            nms_iou: 0.5,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "width",
    "height",
    "stride",
    "anchor_size",
    "score_gain",
    "score_bias",
    "offset_reference_luminance",
    "offset_reference_contrast",
    "nms_iou",
    "categories",
    "category.*",
];

impl ToyDetectorConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(CONFIG_KEYS)?;
        let mut cfg = Self::default();
        kv.read_into("width", &mut cfg.width)?;
        kv.read_into("height", &mut cfg.height)?;
        kv.read_into("stride", &mut cfg.stride)?;
        kv.read_into("anchor_size", &mut cfg.anchor_size)?;
        kv.read_into("score_gain", &mut cfg.score_gain)?;
        kv.read_into("score_bias", &mut cfg.score_bias)?;
        kv.read_into("offset_reference_luminance", &mut cfg.offset_reference_luminance)?;
        kv.read_into("offset_reference_contrast", &mut cfg.offset_reference_contrast)?;
        kv.read_into("nms_iou", &mut cfg.nms_iou)?;
        if let Some(n) = kv.parsed::<usize>("categories")? {
            let mut cats = Vec::with_capacity(n);
            for i in 0..n {
                let key = |f: &str| format!("category.{i}.{f}");
                let fallback = cfg.categories.get(i).cloned();
                let name = kv
                    .get(&key("name"))
                    .map(str::to_string)
                    .or_else(|| fallback.as_ref().map(|c| c.name.clone()))
                    .ok_or_else(|| Error::InvalidConfig(format!("missing {}", key("name"))))?;
                let color = match kv.list::<f64>(&key("color"))? {
                    Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
                    Some(_) => return Err(Error::InvalidConfig(format!("{} needs 3 values", key("color")))),
                    None => fallback
                        .as_ref()
                        .map(|c| c.color)
                        .ok_or_else(|| Error::InvalidConfig(format!("missing {}", key("color"))))?,
                };
                let size = match kv.list::<f64>(&key("size"))? {
                    Some(v) if v.len() == 2 => [v[0], v[1]],
                    Some(_) => return Err(Error::InvalidConfig(format!("{} needs 2 values", key("size")))),
                    None => fallback
                        .as_ref()
                        .map(|c| c.size)
                        .ok_or_else(|| Error::InvalidConfig(format!("missing {}", key("size"))))?,
                };
                let shape = match kv.parsed::<ObjectShape>(&key("shape"))? {
                    Some(s) => s,
                    None => fallback.as_ref().map(|c| c.shape).unwrap_or(ObjectShape::Rect),
                };
                cats.push(CategoryTemplate {
                    name,
                    color,
                    size,
                    shape,
                });
            }
            cfg.categories = cats;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("width", self.width);
        kv.set("height", self.height);
        kv.set("stride", self.stride);
        kv.set("anchor_size", self.anchor_size);
        kv.set("score_gain", self.score_gain);
        kv.set("score_bias", self.score_bias);
        kv.set("offset_reference_luminance", self.offset_reference_luminance);
        kv.set("offset_reference_contrast", self.offset_reference_contrast);
        kv.set("nms_iou", self.nms_iou);
        kv.set("categories", self.categories.len());
        for (i, c) in self.categories.iter().enumerate() {
            kv.set(format!("category.{i}.name"), &c.name);
            kv.set(
                format!("category.{i}.color"),
                format!("{},{},{}", c.color[0], c.color[1], c.color[2]),
            );
            kv.set(format!("category.{i}.size"), format!("{},{}", c.size[0], c.size[1]));
            kv.set(format!("category.{i}.shape"), c.shape);
        }
        kv
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("input size {}x{}", self.width, self.height));
        }
        if self.stride == 0 || self.stride > self.width.min(self.height) {
            return bad(format!("stride {}", self.stride));
        }
        if !(self.anchor_size > 0.0) {
            return bad(format!("anchor_size {}", self.anchor_size));
        }
        if self.categories.is_empty() {
            return bad("no categories".into());
        }
        for c in &self.categories {
            if !(c.size[0] > 0.0 && c.size[1] > 0.0) {
                return bad(format!("category {} size {:?}", c.name, c.size));
            }
            if c.color.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("category {} color {:?}", c.name, c.color));
            }
            if chroma_direction(c.color).is_none() {
                return bad(format!("category {} color has no chroma", c.name));
            }
        }
        if !self.score_gain.is_finite() || !self.score_bias.is_finite() || !(self.score_gain > 0.0) {
            return bad("score head parameters".into());
        }
        if !(self.offset_reference_contrast > 0.0) {
            return bad("offset_reference_contrast must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return bad(format!("nms_iou {}", self.nms_iou));
        }
        Ok(())
    }
}

/// Zero-mean, unit-norm RGB direction of a color.
fn chroma_direction(color: [f64; 3]) -> Option<[f64; 3]> {
    let mean = (color[0] + color[1] + color[2]) / 3.0;
    let d = [color[0] - mean, color[1] - mean, color[2] - mean];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    (n > 1e-6).then(|| [d[0] / n, d[1] / n, d[2] / n])
}

/// One axis of a separable template for one anchor row or column: nonzero
/// taps starting at pixel `start`.
#[derive(Debug, Clone)]
struct Taps {
    start: usize,
    values: Vec<f64>,
}

impl Taps {
    /// Samples `f(pixel_center - anchor_center)` over pixels where it is nonzero.
    fn sample(anchor: f64, len: usize, reach: f64, f: impl Fn(f64) -> f64) -> Self {
        let lo = (anchor - reach - 0.5).ceil().max(0.0) as usize;
        let hi = ((anchor + reach - 0.5).floor().max(-1.0) + 1.0).min(len as f64) as usize;
        let values = (lo..hi.max(lo)).map(|k| f(k as f64 + 0.5 - anchor)).collect();
        Self { start: lo, values }
    }

    /// `Σ_k taps[k] · column[k]` where `column` is indexed by pixel.
    #[inline]
    fn dot(&self, signal: impl Fn(usize) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| v * signal(self.start + i))
            .sum()
    }
}

#[derive(Debug, Clone)]
struct CategoryBank {
    chroma: [f64; 3],
    /// One entry per anchor column.
    x_taps: Vec<Taps>,
    /// One entry per anchor row.
    y_taps: Vec<Taps>,
    /// `1 / (Σ gx · Σ gy)` so the template integrates to 1.
    norm: f64,
}

#[derive(Debug, Clone)]
pub struct ToyDetector {
    config: ToyDetectorConfig,
    anchors_x: usize,
    anchors_y: usize,
    banks: Vec<CategoryBank>,
    offset_x_taps: Vec<Taps>,
    offset_y_taps: Vec<Taps>,
    offset_gain: f64,
}

impl ToyDetector {
    pub fn build(config: ToyDetectorConfig) -> Result<Self> {
        config.validate()?;
        let anchors_x = config.width / config.stride;
        let anchors_y = config.height / config.stride;
        let half = config.stride as f64 / 2.0;
        let ax: Vec<f64> = (0..anchors_x).map(|i| (i * config.stride) as f64 + half).collect();
        let ay: Vec<f64> = (0..anchors_y).map(|j| (j * config.stride) as f64 + half).collect();

        let banks = config
            .categories
            .iter()
            .map(|cat| {
                let [w, h] = cat.size;
                let gx = move |d: f64| phi(2.0 * PI * d / w);
                let gy = move |d: f64| phi(2.0 * PI * d / h);
                // unclipped sums over the same half-pixel lattice the anchors see
                let sum_x: f64 = Taps::sample(1e6, 4_000_000, 0.75 * w, gx).values.iter().sum();
                let sum_y: f64 = Taps::sample(1e6, 4_000_000, 0.75 * h, gy).values.iter().sum();
                CategoryBank {
                    chroma: chroma_direction(cat.color).expect("validated"),
                    x_taps: ax.iter().map(|&c| Taps::sample(c, config.width, 0.75 * w, gx)).collect(),
                    y_taps: ay.iter().map(|&c| Taps::sample(c, config.height, 0.75 * h, gy)).collect(),
                    norm: 1.0 / (sum_x * sum_y),
                }
            })
            .collect();

        let a = config.anchor_size;
        let hx = move |d: f64| d / a * phi(2.0 * PI * d / a);
        let qy = move |d: f64| phi(2.0 * PI * d / a);
        let offset_x_taps = ax.iter().map(|&c| Taps::sample(c, config.width, 0.75 * a, hx)).collect();
        let offset_y_taps = ay.iter().map(|&c| Taps::sample(c, config.height, 0.75 * a, qy)).collect();

        // Calibrate: the reference category's prototype, shifted 4 px right of
        // an anchor, should read as an offset of 4 px.
        let proto = config.categories[0].size;
        let shift = 4.0;
        let mut response = 0.0;
        let reach = 0.75 * a;
        let mut dx = -reach.ceil() - 0.5;
        while dx <= reach.ceil() + 0.5 {
            let mut dy = -reach.ceil() - 0.5;
            while dy <= reach.ceil() + 0.5 {
                if (dx - shift).abs() < proto[0] / 2.0 && dy.abs() < proto[1] / 2.0 {
                    response += hx(dx) * qy(dy) * config.offset_reference_contrast;
                }
                dy += 1.0;
            }
            dx += 1.0;
        }
        let offset_gain = (shift / a) / response;

        Ok(Self {
            config,
            anchors_x,
            anchors_y,
            banks,
            offset_x_taps,
            offset_y_taps,
            offset_gain,
        })
    }

    pub fn config(&self) -> &ToyDetectorConfig {
        &self.config
    }

    pub fn num_anchors(&self) -> usize {
        self.anchors_x * self.anchors_y
    }

    pub fn anchor_center(&self, index: usize) -> (f64, f64) {
        let (i, j) = (index % self.anchors_x, index / self.anchors_x);
        let half = self.config.stride as f64 / 2.0;
        (
            (i * self.config.stride) as f64 + half,
            (j * self.config.stride) as f64 + half,
        )
    }

    fn check_dims(&self, img: &Image) -> Result<()> {
        let expected = (self.config.width, self.config.height);
        if img.dims() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: img.dims(),
            });
        }
        Ok(())
    }

    fn project(&self, img: &Image, dir: [f64; 3]) -> Vec<f64> {
        img.data()
            .chunks_exact(3)
            .map(|p| p[0] * dir[0] + p[1] * dir[1] + p[2] * dir[2])
            .collect()
    }

    fn luminance(&self, img: &Image) -> Vec<f64> {
        let r = self.config.offset_reference_luminance;
        img.data()
            .chunks_exact(3)
            .map(|p| (p[0] + p[1] + p[2]) / 3.0 - r)
            .collect()
    }

    /// Responses `r[anchor]` of a separable template over a projected plane.
    fn responses(&self, plane: &[f64], x_taps: &[Taps], y_taps: &[Taps]) -> Vec<f64> {
        let w = self.config.width;
        let h = self.config.height;
        let mut out = vec![0.0; self.num_anchors()];
        let mut column = vec![0.0; h];
        for (i, xt) in x_taps.iter().enumerate() {
            for (y, slot) in column.iter_mut().enumerate() {
                let row = &plane[y * w..(y + 1) * w];
                *slot = xt.dot(|k| row[k]);
            }
            for (j, yt) in y_taps.iter().enumerate() {
                out[j * self.anchors_x + i] = yt.dot(|y| column[y]);
            }
        }
        out
    }

    fn logits(&self, img: &Image) -> Vec<Vec<f64>> {
        self.banks
            .iter()
            .map(|bank| {
                let plane = self.project(img, bank.chroma);
                self.responses(&plane, &bank.x_taps, &bank.y_taps)
                    .into_iter()
                    .map(|r| self.config.score_gain * bank.norm * r + self.config.score_bias)
                    .collect()
            })
            .collect()
    }

    fn offsets(&self, img: &Image) -> Vec<f64> {
        let lum = self.luminance(img);
        self.responses(&lum, &self.offset_x_taps, &self.offset_y_taps)
            .into_iter()
            .map(|r| self.offset_gain * r)
            .collect()
    }

    /// Logit of a single (anchor, category) pair.
    fn logit_at(&self, img: &Image, anchor: usize, category: usize) -> f64 {
        let bank = &self.banks[category];
        let (i, j) = (anchor % self.anchors_x, anchor / self.anchors_x);
        let (xt, yt) = (&bank.x_taps[i], &bank.y_taps[j]);
        let w = self.config.width;
        let d = bank.chroma;
        let data = img.data();
        let r = yt.dot(|y| {
            xt.dot(|x| {
                let p = (y * w + x) * 3;
                data[p] * d[0] + data[p + 1] * d[1] + data[p + 2] * d[2]
            })
        });
        self.config.score_gain * bank.norm * r + self.config.score_bias
    }

    fn decode_box(&self, anchor: usize, offset_x: f64) -> BBox {
        let (cx, cy) = self.anchor_center(anchor);
        let a = self.config.anchor_size;
        BBox::from_center(cx + offset_x * a, cy, a, a)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Detector for ToyDetector {
    fn input_dims(&self) -> (usize, usize) {
        (self.config.width, self.config.height)
    }

    fn num_categories(&self) -> usize {
        self.config.categories.len()
    }

    fn forward(&self, img: &Image) -> Result<DetectorOutput> {
        self.check_dims(img)?;
        let logits = self.logits(img);
        let offsets = self.offsets(img);
        let raw: Vec<Detection> = (0..self.num_anchors())
            .map(|a| Detection {
                bbox: self.decode_box(a, offsets[a]),
                category_scores: logits.iter().map(|l| sigmoid(l[a])).collect(),
                offset_x: offsets[a],
            })
            .collect();
        let candidates: Vec<usize> = (0..raw.len())
            .filter(|&i| raw[i].max_score() >= CONFIDENCE_THRESHOLD)
            .collect();
        let subset: Vec<Detection> = candidates.iter().map(|&i| raw[i].clone()).collect();
        let kept = nms_indices(&subset, self.config.nms_iou, true)
            .into_iter()
            .map(|k| candidates[k])
            .collect();
        Ok(DetectorOutput { raw, kept })
    }

    fn backward(&self, img: &Image, weights: &[HeadWeight]) -> Result<Image> {
        self.check_dims(img)?;
        let (w, h) = (self.config.width, self.config.height);
        let n = self.num_anchors();
        let mut chroma_planes: Vec<Option<Vec<f64>>> = vec![None; self.banks.len()];
        let mut lum_plane: Option<Vec<f64>> = None;

        for hw in weights {
            if hw.detection >= n {
                return Err(Error::InvalidDetection {
                    index: hw.detection,
                    count: n,
                });
            }
            if hw.category >= self.banks.len() {
                return Err(Error::InvalidConfig(format!(
                    "category {} out of range ({} categories)",
                    hw.category,
                    self.banks.len()
                )));
            }
            let (i, j) = (hw.detection % self.anchors_x, hw.detection / self.anchors_x);
            if hw.score != 0.0 {
                let bank = &self.banks[hw.category];
                let s = sigmoid(self.logit_at(img, hw.detection, hw.category));
                let coeff = hw.score * s * (1.0 - s) * self.config.score_gain * bank.norm;
                let plane = chroma_planes[hw.category].get_or_insert_with(|| vec![0.0; w * h]);
                splat(plane, w, &bank.x_taps[i], &bank.y_taps[j], coeff);
            }
            if hw.offset != 0.0 {
                let plane = lum_plane.get_or_insert_with(|| vec![0.0; w * h]);
                splat(
                    plane,
                    w,
                    &self.offset_x_taps[i],
                    &self.offset_y_taps[j],
                    hw.offset * self.offset_gain,
                );
            }
        }

        let mut grad = Image::zeros(w, h);
        let g = grad.data_mut();
        for (bank, plane) in self.banks.iter().zip(&chroma_planes) {
            if let Some(plane) = plane {
                for (p, &v) in plane.iter().enumerate() {
                    for c in 0..3 {
                        g[p * 3 + c] += v * bank.chroma[c];
                    }
                }
            }
        }
        if let Some(plane) = lum_plane {
            for (p, &v) in plane.iter().enumerate() {
                for c in 0..3 {
                    g[p * 3 + c] += v / 3.0;
                }
            }
        }
        Ok(grad)
    }
}

/// `plane += coeff · x_taps ⊗ y_taps`.
fn splat(plane: &mut [f64], width: usize, xt: &Taps, yt: &Taps, coeff: f64) {
    for (dy, &vy) in yt.values.iter().enumerate() {
        let row = (yt.start + dy) * width + xt.start;
        let cy = coeff * vy;
        for (dx, &vx) in xt.values.iter().enumerate() {
            plane[row + dx] += cy * vx;
        }
    }
}
