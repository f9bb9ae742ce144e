//! Procedural test scenes: value-noise background, one target object, and
//! optional distractors, regenerated until the detector finds the target.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bbox::{iou, BBox};
use crate::detector::toy::ToyDetector;
use crate::detector::{Detector, TARGET_IOU_GATE};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::RngSeed;

pub const MAX_SCENE_ATTEMPTS: u32 = 100;

/// Smallest accepted object box, as a fraction of the image area.
pub const MIN_OBJECT_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectShape {
    Rect,
    Ellipse,
}

impl std::str::FromStr for ObjectShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rect" => Ok(ObjectShape::Rect),
            "ellipse" => Ok(ObjectShape::Ellipse),
            other => Err(format!("unknown shape `{other}`")),
        }
    }
}

impl std::fmt::Display for ObjectShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObjectShape::Rect => "rect",
            ObjectShape::Ellipse => "ellipse",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bbox: BBox,
    pub category: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: RngSeed,
    /// Forces the target's category; drawn from the seed when `None`.
    pub category: Option<usize>,
    /// Chance of adding a second object of another category.
    pub distractor_probability: f64,
    /// Upper bound on gray clutter blobs (at least one is always drawn).
    pub max_clutter: usize,
}

impl SceneSpec {
    pub fn new(seed: impl Into<RngSeed>) -> Self {
        Self {
            seed: seed.into(),
            category: None,
            distractor_probability: 0.3,
            max_clutter: 3,
        }
    }

    /// Parses one scene-list line: `seed [category=K] [distractor=P] [clutter=K]`.
    pub fn parse_line(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let seed = parts
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty scene line".into()))?;
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad scene seed `{seed}`")))?;
        let mut spec = SceneSpec::new(seed);
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got `{part}`")))?;
            let bad = || Error::InvalidConfig(format!("bad value in `{part}`"));
            match k {
                "category" => spec.category = Some(v.parse().map_err(|_| bad())?),
                "distractor" => spec.distractor_probability = v.parse().map_err(|_| bad())?,
                "clutter" => spec.max_clutter = v.parse().map_err(|_| bad())?,
                _ => return Err(Error::InvalidConfig(format!("unknown scene parameter `{k}`"))),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    /// Every placed object; the first is the target.
    pub objects: Vec<GroundTruth>,
    /// Sub-seed of the accepted attempt.
    pub accepted_seed: RngSeed,
    pub attempts: u32,
}

impl Scene {
    pub fn target(&self) -> GroundTruth {
        self.objects[0]
    }
}

/// Builds a scene for `spec`, retrying with derived sub-seeds until the
/// detector keeps a correct-category box with IoU ≥ 0.5 on the target.
pub fn generate_scene(spec: &SceneSpec, detector: &ToyDetector) -> Result<Scene> {
    let cfg = detector.config();
    if let Some(c) = spec.category {
        if c >= cfg.categories.len() {
            return Err(Error::InvalidConfig(format!("scene category {c} out of range")));
        }
    }
    if !(0.0..=1.0).contains(&spec.distractor_probability) {
        return Err(Error::InvalidConfig("distractor probability outside [0, 1]".into()));
    }
    for attempt in 0..MAX_SCENE_ATTEMPTS {
        let sub = spec.seed.derive(u64::from(attempt));
        let Some((image, objects)) = draw(spec, detector, sub) else {
            continue;
        };
        let target = objects[0];
        let out = detector.forward(&image)?;
        let found = out.kept_detections().any(|d| {
            d.best_category() == target.category && iou(&d.bbox, &target.bbox) >= TARGET_IOU_GATE
        });
        if found {
            return Ok(Scene {
                image,
                objects,
                accepted_seed: sub,
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::SceneGeneration {
        seed: spec.seed.0,
        attempts: MAX_SCENE_ATTEMPTS,
    })
}

fn draw(spec: &SceneSpec, detector: &ToyDetector, seed: RngSeed) -> Option<(Image, Vec<GroundTruth>)> {
    let cfg = detector.config();
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = seed.rng();
    let mut img = background(w, h, &mut rng);

    let ncat = cfg.categories.len();
    let target_cat = spec.category.unwrap_or_else(|| rng.gen_range(0..ncat));
    let target = place_object(&mut img, detector, target_cat, &[], &mut rng)?;
    let mut objects = vec![target];

    if ncat > 1 && rng.gen_bool(spec.distractor_probability) {
        let mut other = rng.gen_range(0..ncat - 1);
        if other >= target_cat {
            other += 1;
        }
        let boxes: Vec<BBox> = objects.iter().map(|o| o.bbox).collect();
        if let Some(d) = place_object(&mut img, detector, other, &boxes, &mut rng) {
            objects.push(d);
        }
    }

    let blobs = 1 + rng.gen_range(0..spec.max_clutter.max(1));
    for _ in 0..blobs {
        clutter(&mut img, &objects, &mut rng);
    }
    Some((img.quantized(), objects))
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn background(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Image {
    let cell = 8usize;
    let (gw, gh) = (w / cell + 2, h / cell + 2);
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(0.12..0.32)).collect();
    let tint = [
        rng.gen_range(-0.03..0.03),
        rng.gen_range(-0.03..0.03),
        rng.gen_range(-0.03..0.03),
    ];
    let mut img = Image::zeros(w, h);
    for y in 0..h {
        let fy = (y as f64 + 0.5) / cell as f64;
        let (gy, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
        for x in 0..w {
            let fx = (x as f64 + 0.5) / cell as f64;
            let (gx, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
            let at = |i: usize, j: usize| lattice[j * gw + i];
            let top = at(gx, gy) * (1.0 - tx) + at(gx + 1, gy) * tx;
            let bottom = at(gx, gy + 1) * (1.0 - tx) + at(gx + 1, gy + 1) * tx;
            let lum = top * (1.0 - ty) + bottom * ty;
            let grain = rng.gen_range(-0.015..0.015);
            let mut px = [0.0; 3];
            for c in 0..3 {
                px[c] = (lum + tint[c] + grain).clamp(0.0, 1.0);
            }
            img.set_pixel(x, y, px);
        }
    }
    img
}

fn place_object(
    img: &mut Image,
    detector: &ToyDetector,
    category: usize,
    avoid: &[BBox],
    rng: &mut ChaCha8Rng,
) -> Option<GroundTruth> {
    let cfg = detector.config();
    let (w, h) = (cfg.width, cfg.height);
    let tpl = &cfg.categories[category];
    let min_area = MIN_OBJECT_FRACTION * (w * h) as f64;
    let margin = 2usize;

    for _ in 0..20 {
        let bw = (tpl.size[0] * rng.gen_range(0.9..1.1)).round().max(1.0) as usize;
        let bh = (tpl.size[1] * rng.gen_range(0.9..1.1)).round().max(1.0) as usize;
        if ((bw * bh) as f64) < min_area || bw + 2 * margin > w || bh + 2 * margin > h {
            continue;
        }
        let x1 = rng.gen_range(margin..=w - bw - margin);
        let y1 = rng.gen_range(margin..=h - bh - margin);
        let bbox = BBox::new(x1 as f64, y1 as f64, (x1 + bw) as f64, (y1 + bh) as f64);
        if avoid.iter().any(|b| gap(b, &bbox) < 2.0) {
            continue;
        }
        let mut color = tpl.color;
        for c in color.iter_mut() {
            *c = (*c + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0);
        }
        let shade = rng.gen_range(-0.06..0.06);
        let (cx, cy) = bbox.center();
        for y in y1..y1 + bh {
            for x in x1..x1 + bw {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let u = (px - cx) / (bw as f64 / 2.0);
                let v = (py - cy) / (bh as f64 / 2.0);
                let inside = match tpl.shape {
                    ObjectShape::Rect => true,
                    ObjectShape::Ellipse => u * u + v * v <= 1.0,
                };
                if !inside {
                    continue;
                }
                let k = 1.0 + shade * u + rng.gen_range(-0.02..0.02);
                img.set_pixel(x, y, color.map(|c| (c * k).clamp(0.0, 1.0)));
            }
        }
        return Some(GroundTruth { bbox, category });
    }
    None
}

/// Separation between two boxes along the axis where they are farthest apart.
fn gap(a: &BBox, b: &BBox) -> f64 {
    let dx = (b.x1 - a.x2).max(a.x1 - b.x2);
    let dy = (b.y1 - a.y2).max(a.y1 - b.y2);
    dx.max(dy)
}

fn clutter(img: &mut Image, objects: &[GroundTruth], rng: &mut ChaCha8Rng) {
    let (w, h) = img.dims();
    let bw = rng.gen_range(4..10).min(w);
    let bh = rng.gen_range(4..10).min(h);
    let x1 = rng.gen_range(0..=w - bw);
    let y1 = rng.gen_range(0..=h - bh);
    let bbox = BBox::new(x1 as f64, y1 as f64, (x1 + bw) as f64, (y1 + bh) as f64);
    if objects.iter().any(|o| gap(&o.bbox, &bbox) < 1.0) {
        return;
    }
    let lum = rng.gen_range(0.3..0.45);
    let tint = rng.gen_range(-0.02..0.02);
    for y in y1..y1 + bh {
        for x in x1..x1 + bw {
            img.set_pixel(x, y, [lum + tint, lum, lum - tint]);
        }
    }
}
