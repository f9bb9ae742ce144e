//! WebAssembly bindings for the browser demo: a primitive-mask explorer, a
//! step-by-step attack session, and detection overlays.

use patchsearch::attack::{AttackConfig, AttackProblem, LdapSession, Strategy};
use patchsearch::detector::{generate_scene, Detector, DetectorOutput, SceneSpec, TargetSpec, Task, ToyDetector, ToyDetectorConfig};
use patchsearch::image::{quantize, Image};
use patchsearch::mask::{compose_perturbation, MaskGrid, MaskLayer, RectPrimitive};
use patchsearch::rng::RngSeed;
use wasm_bindgen::prelude::*;

type Res<T> = std::result::Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn image_rgba(img: &Image) -> Vec<u8> {
    img.data()
        .chunks_exact(3)
        .flat_map(|p| [quantize(p[0]), quantize(p[1]), quantize(p[2]), 255])
        .collect()
}

fn mask_rgba(grid: &MaskGrid) -> Vec<u8> {
    grid.values
        .iter()
        .flat_map(|&v| {
            let g = quantize(v);
            [g, g, g, 255]
        })
        .collect()
}

/// Kept detections as flat `x1 y1 x2 y2 category score` records.
fn flatten(out: &DetectorOutput) -> Vec<f64> {
    out.kept_detections()
        .flat_map(|d| {
            let c = d.best_category();
            [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2, c as f64, d.score(c)]
        })
        .collect()
}

/// One primitive rendered on a `size`×`size` canvas, as RGBA.
#[wasm_bindgen]
pub fn render_primitive(size: usize, cx: f64, cy: f64, sx: f64, sy: f64, alpha: f64) -> Vec<u8> {
    let layer = MaskLayer::new(vec![RectPrimitive::new([cx, cy], [sx, sy], alpha)]);
    mask_rgba(&layer.render(size, size))
}

/// `[analytic area, pixels above one half]` for one primitive.
#[wasm_bindgen]
pub fn primitive_areas(size: usize, cx: f64, cy: f64, sx: f64, sy: f64, alpha: f64) -> Vec<f64> {
    let layer = MaskLayer::new(vec![RectPrimitive::new([cx, cy], [sx, sy], alpha)]);
    vec![layer.area_loss(), layer.half_level_area(size, size) as f64]
}

/// A generated scene with an attack session running on it.
#[wasm_bindgen]
pub struct Demo {
    detector: ToyDetector,
    clean: Image,
    spec: TargetSpec,
    session: LdapSession,
    category_names: Vec<String>,
}

#[wasm_bindgen]
impl Demo {
    /// `task` is `cls` or `loc`; `strategy` is `soft`, `a1` or `ae`.
    #[wasm_bindgen(constructor)]
    pub fn new(scene_seed: u64, task: &str, strategy: &str, n_primitives: usize) -> Res<Demo> {
        let config = ToyDetectorConfig::default();
        let category_names = config.categories.iter().map(|c| c.name.clone()).collect();
        let detector = ToyDetector::build(config).map_err(err)?;
        let scene = generate_scene(&SceneSpec::new(scene_seed), &detector).map_err(err)?;
        let target = scene.target();
        let task: Task = task.parse()?;
        let spec = TargetSpec {
            target_box: target.bbox,
            target_category: target.category,
            task,
        };
        let cfg = AttackConfig {
            task,
            strategy: strategy.parse::<Strategy>()?,
            n_primitives,
            seed: RngSeed(scene_seed),
            ..AttackConfig::default()
        };
        let problem = AttackProblem::new(&scene.image, &detector, spec).map_err(err)?;
        let session = LdapSession::new(&problem, cfg).map_err(err)?;
        Ok(Self {
            clean: scene.image,
            detector,
            spec,
            session,
            category_names,
        })
    }

    pub fn width(&self) -> usize {
        self.clean.width()
    }

    pub fn height(&self) -> usize {
        self.clean.height()
    }

    pub fn category_name(&self, index: usize) -> String {
        self.category_names.get(index).cloned().unwrap_or_default()
    }

    /// `[x1, y1, x2, y2, category]` of the attacked object.
    pub fn target(&self) -> Vec<f64> {
        let b = self.spec.target_box;
        vec![b.x1, b.y1, b.x2, b.y2, self.spec.target_category as f64]
    }

    /// Runs up to `n` more steps; returns the number of completed steps.
    pub fn step(&mut self, n: usize) -> Res<usize> {
        let problem = AttackProblem::new(&self.clean, &self.detector, self.spec).map_err(err)?;
        for _ in 0..n {
            if self.session.is_done() {
                break;
            }
            self.session.step(&problem).map_err(err)?;
        }
        Ok(self.session.state().step)
    }

    pub fn steps(&self) -> usize {
        self.session.state().step
    }

    pub fn max_steps(&self) -> usize {
        self.session.config().max_steps
    }

    /// Whether the latest iterate fools the detector.
    pub fn success(&self) -> bool {
        self.session.trace().last().is_some_and(|t| t.success)
    }

    /// Analytic mask area of the current iterate over the object box area.
    pub fn area_ratio(&self) -> f64 {
        self.session.state().mask.area_loss() / self.spec.target_box.area()
    }

    /// Smallest successful area ratio so far, or a negative value.
    pub fn best_area_ratio(&self) -> f64 {
        self.session
            .best()
            .map_or(-1.0, |b| b.mask.area_loss() / self.spec.target_box.area())
    }

    pub fn attack_loss(&self) -> f64 {
        self.session.trace().last().map_or(f64::NAN, |t| t.attack)
    }

    fn adversarial_image(&self) -> Res<Image> {
        let st = self.session.state();
        let delta = compose_perturbation(&st.texture, &st.render()).map_err(err)?;
        Ok(delta.apply(&self.clean).map_err(err)?.clamped())
    }

    pub fn clean_rgba(&self) -> Vec<u8> {
        image_rgba(&self.clean)
    }

    pub fn adversarial_rgba(&self) -> Res<Vec<u8>> {
        Ok(image_rgba(&self.adversarial_image()?))
    }

    pub fn mask_rgba(&self) -> Vec<u8> {
        mask_rgba(&self.session.state().render())
    }

    /// Kept detections on the clean image, as `x1 y1 x2 y2 category score` records.
    pub fn clean_detections(&self) -> Res<Vec<f64>> {
        Ok(flatten(&self.detector.forward(&self.clean).map_err(err)?))
    }

    pub fn adversarial_detections(&self) -> Res<Vec<f64>> {
        Ok(flatten(&self.detector.forward(&self.adversarial_image()?).map_err(err)?))
    }
}
