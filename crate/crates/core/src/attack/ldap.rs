//! Alternating mask/texture search under growing area and texture penalties.
//!
//! Each step: update primitive centers and sizes on `L_attack + λ₁·L_area`,
//! refresh, update primitive weights, then update the texture on
//! `L_attack + λ₂·‖t‖`, then raise both λ by Δλ. After every step the patched
//! image is judged on the detector's post-NMS output, and the successful
//! iterate with the smallest analytic area is kept.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::loss::{attack_loss_directed, texture_loss, AttackLoss, Strategy};
use super::{compose_adversarial, random_texture, AttackResult};

/// RNG stream for the initial texture, apart from the primitive jitter.
const TEXTURE_STREAM: u64 = 0x7465_7874;
use crate::config::KeyValues;
use crate::detector::{Detector, DetectorOutput, TargetSpec, Task};
use crate::error::{Error, Result};
use crate::eval::{is_success, SuccessCriterion};
use crate::image::Image;
use crate::mask::{mask_backward, INIT_SIZE_FRACTION, MaskGrid, MaskLayer, PrimitiveGrad, TextureLayer};
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub n_primitives: usize,
    /// Initial primitive side as a fraction of the target box's shorter side.
    pub init_size: f64,
    /// Initial area-penalty weight.
    pub lambda1: f64,
    /// Initial texture-penalty weight.
    pub lambda2: f64,
    /// Added to both penalty weights after every step.
    pub delta_lambda: f64,
    pub lr_center: f64,
    pub lr_size: f64,
    pub lr_alpha: f64,
    pub lr_texture: f64,
    pub max_steps: usize,
    pub strategy: Strategy,
    pub task: Task,
    pub seed: RngSeed,
    /// +1 pushes boxes right in localization attacks, -1 left.
    pub shift_direction: f64,
    /// When false the mask is never updated.
    pub region_search: bool,
    /// When false λ₂ is held at 0.
    pub texture_constraint: bool,
    /// Start from random colors under the initial mask instead of zero texture.
    pub random_init: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            n_primitives: 10,
            init_size: INIT_SIZE_FRACTION,
            lambda1: 1e-2,
            lambda2: 1e-2,
            delta_lambda: 1e-4,
            lr_center: 2.0,
            lr_size: 2.0,
            lr_alpha: 0.05,
            lr_texture: 20.0,
            max_steps: 2000,
            strategy: Strategy::Soft,
            task: Task::Classification,
            seed: RngSeed(0),
            shift_direction: 1.0,
            region_search: true,
            texture_constraint: true,
            random_init: true,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "n_primitives",
    "init_size",
    "lambda1",
    "lambda2",
    "delta_lambda",
    "lr_center",
    "lr_size",
    "lr_alpha",
    "lr_texture",
    "max_steps",
    "strategy",
    "task",
    "seed",
    "shift_direction",
    "region_search",
    "texture_constraint",
    "random_init",
];

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_primitives == 0 {
            return bad("n_primitives must be at least 1");
        }
        if !(self.init_size > 0.0 && self.init_size <= 1.0) {
            return bad("init_size must be in (0, 1]");
        }
        let rates = [self.lr_center, self.lr_size, self.lr_alpha, self.lr_texture];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("learning rates must be positive");
        }
        if !(self.delta_lambda >= 0.0 && self.delta_lambda.is_finite()) {
            return bad("delta_lambda must be non-negative");
        }
        if !(self.lambda1.is_finite() && self.lambda2.is_finite()) {
            return bad("lambda1 and lambda2 must be finite");
        }
        if self.shift_direction != 1.0 && self.shift_direction != -1.0 {
            return bad("shift_direction must be 1 or -1");
        }
        Ok(())
    }

    /// Overrides defaults with the keys present in `kv`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(CONFIG_KEYS)?;
        let mut cfg = Self::default();
        cfg.apply(kv)?;
        Ok(cfg)
    }

    /// Overrides fields present in `kv`, ignoring unrelated keys.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.read_into("n_primitives", &mut self.n_primitives)?;
        kv.read_into("init_size", &mut self.init_size)?;
        kv.read_into("lambda1", &mut self.lambda1)?;
        kv.read_into("lambda2", &mut self.lambda2)?;
        kv.read_into("delta_lambda", &mut self.delta_lambda)?;
        kv.read_into("lr_center", &mut self.lr_center)?;
        kv.read_into("lr_size", &mut self.lr_size)?;
        kv.read_into("lr_alpha", &mut self.lr_alpha)?;
        kv.read_into("lr_texture", &mut self.lr_texture)?;
        kv.read_into("max_steps", &mut self.max_steps)?;
        kv.read_into("strategy", &mut self.strategy)?;
        kv.read_into("task", &mut self.task)?;
        if let Some(s) = kv.parsed::<u64>("seed")? {
            self.seed = RngSeed(s);
        }
        kv.read_into("shift_direction", &mut self.shift_direction)?;
        kv.read_into("region_search", &mut self.region_search)?;
        kv.read_into("texture_constraint", &mut self.texture_constraint)?;
        kv.read_into("random_init", &mut self.random_init)?;
        self.validate()
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("n_primitives", self.n_primitives);
        kv.set("init_size", self.init_size);
        kv.set("lambda1", self.lambda1);
        kv.set("lambda2", self.lambda2);
        kv.set("delta_lambda", self.delta_lambda);
        kv.set("lr_center", self.lr_center);
        kv.set("lr_size", self.lr_size);
        kv.set("lr_alpha", self.lr_alpha);
        kv.set("lr_texture", self.lr_texture);
        kv.set("max_steps", self.max_steps);
        kv.set("strategy", self.strategy);
        kv.set("task", self.task);
        kv.set("seed", self.seed.0);
        kv.set("shift_direction", self.shift_direction);
        kv.set("region_search", self.region_search);
        kv.set("texture_constraint", self.texture_constraint);
        kv.set("random_init", self.random_init);
        kv
    }

    /// λ₁ after `step` completed steps.
    pub fn lambda1_at(&self, step: usize) -> f64 {
        self.lambda1 + step as f64 * self.delta_lambda
    }

    /// λ₂ after `step` completed steps; 0 throughout without the texture
    /// constraint.
    pub fn lambda2_at(&self, step: usize) -> f64 {
        if self.texture_constraint {
            self.lambda2 + step as f64 * self.delta_lambda
        } else {
            0.0
        }
    }
}

/// The fixed inputs of one attack.
pub struct AttackProblem<'a, D: Detector + ?Sized> {
    pub clean: &'a Image,
    pub detector: &'a D,
    pub spec: TargetSpec,
}

impl<'a, D: Detector + ?Sized> AttackProblem<'a, D> {
    pub fn new(clean: &'a Image, detector: &'a D, spec: TargetSpec) -> Result<Self> {
        let expected = detector.input_dims();
        if clean.dims() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: clean.dims(),
            });
        }
        if spec.target_category >= detector.num_categories() {
            return Err(Error::InvalidConfig(format!(
                "target category {} out of range",
                spec.target_category
            )));
        }
        if !spec.target_box.is_valid() {
            return Err(Error::InvalidConfig("invalid target box".into()));
        }
        Ok(Self { clean, detector, spec })
    }

    fn dims(&self) -> (usize, usize) {
        self.clean.dims()
    }

    /// Forward pass, attack loss and `∂L_attack/∂I` at `img`.
    pub fn image_gradient(&self, img: &Image, cfg: &AttackConfig) -> Result<(DetectorOutput, AttackLoss, Image)> {
        let out = self.detector.forward(img)?;
        let loss = attack_loss_directed(&out, &self.spec, cfg.strategy, cfg.shift_direction);
        let grad = if loss.weights.is_empty() {
            let (w, h) = img.dims();
            Image::zeros(w, h)
        } else {
            self.detector.backward(img, &loss.weights)?
        };
        Ok((out, loss, grad))
    }
}

/// Current optimization variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackState {
    pub mask: MaskLayer,
    pub texture: TextureLayer,
    /// Completed steps.
    pub step: usize,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl AttackState {
    /// Primitives on a jittered grid inside the target box.
    pub fn initial<D: Detector + ?Sized>(problem: &AttackProblem<'_, D>, cfg: &AttackConfig) -> Self {
        let mask = MaskLayer::initialize(cfg.n_primitives, &problem.spec.target_box, cfg.init_size, cfg.seed);
        Self::with_mask(problem, cfg, mask)
    }

    pub fn with_mask<D: Detector + ?Sized>(problem: &AttackProblem<'_, D>, cfg: &AttackConfig, mask: MaskLayer) -> Self {
        let (w, h) = problem.dims();
        let texture = if cfg.random_init {
            random_texture(problem.clean, &mask.render(w, h), cfg.seed.derive(TEXTURE_STREAM))
        } else {
            TextureLayer::zeros(w, h)
        };
        Self {
            mask,
            texture,
            step: 0,
            lambda1: cfg.lambda1_at(0),
            lambda2: cfg.lambda2_at(0),
        }
    }

    pub fn render(&self) -> MaskGrid {
        let (w, h) = self.texture.dims();
        self.mask.render(w, h)
    }
}

/// `I + t⊙M` without clamping (exact for differentiation).
fn perturbed(clean: &Image, texture: &TextureLayer, grid: &MaskGrid) -> Image {
    let mut img = clean.clone();
    for (p, &m) in grid.values.iter().enumerate() {
        if m != 0.0 {
            for c in 0..3 {
                img.data_mut()[p * 3 + c] += texture.data()[p * 3 + c] * m;
            }
        }
    }
    img
}

/// `J = L_attack + λ₁·L_area` and its gradient with respect to every
/// primitive parameter, with B* weights held fixed.
pub fn mask_objective_grad<D: Detector + ?Sized>(
    state: &AttackState,
    problem: &AttackProblem<'_, D>,
    cfg: &AttackConfig,
) -> Result<(f64, AttackLoss, Vec<PrimitiveGrad>)> {
    let (w, h) = problem.dims();
    let grid = state.mask.render(w, h);
    let img = perturbed(problem.clean, &state.texture, &grid);
    let (_, loss, gimg) = problem.image_gradient(&img, cfg)?;
    let mut upstream = MaskGrid::zeros(w, h);
    let (g, t) = (gimg.data(), state.texture.data());
    for (p, u) in upstream.values.iter_mut().enumerate() {
        *u = g[p * 3] * t[p * 3] + g[p * 3 + 1] * t[p * 3 + 1] + g[p * 3 + 2] * t[p * 3 + 2];
    }
    let mut grads = mask_backward(&state.mask, &upstream);
    for (gr, a) in grads.iter_mut().zip(state.mask.area_loss_grad()) {
        gr.size[0] += state.lambda1 * a[0];
        gr.size[1] += state.lambda1 * a[1];
    }
    let j = loss.value + state.lambda1 * state.mask.area_loss();
    Ok((j, loss, grads))
}

/// `J′ = L_attack + λ₂·‖t‖` and its gradient with respect to the texture.
pub fn texture_objective_grad<D: Detector + ?Sized>(
    state: &AttackState,
    problem: &AttackProblem<'_, D>,
    cfg: &AttackConfig,
) -> Result<(f64, AttackLoss, Image)> {
    let (w, h) = problem.dims();
    let grid = state.mask.render(w, h);
    let img = perturbed(problem.clean, &state.texture, &grid);
    let (_, loss, mut grad) = problem.image_gradient(&img, cfg)?;
    let norm = state.texture.norm();
    let shrink = if norm > 0.0 { state.lambda2 / norm } else { 0.0 };
    let t = state.texture.data();
    for (i, g) in grad.data_mut().iter_mut().enumerate() {
        *g = *g * grid.values[i / 3] + shrink * t[i];
    }
    let j = loss.value + state.lambda2 * norm;
    Ok((j, loss, grad))
}

/// Updates centers and sizes, then weights, with the texture frozen.
pub fn mask_search_step<D: Detector + ?Sized>(
    state: &mut AttackState,
    problem: &AttackProblem<'_, D>,
    cfg: &AttackConfig,
) -> Result<()> {
    if !cfg.region_search {
        return Ok(());
    }
    let (w, h) = problem.dims();
    let (_, _, grads) = mask_objective_grad(state, problem, cfg)?;
    for (p, g) in state.mask.primitives.iter_mut().zip(&grads) {
        for k in 0..2 {
            p.center[k] -= cfg.lr_center * g.center[k];
            p.size[k] -= cfg.lr_size * g.size[k];
        }
    }
    state.mask.project_shape(w, h);

    let (_, _, grads) = mask_objective_grad(state, problem, cfg)?;
    for (p, g) in state.mask.primitives.iter_mut().zip(&grads) {
        p.weight -= cfg.lr_alpha * g.weight;
    }
    state.mask.project_weights();
    Ok(())
}

/// One projected gradient step on the texture with the mask frozen.
pub fn texture_search_step<D: Detector + ?Sized>(
    state: &mut AttackState,
    problem: &AttackProblem<'_, D>,
    cfg: &AttackConfig,
) -> Result<()> {
    let (_, _, grad) = texture_objective_grad(state, problem, cfg)?;
    for (t, g) in state.texture.data_mut().iter_mut().zip(grad.data()) {
        *t -= cfg.lr_texture * g;
    }
    state.texture.project(problem.clean);
    Ok(())
}

/// Losses after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub step: usize,
    pub attack: f64,
    pub area: f64,
    pub texture: f64,
    /// `attack + λ₁·area`.
    pub total: f64,
    /// `attack + λ₂·texture`.
    pub texture_objective: f64,
    pub success: bool,
    /// Raw-detection indices of B*.
    #[serde(skip)]
    pub target_boxes: Vec<usize>,
}

/// CSV with header `step,attack,area,texture,total,texture_objective,success`.
pub fn trace_to_csv(trace: &[LossBreakdown]) -> String {
    let mut out = String::from("step,attack,area,texture,total,texture_objective,success\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            r.step,
            r.attack,
            r.area,
            r.texture,
            r.total,
            r.texture_objective,
            u8::from(r.success)
        );
    }
    out
}

/// Incremental driver of the alternating search; the caller supplies the
/// problem on every call so the session can live next to owned inputs.
#[derive(Debug, Clone)]
pub struct LdapSession {
    cfg: AttackConfig,
    state: AttackState,
    criterion: SuccessCriterion,
    best: Option<AttackState>,
    first_success: Option<usize>,
    trace: Vec<LossBreakdown>,
    last_output: Option<DetectorOutput>,
}

impl LdapSession {
    pub fn new<D: Detector + ?Sized>(problem: &AttackProblem<'_, D>, cfg: AttackConfig) -> Result<Self> {
        cfg.validate()?;
        let state = AttackState::initial(problem, &cfg);
        Ok(Self::from_state(cfg, state))
    }

    /// Starts from `mask` instead of the default layout.
    pub fn with_mask<D: Detector + ?Sized>(
        problem: &AttackProblem<'_, D>,
        cfg: AttackConfig,
        mask: MaskLayer,
    ) -> Result<Self> {
        cfg.validate()?;
        let state = AttackState::with_mask(problem, &cfg, mask);
        Ok(Self::from_state(cfg, state))
    }

    fn from_state(cfg: AttackConfig, state: AttackState) -> Self {
        Self {
            criterion: SuccessCriterion::for_task(cfg.task),
            cfg,
            state,
            best: None,
            first_success: None,
            trace: Vec::new(),
            last_output: None,
        }
    }

    pub fn config(&self) -> &AttackConfig {
        &self.cfg
    }

    pub fn state(&self) -> &AttackState {
        &self.state
    }

    pub fn trace(&self) -> &[LossBreakdown] {
        &self.trace
    }

    pub fn best(&self) -> Option<&AttackState> {
        self.best.as_ref()
    }

    /// Detector output on the patched image after the latest step.
    pub fn last_output(&self) -> Option<&DetectorOutput> {
        self.last_output.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.cfg.max_steps
    }

    /// Runs one full step and judges the result.
    pub fn step<D: Detector + ?Sized>(&mut self, problem: &AttackProblem<'_, D>) -> Result<&LossBreakdown> {
        mask_search_step(&mut self.state, problem, &self.cfg)?;
        texture_search_step(&mut self.state, problem, &self.cfg)?;
        self.state.step += 1;
        self.state.lambda1 = self.cfg.lambda1_at(self.state.step);
        self.state.lambda2 = self.cfg.lambda2_at(self.state.step);

        let grid = self.state.render();
        let (_, adv) = compose_adversarial(problem.clean, &self.state.texture, &grid)?;
        let out = problem.detector.forward(&adv)?;
        let success = is_success(&out, &problem.spec, &self.criterion);
        let loss = attack_loss_directed(&out, &problem.spec, self.cfg.strategy, self.cfg.shift_direction);
        let area = self.state.mask.area_loss();
        let texture = texture_loss(&self.state.texture);

        if success {
            self.first_success.get_or_insert(self.state.step);
            // later iterates win ties
            if self.best.as_ref().map_or(true, |b| area <= b.mask.area_loss()) {
                self.best = Some(self.state.clone());
            }
        }
        self.trace.push(LossBreakdown {
            step: self.state.step,
            attack: loss.value,
            area,
            texture,
            total: loss.value + self.state.lambda1 * area,
            texture_objective: loss.value + self.state.lambda2 * texture,
            success,
            target_boxes: loss.target_boxes,
        });
        self.last_output = Some(out);
        Ok(self.trace.last().expect("just pushed"))
    }

    /// Steps until `max_steps`.
    pub fn run_to_end<D: Detector + ?Sized>(&mut self, problem: &AttackProblem<'_, D>) -> Result<()> {
        while !self.is_done() {
            self.step(problem)?;
        }
        Ok(())
    }

    /// The smallest-area successful iterate, or the current state.
    pub fn result<D: Detector + ?Sized>(&self, problem: &AttackProblem<'_, D>) -> Result<AttackResult> {
        let (state, success) = match &self.best {
            Some(b) => (b, true),
            None => (&self.state, false),
        };
        let grid = state.render();
        let (perturbation, adversarial) = compose_adversarial(problem.clean, &state.texture, &grid)?;
        Ok(AttackResult {
            success,
            adversarial,
            perturbation,
            effective_area: grid.count_above_half(),
            mask: grid,
            primitives: Some(state.mask.clone()),
            patches: Vec::new(),
            area: state.mask.area_loss(),
            steps_to_success: self.first_success,
            returned_step: state.step,
            loss_trace: self.trace.clone(),
        })
    }
}

/// Runs the full alternating search on one image.
pub fn run_ldap<D: Detector + ?Sized>(
    clean: &Image,
    spec: &TargetSpec,
    detector: &D,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    let problem = AttackProblem::new(clean, detector, *spec)?;
    let mut session = LdapSession::new(&problem, cfg.clone())?;
    session.run_to_end(&problem)?;
    session.result(&problem)
}

/// Texture-only search on a fixed primitive mask.
pub fn run_ldap_with_mask<D: Detector + ?Sized>(
    clean: &Image,
    spec: &TargetSpec,
    detector: &D,
    cfg: &AttackConfig,
    mask: MaskLayer,
) -> Result<AttackResult> {
    let problem = AttackProblem::new(clean, detector, *spec)?;
    let cfg = AttackConfig {
        region_search: false,
        ..cfg.clone()
    };
    let mut session = LdapSession::with_mask(&problem, cfg, mask)?;
    session.run_to_end(&problem)?;
    session.result(&problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::weighted_heads;
    use crate::bbox::BBox;
    use crate::detector::{generate_scene, HeadWeight, SceneSpec, ToyDetector, ToyDetectorConfig};
    use crate::mask::RectPrimitive;
    use rand::Rng;

    fn detector() -> ToyDetector {
        ToyDetector::build(ToyDetectorConfig::default()).unwrap()
    }

    fn spec_for(scene: &crate::detector::Scene) -> TargetSpec {
        let t = scene.target();
        TargetSpec {
            target_box: t.bbox,
            target_category: t.category,
            task: Task::Classification,
        }
    }

    /// A state whose primitives never overlap enough to hit the clamp.
    fn random_state(problem: &AttackProblem<'_, ToyDetector>, seed: u64, n: usize) -> AttackState {
        let mut rng = RngSeed(seed).rng();
        let b = problem.spec.target_box;
        let primitives = (0..n)
            .map(|_| {
                RectPrimitive::new(
                    [rng.gen_range(b.x1..b.x2), rng.gen_range(b.y1..b.y2)],
                    [rng.gen_range(3.0..9.0), rng.gen_range(3.0..9.0)],
                    rng.gen_range(0.1..0.33),
                )
            })
            .collect();
        let (w, h) = problem.dims();
        let mut texture = TextureLayer::zeros(w, h);
        for (t, &c) in texture.data_mut().iter_mut().zip(problem.clean.data()) {
            *t = rng.gen_range(0.0..1.0) - c;
        }
        AttackState {
            mask: MaskLayer { primitives },
            texture,
            step: 0,
            lambda1: 0.02,
            lambda2: 0.03,
        }
    }

    fn j_fixed(state: &AttackState, problem: &AttackProblem<'_, ToyDetector>, weights: &[HeadWeight]) -> f64 {
        let (w, h) = problem.dims();
        let img = perturbed(problem.clean, &state.texture, &state.mask.render(w, h));
        let out = problem.detector.forward(&img).unwrap();
        weighted_heads(&out, weights) + state.lambda1 * state.mask.area_loss()
    }

    fn close(fd: f64, an: f64, rel: f64) -> bool {
        (fd - an).abs() <= rel * fd.abs().max(an.abs()).max(1e-6)
    }

    #[test]
    fn lambda_schedule_is_exact() {
        let cfg = AttackConfig::default();
        for k in [0usize, 1, 7, 2000] {
            assert_eq!(cfg.lambda1_at(k), 1e-2 + k as f64 * 1e-4);
            assert_eq!(cfg.lambda2_at(k), 1e-2 + k as f64 * 1e-4);
        }
        let off = AttackConfig {
            texture_constraint: false,
            ..cfg
        };
        assert_eq!(off.lambda2_at(500), 0.0);
        assert_eq!(off.lambda1_at(500), cfg.lambda1_at(500));
    }

    #[test]
    fn session_tracks_lambda_per_step() {
        let det = detector();
        let scene = generate_scene(&SceneSpec::new(2), &det).unwrap();
        let problem = AttackProblem::new(&scene.image, &det, spec_for(&scene)).unwrap();
        let cfg = AttackConfig {
            max_steps: 6,
            ..AttackConfig::default()
        };
        let mut session = LdapSession::new(&problem, cfg.clone()).unwrap();
        for k in 1..=6 {
            session.step(&problem).unwrap();
            assert_eq!(session.state().lambda1, cfg.lambda1 + k as f64 * cfg.delta_lambda);
            assert_eq!(session.state().lambda2, cfg.lambda2 + k as f64 * cfg.delta_lambda);
        }
        assert!(session.is_done());
        assert_eq!(session.trace().len(), 6);
    }

    #[test]
    fn steps_touch_only_their_own_variables() {
        let det = detector();
        let scene = generate_scene(&SceneSpec::new(4), &det).unwrap();
        let problem = AttackProblem::new(&scene.image, &det, spec_for(&scene)).unwrap();
        let cfg = AttackConfig::default();
        let state = random_state(&problem, 11, 3);

        let mut s = state.clone();
        mask_search_step(&mut s, &problem, &cfg).unwrap();
        assert_eq!(s.texture, state.texture);
        assert_ne!(s.mask, state.mask);

        let mut s = state.clone();
        texture_search_step(&mut s, &problem, &cfg).unwrap();
        assert_eq!(s.mask, state.mask);
        assert_ne!(s.texture, state.texture);
    }

    fn empty_problem_image() -> Image {
        Image::filled(64, 64, [0.2, 0.2, 0.2])
    }

    #[test]
    fn area_term_alone_shrinks_sizes() {
        let det = detector();
        let img = empty_problem_image();
        let spec = TargetSpec {
            target_box: BBox::new(20.0, 20.0, 40.0, 40.0),
            target_category: 0,
            task: Task::Classification,
        };
        let problem = AttackProblem::new(&img, &det, spec).unwrap();
        let cfg = AttackConfig::default();
        let mut state = AttackState::initial(&problem, &cfg);
        state.mask.primitives[0].size = [4.0, 6.0];
        let before = state.clone();
        mask_search_step(&mut state, &problem, &cfg).unwrap();
        for (a, b) in state.mask.primitives.iter().zip(&before.mask.primitives) {
            assert_eq!(a.center, b.center);
            assert_eq!(a.weight, b.weight);
            let expect = [
                b.size[0] - cfg.lr_size * cfg.lambda1 * b.size[1],
                b.size[1] - cfg.lr_size * cfg.lambda1 * b.size[0],
            ];
            assert!((a.size[0] - expect[0]).abs() < 1e-12 && (a.size[1] - expect[1]).abs() < 1e-12);
        }

        let zero = AttackConfig {
            lambda1: 0.0,
            ..cfg
        };
        let mut state = AttackState::initial(&problem, &zero);
        let before = state.clone();
        mask_search_step(&mut state, &problem, &zero).unwrap();
        assert_eq!(state, before);
    }

    #[test]
    fn zero_mask_leaves_only_texture_shrinkage() {
        let det = detector();
        let scene = generate_scene(&SceneSpec::new(5), &det).unwrap();
        let problem = AttackProblem::new(&scene.image, &det, spec_for(&scene)).unwrap();
        let cfg = AttackConfig::default();
        let mut state = random_state(&problem, 3, 2);
        for p in &mut state.mask.primitives {
            p.weight = 0.0;
        }
        let t0 = state.texture.clone();
        texture_search_step(&mut state, &problem, &cfg).unwrap();
        let scale = cfg.lr_texture * state.lambda2 / t0.norm();
        let mut expect = t0.clone();
        for v in expect.data_mut() {
            *v -= scale * *v;
        }
        expect.project(problem.clean);
        for (a, b) in state.texture.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mask_step_follows_finite_differences() {
        let det = detector();
        let scene = generate_scene(&SceneSpec::new(7), &det).unwrap();
        let problem = AttackProblem::new(&scene.image, &det, spec_for(&scene)).unwrap();
        let cfg = AttackConfig {
            lr_center: 1e-2,
            lr_size: 1e-2,
            lr_alpha: 1e-2,
            ..AttackConfig::default()
        };
        let state = random_state(&problem, 21, 3);
        let mut after = state.clone();
        mask_search_step(&mut after, &problem, &cfg).unwrap();

        let h = 1e-3;
        let (_, loss, _) = mask_objective_grad(&state, &problem, &cfg).unwrap();
        assert!(!loss.weights.is_empty());
        for (i, p) in state.mask.primitives.iter().enumerate() {
            for k in 0..2 {
                for (field, lr) in [(0, cfg.lr_center), (1, cfg.lr_size)] {
                    let fd = {
                        let mut up = state.clone();
                        let mut down = state.clone();
                        let (u, d) = if field == 0 {
                            (&mut up.mask.primitives[i].center[k], &mut down.mask.primitives[i].center[k])
                        } else {
                            (&mut up.mask.primitives[i].size[k], &mut down.mask.primitives[i].size[k])
                        };
                        *u += h;
                        *d -= h;
                        (j_fixed(&up, &problem, &loss.weights) - j_fixed(&down, &problem, &loss.weights)) / (2.0 * h)
                    };
                    let (old, new) = if field == 0 {
                        (p.center[k], after.mask.primitives[i].center[k])
                    } else {
                        (p.size[k], after.mask.primitives[i].size[k])
                    };
                    let step = (old - new) / lr;
                    assert!(close(fd, step, 1e-3), "primitive {i} field {field} axis {k}: fd {fd} step {step}");
                }
            }
        }

        // weights move at the updated shapes
        let mut mid = after.clone();
        for (m, p) in mid.mask.primitives.iter_mut().zip(&state.mask.primitives) {
            m.weight = p.weight;
        }
        let (_, loss, _) = mask_objective_grad(&mid, &problem, &cfg).unwrap();
        for i in 0..mid.mask.len() {
            let mut up = mid.clone();
            let mut down = mid.clone();
            up.mask.primitives[i].weight += h;
            down.mask.primitives[i].weight -= h;
            let fd = (j_fixed(&up, &problem, &loss.weights) - j_fixed(&down, &problem, &loss.weights)) / (2.0 * h);
            let step = (mid.mask.primitives[i].weight - after.mask.primitives[i].weight) / cfg.lr_alpha;
            assert!(close(fd, step, 1e-3), "weight {i}: fd {fd} step {step}");
        }
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let det = detector();
        let scene = generate_scene(&SceneSpec::new(1), &det).unwrap();
        let spec = spec_for(&scene);
        let cfg = AttackConfig {
            max_steps: 0,
            ..AttackConfig::default()
        };
        let r = run_ldap(&scene.image, &spec, &det, &cfg).unwrap();
        assert!(!r.success);
        assert!(r.loss_trace.is_empty());
        assert_eq!(r.returned_step, 0);
        let problem = AttackProblem::new(&scene.image, &det, spec).unwrap();
        let init = AttackState::initial(&problem, &cfg);
        let (delta, _) = compose_adversarial(&scene.image, &init.texture, &init.render()).unwrap();
        assert_eq!(r.perturbation, delta);
        assert_eq!(r.primitives.as_ref(), Some(&init.mask));
    }

    #[test]
    fn returns_smallest_successful_iterate_deterministically() {
        let det = detector();
        let scene = generate_scene(&SceneSpec::new(2), &det).unwrap();
        let spec = spec_for(&scene);
        let cfg = AttackConfig {
            max_steps: 300,
            ..AttackConfig::default()
        };
        let r = run_ldap(&scene.image, &spec, &det, &cfg).unwrap();
        assert_eq!(r, run_ldap(&scene.image, &spec, &det, &cfg).unwrap());
        assert!(r.success);
        let best = r
            .loss_trace
            .iter()
            .filter(|row| row.success)
            .map(|row| row.area)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.area, best);
        let row = &r.loss_trace[r.returned_step - 1];
        assert!(row.success && row.area == r.area);
        assert!(r.steps_to_success.unwrap() <= r.returned_step);
        assert!(r.adversarial.is_displayable());
    }
}
