//! Attack execution: per-scene jobs on a worker pool, per-image artifacts and
//! the aggregate report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use patchsearch::attack::{
    run_fixed_baseline, run_ldap, trace_to_csv, AttackConfig, AttackResult, BaselineConfig, Placement,
};
use patchsearch::detector::{TargetSpec, ToyDetector};
use patchsearch::eval::{texture_distance, ImageRow};
use patchsearch::image::{read_image, write_image, Image};
use patchsearch::mask::fmt_sig9;
use rayon::prelude::*;

use crate::manifest::{Method, RunManifest};
use crate::report::{write_report, Summary};
use crate::suite::{read_ground_truth, scene_path, select, write_text, SuiteEntry};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const ERRORS_FILE: &str = "errors.txt";

/// A loaded scene ready to attack.
pub struct SceneInput {
    pub entry: SuiteEntry,
    pub clean: Image,
}

impl SceneInput {
    pub fn spec(&self, cfg: &AttackConfig) -> TargetSpec {
        TargetSpec {
            target_box: self.entry.target,
            target_category: self.entry.category,
            task: cfg.task,
        }
    }
}

/// Everything a batch command needs from the manifest, loaded once.
pub struct Workspace {
    pub manifest: RunManifest,
    pub detector: ToyDetector,
    pub scenes: Vec<SceneInput>,
    /// Suite scenes whose image could not be read, with the reason.
    pub unreadable: Vec<(u64, String)>,
}

impl Workspace {
    /// Loads the suite; unreadable scenes are set aside rather than failing the run.
    pub fn load(manifest: &RunManifest) -> Result<Self> {
        let entries = read_ground_truth(&manifest.suite_dir)?;
        let entries = select(&entries, manifest.seeds.as_deref())?;
        let mut scenes = Vec::new();
        let mut unreadable = Vec::new();
        for entry in entries {
            match read_image(scene_path(&manifest.suite_dir, entry.seed)) {
                Ok(clean) => scenes.push(SceneInput { entry, clean }),
                Err(e) => unreadable.push((entry.seed, e.to_string())),
            }
        }
        Ok(Self {
            manifest: manifest.clone(),
            detector: ToyDetector::build(manifest.detector.clone())?,
            scenes,
            unreadable,
        })
    }

    /// One error per method for every unreadable scene.
    pub(crate) fn load_errors(&self, methods: &[String]) -> Vec<JobError> {
        methods
            .iter()
            .flat_map(|m| {
                self.unreadable.iter().map(move |(seed, msg)| JobError {
                    method: m.clone(),
                    seed: *seed,
                    message: msg.clone(),
                })
            })
            .collect()
    }
}

/// A job that failed with an error (as opposed to an unsuccessful attack).
#[derive(Debug, Clone, PartialEq)]
pub struct JobError {
    pub method: String,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<ImageRow>,
    pub summary: Summary,
    pub errors: Vec<JobError>,
}

/// Runs `f` over `0..n` on a pool of `jobs` threads (all cores when `None`),
/// returning results in index order.
pub fn run_pool<T: Send>(n: usize, jobs: Option<usize>, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

pub fn run_method(method: Method, scene: &SceneInput, detector: &ToyDetector, cfg: &AttackConfig) -> Result<AttackResult> {
    let spec = scene.spec(cfg);
    Ok(match method {
        Method::Ldap => run_ldap(&scene.clean, &spec, detector, cfg)?,
        Method::Fixed(p) => run_fixed_baseline(&scene.clean, &spec, detector, p, &BaselineConfig::from_attack(cfg))?,
    })
}

/// Runs the LDAP losses on a frozen AdvPatch-center layout.
pub fn run_fixed_region(scene: &SceneInput, detector: &ToyDetector, cfg: &AttackConfig) -> Result<AttackResult> {
    let bc = BaselineConfig {
        texture_penalty: Some((cfg.lambda2, cfg.delta_lambda)),
        ..BaselineConfig::from_attack(cfg)
    };
    Ok(run_fixed_baseline(&scene.clean, &scene.spec(cfg), detector, Placement::AdvPatchCenter, &bc)?)
}

pub fn image_row(method: &str, scene: &SceneInput, r: &AttackResult) -> Result<ImageRow> {
    let object_area = scene.entry.target.area();
    Ok(ImageRow {
        method: method.to_string(),
        seed: scene.entry.seed,
        success: r.success,
        area: r.area,
        object_area,
        area_ratio: r.area / object_area,
        effective_area_ratio: r.effective_area as f64 / object_area,
        texture_distance: texture_distance(&r.adversarial, &scene.clean)?,
        steps_to_success: r.steps_to_success,
        detector_probability: None,
    })
}

/// Primitive record for primitive masks, otherwise one `x1 y1 x2 y2` line per rectangle.
pub fn mask_record(r: &AttackResult) -> String {
    if let Some(p) = &r.primitives {
        return p.to_record();
    }
    let mut out = String::from("# x1 y1 x2 y2\n");
    for b in &r.patches {
        let _ = writeln!(out, "{} {} {} {}", fmt_sig9(b.x1), fmt_sig9(b.y1), fmt_sig9(b.x2), fmt_sig9(b.y2));
    }
    out
}

/// Writes `<out>/<method>/scene_<seed>.{ppm,mask,trace.csv}`.
pub fn write_artifacts(out: &Path, method: &str, seed: u64, r: &AttackResult) -> Result<()> {
    let dir = out.join(method);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_image(&r.adversarial, dir.join(format!("scene_{seed}.ppm")))?;
    write_text(&dir.join(format!("scene_{seed}.mask")), &mask_record(r))?;
    write_text(&dir.join(format!("scene_{seed}.trace.csv")), &trace_to_csv(&r.loss_trace))
}

pub fn adversarial_path(out: &Path, method: &str, seed: u64) -> std::path::PathBuf {
    out.join(method).join(format!("scene_{seed}.ppm"))
}

pub(crate) fn prepare_out(out: &Path, manifest: &RunManifest) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join(MANIFEST_FILE), &manifest.to_key_values().to_text())
}

/// Writes `errors.txt` when there are errors and removes a stale one otherwise.
pub(crate) fn write_errors(out: &Path, errors: &[JobError]) -> Result<()> {
    let path = out.join(ERRORS_FILE);
    if errors.is_empty() {
        if path.exists() {
            fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
        }
        return Ok(());
    }
    let text: String = errors
        .iter()
        .map(|e| format!("{} {}: {}\n", e.method, e.seed, e.message.replace('\n', " ")))
        .collect();
    write_text(&path, &text)
}

/// Attacks every scene with every manifest method and writes the report.
pub fn cmd_attack(manifest: &RunManifest, out: &Path, jobs: Option<usize>) -> Result<RunOutcome> {
    let ws = Workspace::load(manifest)?;
    prepare_out(out, manifest)?;
    let n_scenes = ws.scenes.len();
    let tasks: Vec<(Method, usize)> = manifest
        .methods
        .iter()
        .flat_map(|&m| (0..n_scenes).map(move |i| (m, i)))
        .collect();
    let results = run_pool(tasks.len(), jobs, |k| {
        let (method, i) = tasks[k];
        let scene = &ws.scenes[i];
        let res = run_method(method, scene, &ws.detector, &manifest.attack).and_then(|r| {
            write_artifacts(out, method.name(), scene.entry.seed, &r)?;
            image_row(method.name(), scene, &r)
        });
        log_job(method.name(), scene.entry.seed, &res);
        res
    })?;

    let order: Vec<String> = manifest.methods.iter().map(|m| m.name().to_string()).collect();
    let mut rows = Vec::new();
    let mut errors = ws.load_errors(&order);
    for ((method, i), res) in tasks.iter().zip(results) {
        match res {
            Ok(row) => rows.push(row),
            Err(e) => errors.push(JobError {
                method: method.name().to_string(),
                seed: ws.scenes[*i].entry.seed,
                message: format!("{e:#}"),
            }),
        }
    }
    let summary = write_report(out, &rows, &order, manifest.area_threshold)?;
    write_errors(out, &errors)?;
    Ok(RunOutcome { rows, summary, errors })
}

pub(crate) fn log_job<T>(method: &str, seed: u64, res: &Result<T>) {
    match res {
        Ok(_) => eprintln!("done {method} scene {seed}"),
        Err(e) => eprintln!("error {method} scene {seed}: {e:#}"),
    }
}
