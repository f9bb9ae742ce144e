//! Ablations of the primitive search: primitive count, loss strategy, frozen
//! region, and no texture penalty.

use std::path::Path;

use anyhow::{bail, Result};
use patchsearch::attack::{run_ldap, run_ldap_with_mask, AttackConfig, AttackResult, Strategy};
use patchsearch::eval::ImageRow;

use crate::manifest::RunManifest;
use crate::report::{write_report, Summary};
use crate::run::{
    image_row, log_job, prepare_out, run_fixed_region, run_pool, write_artifacts, write_errors, JobError, RunOutcome,
    SceneInput, Workspace,
};
use crate::suite::write_text;

pub const ABLATION_FILE: &str = "ablation.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Primitives,
    Strategy,
    NoRegionSearch,
    NoTextureConstraint,
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "primitives" => Ok(Axis::Primitives),
            "strategy" => Ok(Axis::Strategy),
            "no_region_search" => Ok(Axis::NoRegionSearch),
            "no_texture_constraint" => Ok(Axis::NoTextureConstraint),
            other => Err(format!(
                "unknown axis `{other}` (expected primitives, strategy, no_region_search or no_texture_constraint)"
            )),
        }
    }
}

pub const PRIMITIVE_COUNTS: [usize; 3] = [5, 10, 15];
pub const STRATEGIES: [Strategy; 3] = [Strategy::Soft, Strategy::MaxConfidence, Strategy::Equal];

enum Variant {
    Ldap(AttackConfig),
    FixedRegion,
    /// Texture-only search without the texture penalty on the mask the
    /// `Ldap` variant at `source` returned.
    NoTexturePenalty { source: usize },
}

fn variants(axis: Axis, base: &AttackConfig) -> Vec<(String, Variant)> {
    let ldap = |f: &dyn Fn(&mut AttackConfig)| {
        let mut c = base.clone();
        f(&mut c);
        Variant::Ldap(c)
    };
    match axis {
        Axis::Primitives => PRIMITIVE_COUNTS
            .iter()
            .map(|&n| (format!("ldap_n{n}"), ldap(&|c| c.n_primitives = n)))
            .collect(),
        Axis::Strategy => STRATEGIES
            .iter()
            .map(|&s| (format!("ldap_{s}"), ldap(&|c| c.strategy = s)))
            .collect(),
        Axis::NoRegionSearch => vec![
            ("ldap".into(), ldap(&|_| {})),
            ("no_region_search".into(), Variant::FixedRegion),
        ],
        Axis::NoTextureConstraint => vec![
            ("ldap".into(), ldap(&|_| {})),
            ("no_texture_constraint".into(), Variant::NoTexturePenalty { source: 0 }),
        ],
    }
}

fn run_scene(
    variants: &[(String, Variant)],
    scene: &SceneInput,
    ws: &Workspace,
    out: &Path,
) -> Vec<Result<ImageRow>> {
    let base = &ws.manifest.attack;
    let mut results: Vec<Option<AttackResult>> = Vec::with_capacity(variants.len());
    let mut rows = Vec::with_capacity(variants.len());
    for (name, v) in variants {
        let res = match v {
            Variant::Ldap(cfg) => run_ldap(&scene.clean, &scene.spec(cfg), &ws.detector, cfg).map_err(Into::into),
            Variant::FixedRegion => run_fixed_region(scene, &ws.detector, base),
            Variant::NoTexturePenalty { source } => match results[*source].as_ref().and_then(|r| r.primitives.clone()) {
                Some(mask) => {
                    let cfg = AttackConfig {
                        texture_constraint: false,
                        ..base.clone()
                    };
                    run_ldap_with_mask(&scene.clean, &scene.spec(&cfg), &ws.detector, &cfg, mask).map_err(Into::into)
                }
                None => Err(anyhow::anyhow!("source variant `{}` failed", variants[*source].0)),
            },
        };
        let row = res.as_ref().map_err(|e| anyhow::anyhow!("{e:#}")).and_then(|r| {
            write_artifacts(out, name, scene.entry.seed, r)?;
            image_row(name, scene, r)
        });
        log_job(name, scene.entry.seed, &row);
        results.push(res.ok());
        rows.push(row);
    }
    rows
}

/// Runs every variant of `axis` on the manifest's suite and writes a
/// side-by-side table.
pub fn cmd_ablate(manifest: &RunManifest, axis: Axis, out: &Path, jobs: Option<usize>) -> Result<RunOutcome> {
    let ws = Workspace::load(manifest)?;
    let variants = variants(axis, &manifest.attack);
    if variants.is_empty() {
        bail!("no variants");
    }
    prepare_out(out, manifest)?;
    let per_scene = run_pool(ws.scenes.len(), jobs, |i| run_scene(&variants, &ws.scenes[i], &ws, out))?;

    let order: Vec<String> = variants.iter().map(|(n, _)| n.clone()).collect();
    let mut rows = Vec::new();
    let mut errors = ws.load_errors(&order);
    for (v, (name, _)) in variants.iter().enumerate() {
        for (i, scene_rows) in per_scene.iter().enumerate() {
            match &scene_rows[v] {
                Ok(r) => rows.push(r.clone()),
                Err(e) => errors.push(JobError {
                    method: name.clone(),
                    seed: ws.scenes[i].entry.seed,
                    message: format!("{e:#}"),
                }),
            }
        }
    }
    let summary = write_report(out, &rows, &order, manifest.area_threshold)?;
    write_text(&out.join(ABLATION_FILE), &ablation_csv(&summary))?;
    write_errors(out, &errors)?;
    Ok(RunOutcome { rows, summary, errors })
}

fn ablation_csv(summary: &Summary) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut out = String::from("variant,images,successes,success_rate,asr,mar,effective_mar,texture_distance,texture_distance_success\n");
    for m in &summary.methods {
        out += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            m.method,
            m.images,
            m.successes,
            m.success_rate,
            m.asr,
            opt(m.mar),
            opt(m.effective_mar),
            m.texture_distance,
            opt(m.texture_distance_success)
        );
    }
    out
}
