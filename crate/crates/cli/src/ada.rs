//! Adversarial detection accuracy: one patch detector per method, trained on
//! that method's adversarial/clean pairs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use patchsearch::eval::patch_detector::{evaluate, featurize, train, LabeledSet, PatchDetectorModel, TrainConfig};
use patchsearch::image::{read_image, Image};
use patchsearch::rng::RngSeed;
use serde::{Deserialize, Serialize};

use crate::manifest::{AdaSplit, RunManifest};
use crate::report::{read_rows, write_report, REPORT_FILE};
use crate::run::{adversarial_path, Workspace};
use crate::suite::write_text;

pub const ADA_CSV_FILE: &str = "ada.csv";
pub const ADA_JSON_FILE: &str = "ada.json";
pub const ADA_CURVE_FILE: &str = "ada_curve.csv";

const SHUFFLE_STREAM: u64 = 0x7368_7566;
/// Label permutations averaged for the shuffled-label control.
pub const SHUFFLE_PERMUTATIONS: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaRow {
    pub method: String,
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub test_pairs: usize,
    pub ada: f64,
    /// Same protocol with training and validation labels permuted, averaged
    /// over `SHUFFLE_PERMUTATIONS` permutations.
    pub shuffled_ada: f64,
    pub validation_accuracy: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub train_pairs: usize,
    pub ada: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaReport {
    pub rows: Vec<AdaRow>,
    pub curve: Vec<CurvePoint>,
}

struct Pairs {
    adversarial: Vec<Image>,
    clean: Vec<Image>,
}

impl Pairs {
    fn slice(&self, r: std::ops::Range<usize>) -> Result<LabeledSet> {
        Ok(LabeledSet::from_pairs(&self.adversarial[r.clone()], &self.clean[r])?)
    }
}

/// Trains on the first `train` pairs, selects on the next `val`, tests on the
/// next `test`; returns the model, test ADA and the shuffled-label ADA.
fn protocol(pairs: &Pairs, split: AdaSplit, train_pairs: usize, seed: RngSeed) -> Result<(PatchDetectorModel, f64, f64)> {
    let tr = pairs.slice(0..train_pairs)?;
    let va = pairs.slice(split.train..split.train + split.val)?;
    let te = pairs.slice(split.train + split.val..split.total())?;
    let cfg = TrainConfig::default();
    let model = train(&tr, &va, seed, &cfg)?;
    let ada = evaluate(&model, &te)?;
    let mut shuffled_ada = 0.0;
    for k in 0..SHUFFLE_PERMUTATIONS {
        let shuffled = train(
            &tr.with_shuffled_labels(seed.derive(SHUFFLE_STREAM + 2 * k)),
            &va.with_shuffled_labels(seed.derive(SHUFFLE_STREAM + 2 * k + 1)),
            seed,
            &cfg,
        )?;
        shuffled_ada += evaluate(&shuffled, &te)?;
    }
    shuffled_ada /= SHUFFLE_PERMUTATIONS as f64;
    Ok((model, ada, shuffled_ada))
}

/// Training-set sizes for the curve: eighths, quarters, halves and all of the
/// training split.
fn curve_sizes(train: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = [train / 8, train / 4, train / 2, train].into_iter().filter(|&n| n > 0).collect();
    sizes.dedup();
    sizes
}

/// Scores the adversarial outputs in `out` for every manifest method.
pub fn cmd_ada(manifest: &RunManifest, out: &Path, with_curve: bool) -> Result<AdaReport> {
    let ws = Workspace::load(manifest)?;
    if let Some((seed, msg)) = ws.unreadable.first() {
        bail!("scene {seed}: {msg}");
    }
    let split = manifest.ada;
    if ws.scenes.len() < split.total() {
        bail!(
            "ADA needs {} scenes ({}/{}/{} pairs), the run has {}",
            split.total(),
            split.train,
            split.val,
            split.test,
            ws.scenes.len()
        );
    }
    let scenes = &ws.scenes[..split.total()];
    let seed = manifest.attack.seed;
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    let mut probabilities: Vec<(String, u64, f64)> = Vec::new();
    for method in &manifest.methods {
        let name = method.name();
        let adversarial = scenes
            .iter()
            .map(|s| {
                let p = adversarial_path(out, name, s.entry.seed);
                read_image(&p).with_context(|| format!("{name}: missing output for scene {}", s.entry.seed))
            })
            .collect::<Result<Vec<_>>>()?;
        let pairs = Pairs {
            adversarial,
            clean: scenes.iter().map(|s| s.clean.clone()).collect(),
        };
        let (model, ada, shuffled_ada) = protocol(&pairs, split, split.train, seed)?;
        for (s, img) in scenes[split.train + split.val..].iter().zip(&pairs.adversarial[split.train + split.val..]) {
            probabilities.push((name.to_string(), s.entry.seed, model.probability(&featurize(img))));
        }
        rows.push(AdaRow {
            method: name.to_string(),
            train_pairs: split.train,
            val_pairs: split.val,
            test_pairs: split.test,
            ada,
            shuffled_ada,
            validation_accuracy: model.validation_accuracy,
            best_epoch: model.best_epoch,
        });
        if with_curve {
            for n in curve_sizes(split.train) {
                let ada = if n == split.train { ada } else { protocol(&pairs, split, n, seed)?.1 };
                curve.push(CurvePoint {
                    method: name.to_string(),
                    train_pairs: n,
                    ada,
                });
            }
        }
    }

    write_text(&out.join(ADA_CSV_FILE), &to_csv(&rows)?)?;
    write_text(&out.join(ADA_JSON_FILE), &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    if with_curve {
        write_text(&out.join(ADA_CURVE_FILE), &to_csv(&curve)?)?;
    }
    annotate_report(out, manifest, &probabilities)?;
    Ok(AdaReport { rows, curve })
}

/// Fills `detector_probability` for test images and refreshes the summary.
fn annotate_report(out: &Path, manifest: &RunManifest, probabilities: &[(String, u64, f64)]) -> Result<()> {
    let path = out.join(REPORT_FILE);
    if !path.exists() {
        return Ok(());
    }
    let mut rows = read_rows(&path)?;
    for r in &mut rows {
        r.detector_probability = probabilities
            .iter()
            .find(|(m, s, _)| *m == r.method && *s == r.seed)
            .map(|p| p.2);
    }
    let mut order: Vec<String> = Vec::new();
    for r in &rows {
        if !order.contains(&r.method) {
            order.push(r.method.clone());
        }
    }
    write_report(out, &rows, &order, manifest.area_threshold)?;
    Ok(())
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn read_ada_json(path: &Path) -> Result<Vec<AdaRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
