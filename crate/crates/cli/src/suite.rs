//! Scene suites on disk: PPM scenes, a ground-truth list and the detector
//! config they were validated against.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use patchsearch::bbox::{iou, BBox};
use patchsearch::detector::{generate_scene, Detector, SceneSpec, ToyDetector, ToyDetectorConfig, TARGET_IOU_GATE};
use patchsearch::image::{read_image, write_image, Image};

pub const DETECTOR_FILE: &str = "detector.cfg";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.txt";
pub const SCENE_LIST_FILE: &str = "scenes.txt";
pub const SCENE_DIR: &str = "scenes";

/// One scene of a suite: its seed and the target object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteEntry {
    pub seed: u64,
    pub target: BBox,
    pub category: usize,
}

pub fn scene_path(suite_dir: &Path, seed: u64) -> PathBuf {
    suite_dir.join(SCENE_DIR).join(format!("scene_{seed}.ppm"))
}

/// Scene specs for seeds `seed..seed + count` with default parameters.
pub fn seed_range(count: usize, seed: u64) -> Result<Vec<SceneSpec>> {
    if count == 0 {
        bail!("count must be at least 1");
    }
    Ok((0..count as u64).map(|i| SceneSpec::new(seed + i)).collect())
}

/// Reads a scene list: one `seed [category=K] [distractor=P] [clutter=K]` per line.
pub fn read_scene_list(path: &Path) -> Result<Vec<SceneSpec>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let specs = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(SceneSpec::parse_line)
        .collect::<patchsearch::Result<Vec<_>>>()?;
    if specs.is_empty() {
        bail!("scene list {} is empty", path.display());
    }
    Ok(specs)
}

fn scene_line(spec: &SceneSpec) -> String {
    let mut line = spec.seed.0.to_string();
    if let Some(c) = spec.category {
        let _ = write!(line, " category={c}");
    }
    let _ = write!(
        line,
        " distractor={} clutter={}",
        spec.distractor_probability, spec.max_clutter
    );
    line
}

/// Generates, writes and re-validates every scene; returns the entries in
/// spec order.
pub fn cmd_gen_suite(specs: &[SceneSpec], detector: &ToyDetectorConfig, out_dir: &Path) -> Result<Vec<SuiteEntry>> {
    if specs.is_empty() {
        bail!("no scenes requested");
    }
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|o| o.seed == s.seed) {
            bail!("scene seed {} listed twice", s.seed.0);
        }
    }
    let det = ToyDetector::build(detector.clone())?;
    fs::create_dir_all(out_dir.join(SCENE_DIR)).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut entries = Vec::with_capacity(specs.len());
    let mut truth = String::from("# seed x1 y1 x2 y2 category\n");
    let mut list = String::from("# seed [category=K] distractor=P clutter=K\n");
    for spec in specs {
        let scene = generate_scene(spec, &det)?;
        let target = scene.target();
        let path = scene_path(out_dir, spec.seed.0);
        write_image(&scene.image, &path)?;
        let reread = read_image(&path)?;
        if !detects(&det, &reread, &target.bbox, target.category)? {
            bail!("scene {}: target not detected after writing", spec.seed.0);
        }
        let b = target.bbox;
        let _ = writeln!(truth, "{} {} {} {} {} {}", spec.seed.0, b.x1, b.y1, b.x2, b.y2, target.category);
        let _ = writeln!(list, "{}", scene_line(spec));
        entries.push(SuiteEntry {
            seed: spec.seed.0,
            target: b,
            category: target.category,
        });
    }
    write_text(&out_dir.join(GROUND_TRUTH_FILE), &truth)?;
    write_text(&out_dir.join(SCENE_LIST_FILE), &list)?;
    write_text(&out_dir.join(DETECTOR_FILE), &detector.to_key_values().to_text())?;
    Ok(entries)
}

/// True when a kept detection of `category` overlaps `target` with IoU ≥ 0.5.
pub fn detects(det: &ToyDetector, img: &Image, target: &BBox, category: usize) -> Result<bool> {
    let out = det.forward(img)?;
    let found = out
        .kept_detections()
        .any(|d| d.best_category() == category && iou(&d.bbox, target) >= TARGET_IOU_GATE);
    Ok(found)
}

pub fn read_ground_truth(suite_dir: &Path) -> Result<Vec<SuiteEntry>> {
    let path = suite_dir.join(GROUND_TRUTH_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = (|| -> Option<SuiteEntry> {
            let [seed, x1, y1, x2, y2, cat] = f[..] else { return None };
            Some(SuiteEntry {
                seed: seed.parse().ok()?,
                target: BBox::new(x1.parse().ok()?, y1.parse().ok()?, x2.parse().ok()?, y2.parse().ok()?),
                category: cat.parse().ok()?,
            })
        })();
        match parsed {
            Some(e) => out.push(e),
            None => bail!("{} line {}: expected `seed x1 y1 x2 y2 category`", path.display(), i + 1),
        }
    }
    if out.is_empty() {
        bail!("{} lists no scenes", path.display());
    }
    Ok(out)
}

/// Suite entries restricted to `seeds` (in that order) when given.
pub fn select(entries: &[SuiteEntry], seeds: Option<&[u64]>) -> Result<Vec<SuiteEntry>> {
    match seeds {
        None => Ok(entries.to_vec()),
        Some(seeds) => seeds
            .iter()
            .map(|s| {
                entries
                    .iter()
                    .find(|e| e.seed == *s)
                    .copied()
                    .with_context(|| format!("seed {s} is not in the suite"))
            })
            .collect(),
    }
}

/// Writes `text` with LF line endings as given.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use patchsearch::detector::ToyDetectorConfig;

    #[test]
    fn suite_round_trips_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let specs = seed_range(3, 5).unwrap();
        let cfg = ToyDetectorConfig::default();
        let entries = cmd_gen_suite(&specs, &cfg, dir.path()).unwrap();
        assert_eq!(entries.iter().map(|e| e.seed).collect::<Vec<_>>(), vec![5, 6, 7]);
        assert_eq!(read_ground_truth(dir.path()).unwrap(), entries);
        assert_eq!(read_scene_list(&dir.path().join(SCENE_LIST_FILE)).unwrap(), specs);
        let det = ToyDetector::build(cfg).unwrap();
        for e in &entries {
            let img = read_image(scene_path(dir.path(), e.seed)).unwrap();
            assert!(detects(&det, &img, &e.target, e.category).unwrap());
        }
    }

    #[test]
    fn rejects_empty_and_duplicate_requests() {
        assert!(seed_range(0, 1).is_err());
        let dir = tempfile::tempdir().unwrap();
        let dup = vec![SceneSpec::new(1u64), SceneSpec::new(1u64)];
        assert!(cmd_gen_suite(&dup, &ToyDetectorConfig::default(), dir.path()).is_err());
    }

    #[test]
    fn selects_seeds_in_order() {
        let e = |seed| SuiteEntry {
            seed,
            target: BBox::new(0.0, 0.0, 1.0, 1.0),
            category: 0,
        };
        let all = vec![e(1), e(2), e(3)];
        assert_eq!(select(&all, Some(&[3, 1])).unwrap(), vec![e(3), e(1)]);
        assert!(select(&all, Some(&[9])).is_err());
    }
}
