//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use patchsearch::attack::{
    attack_loss, mask_objective_grad, mask_search_step, run_ldap, texture_objective_grad, texture_search_step,
    weighted_heads, AttackConfig, AttackProblem, AttackState, LdapSession, Strategy,
};
use patchsearch::bbox::BBox;
use patchsearch::detector::{
    generate_scene, Detection, Detector, DetectorOutput, HeadWeight, SceneSpec, TargetSpec, Task, ToyDetector,
    ToyDetectorConfig,
};
use patchsearch::eval::{max_correct_iou, ImageRow, MetricsReport};
use patchsearch::image::{read_image, Image};
use patchsearch::mask::{phi, MaskLayer, RectPrimitive, TextureLayer};
use patchsearch::rng::RngSeed;
use patchsearch_cli::{
    cmd_ablate, cmd_ada, cmd_attack, cmd_gen_suite, seed_range, Axis, Method, RunManifest, RunOutcome, Summary,
};
use rand::Rng;

const FD_STEP: f64 = 1e-3;
const PINNED: std::ops::RangeInclusive<u64> = 1..=20;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn detector() -> ToyDetector {
    ToyDetector::build(ToyDetectorConfig::default()).unwrap()
}

fn target_spec(det: &ToyDetector, seed: u64, task: Task) -> (Image, TargetSpec) {
    let scene = generate_scene(&SceneSpec::new(seed), det).unwrap();
    let t = scene.target();
    (
        scene.image,
        TargetSpec {
            target_box: t.bbox,
            target_category: t.category,
            task,
        },
    )
}

// ---------------------------------------------------------------- criterion 1

/// `(J, J′)` evaluated from scratch: render, compose, forward, weighted heads.
fn objectives(state: &AttackState, problem: &AttackProblem<'_, ToyDetector>, weights: &[HeadWeight]) -> (f64, f64) {
    let (w, h) = problem.clean.dims();
    let mut img = problem.clean.clone();
    for y in 0..h {
        for x in 0..w {
            let pt = [x as f64 + 0.5, y as f64 + 0.5];
            let m: f64 = state.mask.primitives.iter().map(|p| p.weight * p.eval(pt)).sum::<f64>().clamp(0.0, 1.0);
            for c in 0..3 {
                let i = (y * w + x) * 3 + c;
                img.data_mut()[i] += state.texture.data()[i] * m;
            }
        }
    }
    let attack = weighted_heads(&problem.detector.forward(&img).unwrap(), weights);
    let texture_norm = state.texture.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    let area: f64 = state.mask.primitives.iter().map(|p| p.size[0] * p.size[1]).sum();
    (attack + state.lambda1 * area, attack + state.lambda2 * texture_norm)
}

/// Some pixel center sits within 2·step of an edge-profile branch point when
/// `center` or `size` moves by up to 2·step.
fn near_branch(center: f64, size: f64, len: usize) -> bool {
    (0..len).any(|i| {
        let d = (i as f64 + 0.5 - center).abs();
        [0.25, 0.75]
            .iter()
            .any(|&f| (d - f * size).abs() < 2.0 * FD_STEP || (size - d / f).abs() < 2.0 * FD_STEP)
    })
}

fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6)
}

fn criterion_gradients(det: &ToyDetector) -> Verdict {
    let start = Instant::now();
    let (mut worst_mask, mut worst_tex, mut checked, mut skipped) = (0.0f64, 0.0f64, 0usize, 0usize);
    for config in 0..50u64 {
        let mut rng = RngSeed(0xacce_0000 + config).rng();
        let task = if config % 2 == 0 { Task::Classification } else { Task::Localization };
        let (clean, spec) = target_spec(det, rng.gen_range(1..=200), task);
        let problem = AttackProblem::new(&clean, det, spec).unwrap();
        let b = spec.target_box;
        let primitives = (0..3)
            .map(|_| {
                RectPrimitive::new(
                    [rng.gen_range(b.x1..b.x2), rng.gen_range(b.y1..b.y2)],
                    [rng.gen_range(2.0..12.0), rng.gen_range(2.0..12.0)],
                    rng.gen_range(0.05..0.33),
                )
            })
            .collect();
        let mut texture = TextureLayer::zeros(64, 64);
        for (v, &c) in texture.data_mut().iter_mut().zip(clean.data()) {
            *v = rng.gen_range(0.0..1.0) - c;
        }
        let state = AttackState {
            mask: MaskLayer::new(primitives),
            texture,
            step: 0,
            lambda1: rng.gen_range(0.0..0.2),
            lambda2: rng.gen_range(0.0..0.2),
        };
        let cfg = AttackConfig {
            task,
            ..AttackConfig::default()
        };

        let (_, loss, grads) = mask_objective_grad(&state, &problem, &cfg).unwrap();
        let fd = |f: &dyn Fn(&mut AttackState, f64)| {
            let (mut up, mut down) = (state.clone(), state.clone());
            f(&mut up, FD_STEP);
            f(&mut down, -FD_STEP);
            (objectives(&up, &problem, &loss.weights).0 - objectives(&down, &problem, &loss.weights).0) / (2.0 * FD_STEP)
        };
        for i in 0..3 {
            let p = state.mask.primitives[i];
            for k in 0..2 {
                if near_branch(p.center[k], p.size[k], 64) {
                    skipped += 2;
                    continue;
                }
                let c = fd(&|s, h| s.mask.primitives[i].center[k] += h);
                let z = fd(&|s, h| s.mask.primitives[i].size[k] += h);
                worst_mask = worst_mask.max(rel_err(c, grads[i].center[k])).max(rel_err(z, grads[i].size[k]));
                checked += 2;
            }
            let a = fd(&|s, h| s.mask.primitives[i].weight += h);
            worst_mask = worst_mask.max(rel_err(a, grads[i].weight));
            checked += 1;
        }

        let (_, loss, tgrad) = texture_objective_grad(&state, &problem, &cfg).unwrap();
        for _ in 0..20 {
            let idx = rng.gen_range(0..tgrad.data().len());
            let (mut up, mut down) = (state.clone(), state.clone());
            up.texture.data_mut()[idx] += FD_STEP;
            down.texture.data_mut()[idx] -= FD_STEP;
            let fd = (objectives(&up, &problem, &loss.weights).1 - objectives(&down, &problem, &loss.weights).1)
                / (2.0 * FD_STEP);
            worst_tex = worst_tex.max(rel_err(fd, tgrad.data()[idx]));
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        name: "gradient oracle",
        pass: worst_mask < 1e-4 && worst_tex < 1e-3 && secs < 120.0,
        detail: format!(
            "50 configs, {checked} checks ({skipped} near branch skipped), worst mask rel err {worst_mask:.2e}, worst texture rel err {worst_tex:.2e}, {secs:.1}s"
        ),
    }
}

// ---------------------------------------------------------------- criterion 2

fn criterion_geometry() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    check(phi(0.0) == 1.0, "phi(0)".into());
    check((phi(PI) - 0.5).abs() < 1e-15, "phi(pi)".into());
    check(phi(1.5 * PI).abs() < 1e-15 && phi(-1.5 * PI).abs() < 1e-15, "phi(±3π/2)".into());

    let mut rng = RngSeed(0x6e0).rng();
    let mut worst_area = 0.0f64;
    for _ in 0..200 {
        let size = [rng.gen_range(10.0..30.0), rng.gen_range(10.0..30.0)];
        let center = [rng.gen_range(20.0..44.0), rng.gen_range(20.0..44.0)];
        let p = RectPrimitive::new(center, size, 1.0);
        // plateau and support boxes
        for _ in 0..20 {
            let f = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let inside = [center[0] + f[0] * size[0] / 4.0, center[1] + f[1] * size[1] / 4.0];
            check(p.eval(inside) == 1.0, format!("plateau {inside:?} of {p:?}"));
            let axis = rng.gen_range(0..2);
            let mut outside = inside;
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            outside[axis] = center[axis] + sign * size[axis] * rng.gen_range(0.75..1.5);
            check(p.eval(outside) == 0.0, format!("support {outside:?} of {p:?}"));
        }
        // clamp
        let heavy = MaskLayer::new(vec![
            RectPrimitive::new(center, size, rng.gen_range(0.6..1.0)),
            RectPrimitive::new(center, size, rng.gen_range(0.6..1.0)),
        ]);
        let grid = heavy.render(64, 64);
        check(grid.values.iter().all(|&v| (0.0..=1.0).contains(&v)), "clamp".into());
        check(grid.values.iter().any(|&v| v == 1.0), "clamp saturates".into());
        // translation equivariance under integer shifts
        let (dx, dy) = (rng.gen_range(-8i64..=8), rng.gen_range(-8i64..=8));
        let moved = MaskLayer::new(vec![RectPrimitive::new(
            [center[0] + dx as f64, center[1] + dy as f64],
            size,
            0.7,
        )])
        .render(96, 96);
        let base = MaskLayer::new(vec![RectPrimitive::new(center, size, 0.7)]).render(96, 96);
        let mut equal = true;
        for y in 16..80i64 {
            for x in 16..80i64 {
                let a = base.values[(y * 96 + x) as usize];
                let b = moved.values[((y + dy) * 96 + x + dx) as usize];
                equal &= (a - b).abs() < 1e-12;
            }
        }
        check(equal, format!("translation by ({dx},{dy})"));
        // half-level area
        let a = MaskLayer::new(vec![p]).half_level_area(64, 64) as f64;
        let rel = (a - p.area()).abs() / p.area();
        worst_area = worst_area.max(rel);
        check(rel <= 0.10, format!("half-level area {a} vs {}", p.area()));
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        name: "mask geometry",
        pass: failures.is_empty(),
        detail: format!(
            "{} failures{}, worst half-level area deviation {:.1}%, {secs:.2}s",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default(),
            100.0 * worst_area
        ),
    }
}

// ---------------------------------------------------------------- criterion 3

fn criterion_losses() -> Verdict {
    let bt = BBox::new(10.0, 10.0, 30.0, 30.0);
    let det = |b: BBox, s: f64, off: f64| Detection {
        bbox: b,
        category_scores: vec![s, 0.1],
        offset_x: off,
    };
    // 20-wide boxes offset by 5 px: IoU 15/25 = 0.6
    let shifted = bt.translated(5.0, 0.0);
    let two = DetectorOutput {
        raw: vec![det(bt, 0.9, 0.2), det(shifted, 0.5, -0.1), det(bt.translated(20.0, 0.0), 0.95, 0.4)],
        kept: vec![0],
    };
    let spec = |task| TargetSpec {
        target_box: bt,
        target_category: 0,
        task,
    };
    let cls = spec(Task::Classification);
    let loc = spec(Task::Localization);
    let mut checks: Vec<(&str, f64, f64)> = vec![
        ("soft cls", attack_loss(&two, &cls, Strategy::Soft).value, 1.0 * 0.9 + 0.6 * 0.5),
        ("ae cls", attack_loss(&two, &cls, Strategy::Equal).value, (0.9 + 0.5) / 2.0),
        ("a1 cls", attack_loss(&two, &cls, Strategy::MaxConfidence).value, 0.9),
        ("soft loc", attack_loss(&two, &loc, Strategy::Soft).value, -(1.0 * 0.2 + 0.6 * -0.1)),
        ("ae loc", attack_loss(&two, &loc, Strategy::Equal).value, -(0.2 - 0.1) / 2.0),
        ("a1 loc", attack_loss(&two, &loc, Strategy::MaxConfidence).value, -0.2),
    ];
    let single = DetectorOutput {
        raw: vec![det(bt, 0.7, 0.3), det(bt.translated(25.0, 0.0), 0.99, 0.0)],
        kept: vec![],
    };
    for (name, s) in [("singleton cls", &cls), ("singleton loc", &loc)] {
        let soft = attack_loss(&single, s, Strategy::Soft);
        for other in [Strategy::Equal, Strategy::MaxConfidence] {
            let o = attack_loss(&single, s, other);
            checks.push((name, o.value, soft.value));
            checks.push((name, (o.weights == soft.weights) as u8 as f64, 1.0));
        }
    }
    let empty = DetectorOutput {
        raw: vec![det(bt, 0.2, 0.5), det(bt.translated(30.0, 0.0), 0.9, 0.5)],
        kept: vec![],
    };
    for s in [&cls, &loc] {
        for st in [Strategy::Soft, Strategy::Equal, Strategy::MaxConfidence] {
            checks.push(("empty B*", attack_loss(&empty, s, st).value, 0.0));
        }
    }
    let bad: Vec<_> = checks.iter().filter(|(_, a, b)| (a - b).abs() > 1e-12).collect();
    Verdict {
        name: "loss definitions",
        pass: bad.is_empty(),
        detail: format!(
            "{} of {} exact checks hold{}",
            checks.len() - bad.len(),
            checks.len(),
            bad.first().map(|b| format!(" (first failure: {} {} vs {})", b.0, b.1, b.2)).unwrap_or_default()
        ),
    }
}

// ---------------------------------------------------------------- criterion 4

fn criterion_schedule(det: &ToyDetector) -> Verdict {
    let cfg = AttackConfig::default();
    let mut failures = Vec::new();
    if cfg.max_steps != 2000 || cfg.delta_lambda != 1e-4 {
        failures.push(format!("defaults max_steps {} delta {}", cfg.max_steps, cfg.delta_lambda));
    }
    let (clean, spec) = target_spec(det, 1, Task::Classification);
    let problem = AttackProblem::new(&clean, det, spec).unwrap();

    // alternation: each half-step touches only its own variables
    let mut s = AttackState::initial(&problem, &cfg);
    for _ in 0..5 {
        let before = s.clone();
        mask_search_step(&mut s, &problem, &cfg).unwrap();
        if s.texture != before.texture {
            failures.push("mask step changed texture".into());
        }
        let mid = s.clone();
        texture_search_step(&mut s, &problem, &cfg).unwrap();
        if s.mask != mid.mask {
            failures.push("texture step changed mask".into());
        }
    }

    let mut session = LdapSession::new(&problem, cfg.clone()).unwrap();
    let (mut l1, mut l2) = (session.state().lambda1, session.state().lambda2);
    let mut worst_increment = 0.0f64;
    while !session.is_done() {
        session.step(&problem).unwrap();
        let k = session.state().step as f64;
        let st = session.state();
        if st.lambda1 != cfg.lambda1 + k * cfg.delta_lambda || st.lambda2 != cfg.lambda2 + k * cfg.delta_lambda {
            failures.push(format!("lambda at step {k}"));
        }
        worst_increment = worst_increment
            .max((st.lambda1 - l1 - 1e-4).abs())
            .max((st.lambda2 - l2 - 1e-4).abs());
        (l1, l2) = (st.lambda1, st.lambda2);
    }
    if session.trace().len() != 2000 {
        failures.push(format!("{} steps run", session.trace().len()));
    }
    Verdict {
        name: "search schedule",
        pass: failures.is_empty() && worst_increment < 1e-15,
        detail: format!(
            "{} steps, final lambda {:.4}, worst increment error {worst_increment:.1e}{}",
            session.trace().len(),
            l1,
            failures.first().map(|f| format!(", first failure: {f}")).unwrap_or_default()
        ),
    }
}

// ---------------------------------------------------------- batch criteria

fn write_manifest(dir: &Path, name: &str, suite: &Path, body: &str) -> RunManifest {
    let path = dir.join(name);
    fs::write(&path, format!("suite = {}\n{body}", suite.display())).unwrap();
    RunManifest::load(&path).unwrap()
}

fn rows_for(rows: &[ImageRow], method: &str, seeds: &std::ops::RangeInclusive<u64>) -> Vec<ImageRow> {
    rows.iter()
        .filter(|r| r.method == method && seeds.contains(&r.seed))
        .cloned()
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

fn criterion_classification(det: &ToyDetector, suite: &Path, run: &RunOutcome) -> Verdict {
    let threshold = run.summary.area_threshold;
    let report = |m: &str| MetricsReport::from_rows(m, &rows_for(&run.rows, m, &PINNED), threshold).unwrap();
    let ldap = report("ldap");

    // single-threaded LDAP timing on the pinned suite, cross-checked against the batch rows
    let start = Instant::now();
    let mut same = true;
    let cfg = AttackConfig::default();
    for seed in PINNED {
        let clean = read_image(suite.join(format!("scenes/scene_{seed}.ppm"))).unwrap();
        let (_, spec) = target_spec(det, seed, Task::Classification);
        let r = run_ldap(&clean, &spec, det, &cfg).unwrap();
        let row = run.rows.iter().find(|x| x.method == "ldap" && x.seed == seed).unwrap();
        same &= r.success == row.success && r.area == row.area;
    }
    let secs = start.elapsed().as_secs_f64();

    let mut ok = ldap.success_rate >= 0.8 && same && secs < 900.0;
    let mut parts = vec![format!("ldap success {:.2} mar {}", ldap.success_rate, fmt_opt(ldap.mar))];
    for p in Method::all().into_iter().skip(1) {
        let b = report(p.name());
        let beats = match (ldap.mar, b.mar) {
            (Some(l), Some(bm)) => ldap.success_rate >= b.success_rate && l < bm,
            (Some(_), None) => true,
            _ => false,
        };
        ok &= beats;
        parts.push(format!("{} {:.2}/{}", b.method, b.success_rate, fmt_opt(b.mar)));
    }
    parts.push(format!("ldap {secs:.0}s single-threaded"));
    Verdict {
        name: "classification attack",
        pass: ok,
        detail: parts.join(", "),
    }
}

fn criterion_localization(det: &ToyDetector, dir: &Path, suite: &Path) -> Verdict {
    let manifest = write_manifest(dir, "loc.cfg", suite, "seeds = 1-20\nmethods = ldap\ntask = loc\n");
    let out = dir.join("loc");
    let run = cmd_attack(&manifest, &out, Some(1)).unwrap();
    let summary = run.summary.method("ldap").unwrap();
    // independent recheck on the written images
    let mut below = 0;
    for row in &run.rows {
        let img = read_image(out.join(format!("ldap/scene_{}.ppm", row.seed))).unwrap();
        let (_, spec) = target_spec(det, row.seed, Task::Localization);
        if max_correct_iou(&det.forward(&img).unwrap(), &spec) < 0.5 {
            below += 1;
        }
    }
    let rate = below as f64 / run.rows.len() as f64;
    Verdict {
        name: "localization attack",
        pass: summary.success_rate >= 0.6 && rate >= 0.6 && run.errors.is_empty(),
        detail: format!(
            "max correct IoU < 0.5 on {:.0}% of scenes ({:.0}% rechecked on written images), mar {}",
            100.0 * summary.success_rate,
            100.0 * rate,
            fmt_opt(summary.mar)
        ),
    }
}

fn criterion_strategy(dir: &Path, suite: &Path) -> Verdict {
    let manifest = write_manifest(dir, "strategy.cfg", suite, "seeds = 1-20\n");
    let run = cmd_ablate(&manifest, Axis::Strategy, &dir.join("strategy"), Some(1)).unwrap();
    let mar = |m: &str| run.summary.method(m).and_then(|r| r.mar);
    let (soft, a1, ae) = (mar("ldap_soft"), mar("ldap_a1"), mar("ldap_ae"));
    let pass = match (soft, ae, a1) {
        (Some(s), Some(e), Some(a)) => s <= e && e <= a,
        _ => false,
    };
    let rate = |m: &str| run.summary.method(m).map_or(0.0, |r| r.success_rate);
    Verdict {
        name: "strategy ordering",
        pass,
        detail: format!(
            "mar soft {} ({:.2}), ae {} ({:.2}), a1 {} ({:.2})",
            fmt_opt(soft),
            rate("ldap_soft"),
            fmt_opt(ae),
            rate("ldap_ae"),
            fmt_opt(a1),
            rate("ldap_a1")
        ),
    }
}

fn criterion_region_texture(dir: &Path, suite: &Path) -> Verdict {
    let manifest = write_manifest(dir, "ablate.cfg", suite, "seeds = 1-20\n");
    let tex = cmd_ablate(&manifest, Axis::NoTextureConstraint, &dir.join("no_texture"), Some(1)).unwrap();
    let region = cmd_ablate(&manifest, Axis::NoRegionSearch, &dir.join("no_region"), Some(1)).unwrap();

    // equal masks: every mask record of the λ₂ = 0 variant matches full LDAP's
    let same_masks = (1..=20u64).all(|s| {
        let a = fs::read(dir.join(format!("no_texture/ldap/scene_{s}.mask"))).unwrap();
        let b = fs::read(dir.join(format!("no_texture/no_texture_constraint/scene_{s}.mask"))).unwrap();
        a == b
    });
    let t = |s: &Summary, m: &str| s.method(m).unwrap().texture_distance;
    let (t_full, t_free) = (t(&tex.summary, "ldap"), t(&tex.summary, "no_texture_constraint"));
    let m = |s: &Summary, m: &str| s.method(m).unwrap().mar;
    let (m_full, m_fixed) = (m(&region.summary, "ldap"), m(&region.summary, "no_region_search"));
    let mar_ok = match (m_full, m_fixed) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    Verdict {
        name: "region/texture ablation",
        pass: same_masks && t_full < t_free && mar_ok,
        detail: format!(
            "texture distance {t_full:.4} vs {t_free:.4} without penalty (masks equal: {same_masks}), mar {} vs {} with frozen region",
            fmt_opt(m_full),
            fmt_opt(m_fixed)
        ),
    }
}

fn criterion_ada(manifest: &RunManifest, out: &Path) -> Verdict {
    let report = cmd_ada(manifest, out, false).unwrap();
    let ada: BTreeMap<&str, (f64, f64)> = report
        .rows
        .iter()
        .map(|r| (r.method.as_str(), (r.ada, r.shuffled_ada)))
        .collect();
    let ldap = ada["ldap"].0;
    let dpatch = ada["dpatch"].0;
    let minimal = ada.values().all(|&(a, _)| ldap <= a);
    let chance = ada.values().all(|&(_, s)| (0.35..=0.65).contains(&s));
    let listing: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{} {:.3}/{:.3}", r.method, r.ada, r.shuffled_ada))
        .collect();
    Verdict {
        name: "ADA ordering",
        pass: dpatch >= 0.9 && ldap < dpatch && minimal && chance,
        detail: format!("ada/shuffled: {}", listing.join(", ")),
    }
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_determinism(dir: &Path, suite: &Path) -> Verdict {
    let manifest = write_manifest(dir, "det.cfg", suite, "seeds = 1-4\nmethods = ldap,dpatch,four_rects\n");
    cmd_attack(&manifest, &dir.join("det_a"), Some(1)).unwrap();
    cmd_attack(&manifest, &dir.join("det_b"), Some(2)).unwrap();
    let (a, b) = (tree(&dir.join("det_a")), tree(&dir.join("det_b")));
    let images = a.keys().filter(|p| p.extension().is_some_and(|e| e == "ppm")).count();
    Verdict {
        name: "determinism",
        pass: a == b && images == 12 && a.contains_key(Path::new("report.csv")),
        detail: format!("{} files ({images} images) compared byte-for-byte across 1 and 2 worker threads", a.len()),
    }
}

#[test]
fn acceptance() {
    let det = detector();
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let suite = dir.join("suite");
    cmd_gen_suite(&seed_range(100, 1).unwrap(), &ToyDetectorConfig::default(), &suite).unwrap();

    let mut verdicts = vec![
        criterion_gradients(&det),
        criterion_geometry(),
        criterion_losses(),
        criterion_schedule(&det),
    ];

    let main = write_manifest(
        dir,
        "main.cfg",
        &suite,
        "methods = ldap,dpatch,advpatch,rp2,two_rects_h,four_rects\n",
    );
    let main_out = dir.join("main");
    let run = cmd_attack(&main, &main_out, Some(1)).unwrap();
    assert!(run.errors.is_empty(), "{:?}", run.errors);
    verdicts.push(criterion_classification(&det, &suite, &run));
    verdicts.push(criterion_localization(&det, dir, &suite));
    verdicts.push(criterion_strategy(dir, &suite));
    verdicts.push(criterion_region_texture(dir, &suite));
    verdicts.push(criterion_ada(&main, &main_out));
    verdicts.push(criterion_determinism(dir, &suite));

    for (i, v) in verdicts.iter().enumerate() {
        println!("{} criterion {:>2} {}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.name, v.detail);
    }
    let failed: Vec<_> = verdicts.iter().filter(|v| !v.pass).map(|v| v.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
