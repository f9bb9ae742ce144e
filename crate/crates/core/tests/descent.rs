use patchsearch::attack::{run_ldap, AttackConfig};
use patchsearch::detector::{generate_scene, SceneSpec, TargetSpec, Task, ToyDetector, ToyDetectorConfig};

/// With fixed zero penalties and small steps every update is plain gradient
/// descent on the attack loss, so the loss cannot rise while B* is stable.
#[test]
fn attack_loss_is_non_increasing_without_penalties() {
    let det = ToyDetector::build(ToyDetectorConfig::default()).unwrap();
    let base = AttackConfig::default();
    let cfg = AttackConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        delta_lambda: 0.0,
        lr_center: base.lr_center * 0.1,
        lr_size: base.lr_size * 0.1,
        lr_alpha: base.lr_alpha * 0.1,
        lr_texture: base.lr_texture * 0.1,
        max_steps: 300,
        ..base
    };
    for seed in [3u64, 8] {
        let scene = generate_scene(&SceneSpec::new(seed), &det).unwrap();
        let t = scene.target();
        let spec = TargetSpec {
            target_box: t.bbox,
            target_category: t.category,
            task: Task::Classification,
        };
        let r = run_ldap(&scene.image, &spec, &det, &cfg).unwrap();
        let mut compared = 0;
        for w in r.loss_trace.windows(2) {
            if w[0].target_boxes == w[1].target_boxes {
                compared += 1;
                assert!(
                    w[1].attack <= w[0].attack + 1e-12,
                    "seed {seed} step {}: {} -> {}",
                    w[1].step,
                    w[0].attack,
                    w[1].attack
                );
            }
        }
        assert!(compared > 10);
    }
}
