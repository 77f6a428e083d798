mod common;

use common::{bundle_of, rel_err, standard_scene, POINTS, SEED};
use scale_opt::stereo::{match_points, rejection_rate, scale_from_matches, MatchConfig};
use scale_opt::synthetic::{render_scene, sample_points, SceneConfig, SyntheticScene};
use scale_opt::{optimize_scale, OptimizerConfig};

fn baseline(scene: &SyntheticScene) -> (Option<f64>, f64) {
    let points = sample_points(scene, POINTS, 0.0, SEED).unwrap();
    let matches = match_points(&scene.img0, &scene.img1, &points, &MatchConfig::default());
    let k = scene.intrinsics();
    let b = scene.config.extrinsics().unwrap().baseline();
    (
        scale_from_matches(&points, &matches, k.fx, b).ok(),
        rejection_rate(&matches),
    )
}

#[test]
fn both_methods_agree_on_band_limited_texture() {
    let scene = standard_scene();
    let (matched, rejected) = baseline(scene);
    let matched = matched.expect("baseline produced a scale");
    assert!(
        rel_err(matched, scene.s_true) < 0.02,
        "block matching {matched}"
    );
    assert!(rejected < 0.5, "rejected {rejected}");

    let r = optimize_scale(
        &bundle_of(scene, POINTS, 0.0, 4),
        1.0,
        &OptimizerConfig::default(),
    )
    .unwrap();
    assert!(
        rel_err(r.scale, scene.s_true) < 0.02,
        "scale-opt {}",
        r.scale
    );
}

#[test]
fn repetitive_texture_defeats_block_matching_but_not_scale_optimization() {
    let scene = render_scene(&SceneConfig::repetitive()).unwrap();
    let (matched, rejected) = baseline(&scene);
    let baseline_fails = rejected > 0.5 || matched.is_none_or(|s| rel_err(s, scene.s_true) > 0.10);
    assert!(
        baseline_fails,
        "block matching {matched:?} with {rejected} rejected"
    );

    // Tracking-style start near the previous keyframe's scale, finest level
    // only: coarser levels average the 8 px stripes away.
    let cfg = OptimizerConfig {
        levels: 1,
        ..OptimizerConfig::default()
    };
    let bundle = bundle_of(&scene, POINTS, 0.0, 1);
    let r = optimize_scale(&bundle, 1.05 * scene.s_true, &cfg).unwrap();
    assert!(r.converged);
    assert!(
        rel_err(r.scale, scene.s_true) < 0.02,
        "scale-opt {}",
        r.scale
    );
}
