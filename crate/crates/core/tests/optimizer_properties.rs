mod common;

use common::{bundle_of, rel_err, standard_scene, POINTS, SEED};
use proptest::prelude::*;
use scale_opt::synthetic::{render_scene, sample_points, SceneConfig};
use scale_opt::{
    gn_step, optimize_scale, CameraIntrinsics, Error, GrayImage, ImagePyramid, KeyframeBundle,
    OptimizerConfig, Pixel, ScalePoint, StereoExtrinsics,
};

fn cfg() -> OptimizerConfig {
    OptimizerConfig::default()
}

#[test]
fn standard_scene_from_unit_scale() {
    let scene = standard_scene();
    let bundle = bundle_of(scene, POINTS, 0.0, 4);
    let r = optimize_scale(&bundle, 1.0, &cfg()).unwrap();
    assert!(r.converged, "{r:?}");
    assert!(rel_err(r.scale, scene.s_true) < 0.01, "scale {}", r.scale);
    assert!(r.is_monotone());
    assert_eq!(r.levels.len(), 4);
    assert_eq!(
        r.levels.iter().map(|t| t.level).collect::<Vec<_>>(),
        [3, 2, 1, 0]
    );
}

#[test]
fn converged_scale_is_a_fixed_point() {
    let scene = standard_scene();
    let bundle = bundle_of(scene, POINTS, 0.0, 4);
    let c = cfg();
    let r = optimize_scale(&bundle, 1.0, &c).unwrap();
    assert!(r.converged);
    let step = gn_step(&bundle, r.scale, 0, &c).unwrap();
    assert!(
        step.abs() < 10.0 * c.convergence_tol * r.scale,
        "step {step} at s = {}",
        r.scale
    );
}

#[test]
fn starting_at_the_truth_stays_there() {
    let scene = standard_scene();
    let bundle = bundle_of(scene, POINTS, 0.0, 4);
    let r = optimize_scale(&bundle, scene.s_true, &cfg()).unwrap();
    let finest = r.finest().unwrap();
    assert!(finest.iterations <= 2, "{finest:?}");
    assert!(rel_err(r.scale, scene.s_true) < 1e-3, "scale {}", r.scale);
}

#[test]
fn doubling_inverse_depths_doubles_the_scale() {
    let scene = standard_scene();
    let points = sample_points(scene, POINTS, 0.0, SEED).unwrap();
    let doubled: Vec<ScalePoint> = points
        .iter()
        .map(|p| ScalePoint {
            inv_depth: 2.0 * p.inv_depth,
            ..*p
        })
        .collect();
    let a = optimize_scale(&scene.bundle(points, 4).unwrap(), 1.0, &cfg()).unwrap();
    let b = optimize_scale(&scene.bundle(doubled, 4).unwrap(), 2.0, &cfg()).unwrap();
    assert!(
        rel_err(b.scale, 2.0 * a.scale) < 0.005,
        "{} vs {}",
        b.scale,
        a.scale
    );
}

#[test]
fn noisy_inverse_depths_keep_the_scale() {
    let scene = standard_scene();
    let bundle = bundle_of(scene, POINTS, 0.05, 4);
    let r = optimize_scale(&bundle, 1.0, &cfg()).unwrap();
    assert!(rel_err(r.scale, scene.s_true) < 0.02, "scale {}", r.scale);
    assert!(r.is_monotone());
}

#[test]
fn pyramid_widens_the_basin() {
    let scene = render_scene(&SceneConfig::wide_basin()).unwrap();
    let bundle = bundle_of(&scene, POINTS, 0.0, 4);
    let s0 = scene.s_true / 3.0;

    let multi = optimize_scale(&bundle, s0, &cfg()).unwrap();
    assert!(multi.converged);
    assert!(
        rel_err(multi.scale, scene.s_true) < 0.01,
        "4 levels: {}",
        multi.scale
    );

    let single_cfg = OptimizerConfig { levels: 1, ..cfg() };
    match optimize_scale(&bundle, s0, &single_cfg) {
        Ok(r) => assert!(
            !r.converged || rel_err(r.scale, scene.s_true) > 0.05,
            "single level unexpectedly reached {}",
            r.scale
        ),
        Err(e) => assert!(e.is_algorithmic(), "{e}"),
    }
}

#[test]
fn results_are_bitwise_reproducible() {
    let scene = standard_scene();
    let bundle = bundle_of(scene, POINTS, 0.02, 4);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| optimize_scale(&bundle, 1.0, &cfg()).unwrap())
    };
    let reference = run(1);
    for threads in [1, 2, 4] {
        let r = run(threads);
        assert_eq!(
            r.scale.to_bits(),
            reference.scale.to_bits(),
            "{threads} threads"
        );
        assert_eq!(r, reference);
    }
}

fn constant_bundle() -> KeyframeBundle {
    let k = CameraIntrinsics::new(100.0, 100.0, 31.5, 31.5, 64, 64).unwrap();
    let img = GrayImage::constant(64, 64, 128.0);
    let pyr = ImagePyramid::build(&img, &k, 2).unwrap();
    let points = (0..100)
        .map(|i| ScalePoint {
            host_pixel: Pixel::new(20.0 + (i % 10) as f64 * 2.0, 20.0 + (i / 10) as f64 * 2.0),
            inv_depth: 0.5,
            host_intensity: 128.0,
        })
        .collect();
    KeyframeBundle::new(
        pyr.clone(),
        pyr,
        StereoExtrinsics::rectified(0.1).unwrap(),
        points,
    )
    .unwrap()
}

#[test]
fn textureless_images_are_degenerate() {
    let bundle = constant_bundle();
    let c = OptimizerConfig { levels: 2, ..cfg() };
    match optimize_scale(&bundle, 1.0, &c) {
        Err(Error::DegenerateNormalEquation { hessian }) => assert_eq!(hessian, 0.0),
        other => panic!("expected a degenerate normal equation, got {other:?}"),
    }
}

#[test]
fn out_of_range_initial_scale_is_rejected() {
    let bundle = constant_bundle();
    assert!(matches!(
        optimize_scale(&bundle, 1e6, &cfg()),
        Err(Error::ScaleOutOfBounds { .. })
    ));
}

#[test]
fn no_overlap_at_any_level_fails() {
    let scene = standard_scene();
    let bundle = bundle_of(scene, 200, 0.0, 4);
    // A tiny scale pushes every point far outside the second image.
    assert!(matches!(
        optimize_scale(&bundle, 1e-3, &cfg()),
        Err(Error::ScaleOptimizationFailed(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_never_increases(ratio in 0.6f64..1.6, levels in 1usize..=4, noise in 0.0f64..0.05) {
        let scene = standard_scene();
        let bundle = bundle_of(scene, 1000, noise, 4);
        let c = OptimizerConfig { levels, ..cfg() };
        if let Ok(r) = optimize_scale(&bundle, scene.s_true * ratio, &c) {
            prop_assert!(r.is_monotone(), "{:?}", r.levels);
            for t in &r.levels {
                prop_assert_eq!(t.energies.last().copied(), Some(t.final_energy));
            }
        }
    }

    #[test]
    fn nearby_starts_converge_to_the_truth(ratio in 0.8f64..1.25) {
        let scene = standard_scene();
        let bundle = bundle_of(scene, 1000, 0.0, 4);
        let r = optimize_scale(&bundle, scene.s_true * ratio, &cfg()).unwrap();
        prop_assert!(r.converged);
        prop_assert!(rel_err(r.scale, scene.s_true) < 0.01, "{} from {}", r.scale, ratio);
    }
}
