//! Block-matching cost grows with search range times patch area. Kept in its
//! own test binary so that no other test competes for the CPU.

use std::time::Instant;

use scale_opt::stereo::{match_points, MatchConfig, Rejection};
use scale_opt::synthetic::{render_scene, sample_points, SceneConfig, SyntheticScene};
use scale_opt::ScalePoint;

fn median_ms(points: &[ScalePoint], scene: &SyntheticScene, cfg: &MatchConfig) -> f64 {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let mut samples: Vec<f64> = (0..7)
        .map(|_| {
            let t = Instant::now();
            let m = pool.install(|| match_points(&scene.img0, &scene.img1, points, cfg));
            assert!(m
                .iter()
                .all(|m| m.rejection != Some(Rejection::OutOfBounds)));
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

#[test]
fn cost_scales_with_search_range_and_patch_area() {
    let scene = render_scene(&SceneConfig::standard()).unwrap();
    let points: Vec<ScalePoint> = sample_points(&scene, 2000, 0.0, 5)
        .unwrap()
        .into_iter()
        .filter(|p| {
            (200.0..600.0).contains(&p.host_pixel.u) && (20.0..460.0).contains(&p.host_pixel.v)
        })
        .take(300)
        .collect();
    assert_eq!(points.len(), 300);

    let base = MatchConfig {
        patch_radius: 2,
        search_min: 1,
        search_max: 32,
        ..MatchConfig::default()
    };
    let t_base = median_ms(&points, &scene, &base);

    let wide = MatchConfig {
        search_max: 128,
        ..base
    };
    let ratio = median_ms(&points, &scene, &wide) / t_base;
    let nominal = 128.0 / 32.0;
    assert!(
        (0.5 * nominal..=2.0 * nominal).contains(&ratio),
        "search range ×4 changed time by ×{ratio:.2}"
    );

    let big = MatchConfig {
        patch_radius: 5,
        ..base
    };
    let ratio = median_ms(&points, &scene, &big) / t_base;
    let nominal = 121.0 / 25.0;
    assert!(
        (0.5 * nominal..=2.0 * nominal).contains(&ratio),
        "patch area ×{nominal:.2} changed time by ×{ratio:.2}"
    );
}
