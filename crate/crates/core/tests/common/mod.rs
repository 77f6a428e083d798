#![allow(dead_code)]

use std::sync::OnceLock;

use scale_opt::synthetic::{render_scene, sample_points, SceneConfig, SyntheticScene};
use scale_opt::KeyframeBundle;

pub const POINTS: usize = 2000;
pub const SEED: u64 = 11;

pub fn standard_scene() -> &'static SyntheticScene {
    static SCENE: OnceLock<SyntheticScene> = OnceLock::new();
    SCENE.get_or_init(|| render_scene(&SceneConfig::standard()).unwrap())
}

pub fn bundle_of(scene: &SyntheticScene, n: usize, noise: f64, levels: usize) -> KeyframeBundle {
    let points = sample_points(scene, n, noise, SEED).unwrap();
    scene.bundle(points, levels).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
