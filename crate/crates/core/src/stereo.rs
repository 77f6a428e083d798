//! Exhaustive block matching along horizontal epipolar lines of a rectified
//! pair. Serves as the explicit-correspondence baseline for the scale
//! optimizer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::image::GrayImage;
use crate::optimizer::ScalePoint;

/// Minimum accepted matches for [`scale_from_matches`].
pub const MIN_MATCHES: usize = 10;

/// Reference patches with variance below this are treated as textureless.
const FLAT_VARIANCE: f64 = 1e-9;

/// Best costs at or below this are exact hits and skip subpixel refinement.
const EXACT_COST: f64 = 1e-12;

/// Competing minima closer than this to the best are treated as its shoulder.
const MIN_SEPARATION: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMetric {
    /// Sum of squared differences.
    Ssd,
    /// `1 − NCC`, in [0, 2].
    Ncc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub patch_radius: usize,
    pub search_min: usize,
    pub search_max: usize,
    pub metric: MatchMetric,
    /// Reject when best / second-best cost exceeds this.
    pub uniqueness_ratio: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            patch_radius: 3,
            search_min: 1,
            search_max: 64,
            metric: MatchMetric::Ncc,
            uniqueness_ratio: 0.9,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.search_min >= self.search_max {
            return Err(Error::Config(format!(
                "search_min {} must be below search_max {}",
                self.search_min, self.search_max
            )));
        }
        if !(self.uniqueness_ratio > 0.0 && self.uniqueness_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "uniqueness_ratio {} outside (0, 1]",
                self.uniqueness_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// Patch or search window leaves one of the images.
    OutOfBounds,
    /// Reference patch has no texture.
    Flat,
    /// Second-best minimum is too close in cost to the best.
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Subpixel disparity, `None` when rejected.
    pub disparity: Option<f64>,
    /// Cost at the best integer disparity.
    pub best_cost: f64,
    /// Best over second-best cost; 0 when there is no competing minimum.
    pub cost_ratio: f64,
    pub rejection: Option<Rejection>,
}

impl MatchResult {
    fn rejected(reason: Rejection) -> Self {
        Self {
            disparity: None,
            best_cost: f64::NAN,
            cost_ratio: f64::NAN,
            rejection: Some(reason),
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.disparity.is_some()
    }
}

/// Match `p` from `img0` against `img1` at `u − d` for every integer
/// disparity `d` in the search range.
pub fn epipolar_match(
    img0: &GrayImage,
    img1: &GrayImage,
    p: Pixel,
    cfg: &MatchConfig,
) -> MatchResult {
    let r = cfg.patch_radius as f64;
    let (w0, h0) = (img0.width() as f64 - 1.0, img0.height() as f64 - 1.0);
    let (w1, h1) = (img1.width() as f64 - 1.0, img1.height() as f64 - 1.0);
    let inside = p.is_finite()
        && p.u - r >= 0.0
        && p.u + r <= w0
        && p.v - r >= 0.0
        && p.v + r <= h0.min(h1)
        && p.u - cfg.search_max as f64 - r >= 0.0
        && p.u - cfg.search_min as f64 + r <= w1;
    if !inside || cfg.search_min >= cfg.search_max {
        return MatchResult::rejected(Rejection::OutOfBounds);
    }

    let side = 2 * cfg.patch_radius + 1;
    let offsets = || (0..side * side).map(|k| ((k % side) as f64 - r, (k / side) as f64 - r));
    let sample =
        |img: &GrayImage, u: f64, v: f64| img.sample_bilinear(Pixel::new(u, v)).unwrap_or(f64::NAN);

    let reference: Vec<f64> = offsets()
        .map(|(dx, dy)| sample(img0, p.u + dx, p.v + dy))
        .collect();
    let (ref_mean, ref_var) = mean_var(&reference);
    if !(ref_var > FLAT_VARIANCE) {
        return MatchResult::rejected(Rejection::Flat);
    }

    let mut candidate = vec![0.0; reference.len()];
    let costs: Vec<f64> = (cfg.search_min..=cfg.search_max)
        .map(|d| {
            let u = p.u - d as f64;
            for (c, (dx, dy)) in candidate.iter_mut().zip(offsets()) {
                *c = sample(img1, u + dx, p.v + dy);
            }
            match cfg.metric {
                MatchMetric::Ssd => reference
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum(),
                MatchMetric::Ncc => {
                    let (mean, var) = mean_var(&candidate);
                    if var <= FLAT_VARIANCE {
                        return 1.0;
                    }
                    let cov = reference
                        .iter()
                        .zip(&candidate)
                        .map(|(a, b)| (a - ref_mean) * (b - mean))
                        .sum::<f64>()
                        / reference.len() as f64;
                    1.0 - cov / (ref_var * var).sqrt()
                }
            }
        })
        .collect();

    let best = (0..costs.len())
        .min_by(|&a, &b| costs[a].total_cmp(&costs[b]))
        .expect("non-empty search range");
    let best_cost = costs[best];

    let second = (0..costs.len())
        .filter(|&i| i.abs_diff(best) >= MIN_SEPARATION && is_local_min(&costs, i))
        .map(|i| costs[i])
        .min_by(f64::total_cmp);
    let cost_ratio = match second {
        Some(c) if c > 0.0 => best_cost / c,
        Some(_) => 1.0,
        None => 0.0,
    };

    let mut disparity = (cfg.search_min + best) as f64;
    if best_cost > EXACT_COST && best > 0 && best + 1 < costs.len() {
        let (cm, c0, cp) = (costs[best - 1], costs[best], costs[best + 1]);
        let denom = cm - 2.0 * c0 + cp;
        if denom > 0.0 {
            disparity += (0.5 * (cm - cp) / denom).clamp(-0.5, 0.5);
        }
    }

    let rejection = (cost_ratio > cfg.uniqueness_ratio).then_some(Rejection::Ambiguous);
    MatchResult {
        disparity: rejection.is_none().then_some(disparity),
        best_cost,
        cost_ratio,
        rejection,
    }
}

/// [`epipolar_match`] for every point's host pixel, in point order.
pub fn match_points(
    img0: &GrayImage,
    img1: &GrayImage,
    points: &[ScalePoint],
    cfg: &MatchConfig,
) -> Vec<MatchResult> {
    points
        .par_iter()
        .map(|pt| epipolar_match(img0, img1, pt.host_pixel, cfg))
        .collect()
}

pub fn rejection_rate(matches: &[MatchResult]) -> f64 {
    if matches.is_empty() {
        return 1.0;
    }
    matches.iter().filter(|m| !m.is_accepted()).count() as f64 / matches.len() as f64
}

/// Median of the per-point candidates `(fx·b/disparity)·inv_depth`.
pub fn scale_from_matches(
    points: &[ScalePoint],
    matches: &[MatchResult],
    fx: f64,
    baseline: f64,
) -> Result<f64> {
    if points.len() != matches.len() {
        return Err(Error::Input(format!(
            "{} points but {} matches",
            points.len(),
            matches.len()
        )));
    }
    let mut candidates: Vec<f64> = points
        .iter()
        .zip(matches)
        .filter_map(|(pt, m)| {
            m.disparity
                .filter(|&d| d > 0.0)
                .map(|d| fx * baseline / d * pt.inv_depth)
        })
        .collect();
    if candidates.len() < MIN_MATCHES {
        return Err(Error::BaselineFailure {
            accepted: candidates.len(),
            required: MIN_MATCHES,
        });
    }
    candidates.sort_by(f64::total_cmp);
    let n = candidates.len();
    Ok(if n % 2 == 1 {
        candidates[n / 2]
    } else {
        0.5 * (candidates[n / 2 - 1] + candidates[n / 2])
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

fn is_local_min(costs: &[f64], i: usize) -> bool {
    let left = i == 0 || costs[i] < costs[i - 1];
    let right = i + 1 == costs.len() || costs[i] <= costs[i + 1];
    left && right
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{render_scene, sample_points, SceneConfig};

    fn noise_image(w: usize, h: usize) -> GrayImage {
        // Deterministic hash texture, no spatial structure to alias on.
        GrayImage::from_fn(w, h, |x, y| {
            let k = (x as u64).wrapping_mul(73_856_093) ^ (y as u64).wrapping_mul(19_349_663);
            (k.wrapping_mul(2_654_435_761) >> 7) as f64 % 256.0
        })
    }

    fn shifted(img: &GrayImage, k: usize) -> GrayImage {
        GrayImage::from_fn(img.width(), img.height(), |x, y| {
            img.get((x + k).min(img.width() - 1), y)
        })
    }

    #[test]
    fn exact_integer_shift_is_recovered() {
        let img0 = noise_image(160, 40);
        let img1 = shifted(&img0, 17);
        for metric in [MatchMetric::Ssd, MatchMetric::Ncc] {
            let cfg = MatchConfig {
                search_max: 40,
                metric,
                ..Default::default()
            };
            for u in [60, 90, 130] {
                let m = epipolar_match(&img0, &img1, Pixel::new(u as f64, 20.0), &cfg);
                assert_eq!(m.disparity, Some(17.0), "{metric:?} at u={u}: {m:?}");
            }
        }
    }

    #[test]
    fn constant_image_is_rejected_as_flat() {
        let img = GrayImage::constant(100, 40, 90.0);
        let m = epipolar_match(&img, &img, Pixel::new(80.0, 20.0), &MatchConfig::default());
        assert_eq!(m.rejection, Some(Rejection::Flat));
        assert!(!m.is_accepted());
    }

    #[test]
    fn window_leaving_image_is_rejected() {
        let img = noise_image(100, 40);
        let cfg = MatchConfig::default();
        for p in [
            Pixel::new(30.0, 20.0),
            Pixel::new(80.0, 1.0),
            Pixel::new(98.0, 20.0),
        ] {
            let m = epipolar_match(&img, &img, p, &cfg);
            assert_eq!(m.rejection, Some(Rejection::OutOfBounds), "{p:?}");
        }
    }

    #[test]
    fn subpixel_refinement_tracks_half_pixel_shift() {
        let img0 = GrayImage::from_fn(200, 20, |x, _| 128.0 + 60.0 * (x as f64 * 0.21).sin());
        let img1 = GrayImage::from_fn(200, 20, |x, _| {
            128.0 + 60.0 * ((x as f64 + 12.5) * 0.21).sin()
        });
        let cfg = MatchConfig {
            search_max: 20,
            metric: MatchMetric::Ssd,
            uniqueness_ratio: 1.0,
            ..Default::default()
        };
        let d = epipolar_match(&img0, &img1, Pixel::new(100.0, 10.0), &cfg)
            .disparity
            .unwrap();
        assert!((d - 12.5).abs() < 0.1, "d = {d}");
    }

    #[test]
    fn median_of_candidates() {
        let pts: Vec<ScalePoint> = (0..11)
            .map(|i| ScalePoint {
                host_pixel: Pixel::new(0.0, 0.0),
                inv_depth: 0.1 * (i + 1) as f64,
                host_intensity: 0.0,
            })
            .collect();
        let matches: Vec<MatchResult> = (0..11)
            .map(|_| MatchResult {
                disparity: Some(20.0),
                best_cost: 0.0,
                cost_ratio: 0.0,
                rejection: None,
            })
            .collect();
        // Candidates are 400·0.5/20·inv_depth = 10·inv_depth; median inv_depth = 0.6.
        let s = scale_from_matches(&pts, &matches, 400.0, 0.5).unwrap();
        assert!((s - 6.0).abs() < 1e-12);

        let none = vec![MatchResult::rejected(Rejection::Ambiguous); 11];
        match scale_from_matches(&pts, &none, 400.0, 0.5) {
            Err(Error::BaselineFailure {
                accepted: 0,
                required,
            }) => assert_eq!(required, MIN_MATCHES),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standard_scene_baseline_scale() {
        let scene = render_scene(&SceneConfig::standard()).unwrap();
        let pts = sample_points(&scene, 2000, 0.0, 3).unwrap();
        let matches = match_points(&scene.img0, &scene.img1, &pts, &MatchConfig::default());
        let k = scene.intrinsics();
        let b = scene.config.extrinsics().unwrap().baseline();
        let s = scale_from_matches(&pts, &matches, k.fx, b).unwrap();
        assert!((s / scene.s_true - 1.0).abs() < 0.02, "s = {s}");
        assert!(rejection_rate(&matches) < 0.5);
    }

    #[test]
    fn repetitive_texture_is_mostly_rejected() {
        let rep = render_scene(&SceneConfig::repetitive()).unwrap();
        let std = render_scene(&SceneConfig::standard()).unwrap();
        let cfg = MatchConfig::default();
        let rate = |scene: &crate::synthetic::SyntheticScene| {
            let pts = sample_points(scene, 2000, 0.0, 3).unwrap();
            rejection_rate(&match_points(&scene.img0, &scene.img1, &pts, &cfg))
        };
        let (r_rep, r_std) = (rate(&rep), rate(&std));
        assert!(r_rep > 0.5, "repetitive rejection {r_rep}");
        assert!(r_rep > r_std, "{r_rep} vs {r_std}");
    }
}
