//! Gauss-Newton scale optimization over a stereo keyframe.
//!
//! Points reconstructed by a monocular odometry front end are known only up to
//! a global scale `s`. Each point is scaled, moved into the second camera of
//! the rig and compared photometrically against its host intensity:
//!
//! ```text
//! r_p(s) = I1[Π1(T · s·Π0⁻¹(p, d_p))] − I0[p]
//! E(s)   = Σ_p w_p · ‖r_p(s)‖_γ
//! ```
//!
//! `s` is the only unknown, so the normal equation is a scalar and each
//! Gauss-Newton step is `s_inc = −Σ ω J r / Σ ω J²` with
//! `J = ∇I1 · ∂Π1/∂s`. Levels are processed coarse to fine; each accepted step
//! never increases the level's energy (steps are halved until it doesn't).
//!
//! The inverse-compositional trick does not apply here: the Jacobian would
//! have to be taken in the host image, but scaling a point does not move its
//! projection in the host image, so that Jacobian is identically zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    jacobian_scale, pixel_at_level, project_rotated, CameraIntrinsics, Pixel, Point3,
    StereoExtrinsics,
};
use crate::image::ImagePyramid;

/// Admissible scale range during iteration.
pub const SCALE_MIN: f64 = 1e-4;
pub const SCALE_MAX: f64 = 1e4;
/// Below this the scalar normal equation is treated as singular.
pub const MIN_HESSIAN: f64 = 1e-12;
pub const MAX_HALVINGS: usize = 8;

/// Points per partial sum. Partial sums are reduced in chunk order, which keeps
/// results independent of the number of worker threads.
const CHUNK: usize = 128;

/// One point handed over by the monocular front end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    /// Level-0 pixel in the reference image.
    pub host_pixel: Pixel,
    /// Inverse depth in monocular (unscaled) units.
    pub inv_depth: f64,
    /// Reference intensity at level 0. Coarser levels re-sample the pyramid.
    pub host_intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PointWeight {
    Constant {
        value: f64,
    },
    /// `c² / (c² + ‖∇I0(p)‖²)`
    Gradient {
        #[serde(default = "default_gradient_c")]
        c: f64,
    },
}

fn default_gradient_c() -> f64 {
    50.0
}

impl Default for PointWeight {
    fn default() -> Self {
        PointWeight::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub levels: usize,
    pub max_iterations_per_level: usize,
    /// Convergence threshold on `|s_inc| / s`.
    pub convergence_tol: f64,
    pub huber_gamma: f64,
    pub min_valid_points: usize,
    pub min_valid_fraction: f64,
    pub weight: PointWeight,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            levels: crate::image::DEFAULT_LEVELS,
            max_iterations_per_level: 15,
            convergence_tol: 1e-5,
            huber_gamma: 9.0,
            min_valid_points: 50,
            min_valid_fraction: 0.25,
            weight: PointWeight::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let weight_ok = match self.weight {
            PointWeight::Constant { value } => value > 0.0,
            PointWeight::Gradient { c } => c > 0.0,
        };
        if self.levels == 0
            || self.max_iterations_per_level == 0
            || !(self.convergence_tol > 0.0)
            || !(self.huber_gamma > 0.0)
            || self.min_valid_points == 0
            || !(self.min_valid_fraction > 0.0)
            || !weight_ok
        {
            return Err(Error::Config(format!(
                "optimizer parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    fn point_weight(&self, host_grad_sq: f64) -> f64 {
        match self.weight {
            PointWeight::Constant { value } => value,
            PointWeight::Gradient { c } => c * c / (c * c + host_grad_sq),
        }
    }
}

/// Huber penalty: `r²` inside `[−γ, γ]`, `γ(2|r| − γ)` outside.
#[inline]
pub fn huber_energy(r: f64, gamma: f64) -> f64 {
    let a = r.abs();
    if a <= gamma {
        r * r
    } else {
        gamma * (2.0 * a - gamma)
    }
}

/// IRLS weight matching [`huber_energy`].
#[inline]
pub fn huber_weight(r: f64, gamma: f64) -> f64 {
    let a = r.abs();
    if a <= gamma {
        1.0
    } else {
        gamma / a
    }
}

#[derive(Debug, Clone, Copy)]
struct HostSample {
    intensity: f64,
    grad_sq: f64,
}

/// Everything one scale optimization needs: both pyramids, the rig and the
/// point set.
#[derive(Debug, Clone)]
pub struct KeyframeBundle {
    pyr0: ImagePyramid,
    pyr1: ImagePyramid,
    extrinsics: StereoExtrinsics,
    points: Vec<ScalePoint>,
    rotated: Vec<Point3>,
    hosts: Vec<Vec<Option<HostSample>>>,
}

impl KeyframeBundle {
    pub fn new(
        pyr0: ImagePyramid,
        pyr1: ImagePyramid,
        extrinsics: StereoExtrinsics,
        points: Vec<ScalePoint>,
    ) -> Result<Self> {
        if pyr0.num_levels() != pyr1.num_levels() {
            return Err(Error::Config(format!(
                "pyramids disagree on level count ({} vs {})",
                pyr0.num_levels(),
                pyr1.num_levels()
            )));
        }
        if points.is_empty() {
            return Err(Error::Input("keyframe bundle has no points".into()));
        }
        let k0 = *pyr0.intrinsics(0);
        let mut rotated = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !k0.contains(p.host_pixel, 0.0) {
                return Err(Error::Input(format!(
                    "point {i} host pixel ({}, {}) outside the reference image",
                    p.host_pixel.u, p.host_pixel.v
                )));
            }
            let x = crate::geometry::back_project(p.host_pixel, p.inv_depth, &k0)?;
            rotated.push(extrinsics.rotation() * x);
        }
        let hosts = (0..pyr0.num_levels())
            .map(|level| {
                let img = pyr0.level(level);
                points
                    .iter()
                    .map(|p| {
                        let q = pixel_at_level(p.host_pixel, level);
                        let intensity = if level == 0 {
                            p.host_intensity
                        } else {
                            img.sample_bilinear(q)?
                        };
                        let grad_sq = img
                            .gradient_bilinear(q)
                            .map(|g| g.norm_squared())
                            .unwrap_or(0.0);
                        Some(HostSample { intensity, grad_sq })
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            pyr0,
            pyr1,
            extrinsics,
            points,
            rotated,
            hosts,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.pyr0.num_levels()
    }

    pub fn points(&self) -> &[ScalePoint] {
        &self.points
    }

    pub fn extrinsics(&self) -> &StereoExtrinsics {
        &self.extrinsics
    }

    pub fn pyr0(&self) -> &ImagePyramid {
        &self.pyr0
    }

    pub fn pyr1(&self) -> &ImagePyramid {
        &self.pyr1
    }

    /// Reference intensity of point `index` at `level`, if the host pixel is
    /// inside that level.
    pub fn host_intensity(&self, index: usize, level: usize) -> Option<f64> {
        self.hosts[level][index].map(|h| h.intensity)
    }

    /// Photometric residual of one point. `None` when the scaled point falls
    /// behind the second camera or outside its valid sampling region.
    pub fn residual(&self, index: usize, s: f64, level: usize) -> Option<f64> {
        let host = self.hosts[level][index]?;
        let k1 = self.pyr1.intrinsics(level);
        let pix =
            project_rotated(&self.rotated[index], s, self.extrinsics.translation(), k1).ok()?;
        let (value, _) = self.pyr1.level(level).sample_with_gradient(pix)?;
        Some(value - host.intensity)
    }

    fn accumulate(&self, s: f64, level: usize, cfg: &OptimizerConfig) -> Accum {
        let k1: &CameraIntrinsics = self.pyr1.intrinsics(level);
        let img1 = self.pyr1.level(level);
        let t = self.extrinsics.translation();
        let hosts = &self.hosts[level];
        let gamma = cfg.huber_gamma;

        let partials: Vec<Accum> = self
            .rotated
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut acc = Accum::default();
                for (j, x) in chunk.iter().enumerate() {
                    let Some(host) = hosts[c * CHUNK + j] else {
                        continue;
                    };
                    let Ok(pix) = project_rotated(x, s, t, k1) else {
                        continue;
                    };
                    let Some((value, grad)) = img1.sample_with_gradient(pix) else {
                        continue;
                    };
                    let Ok(dpi) = jacobian_scale(x, s, t, k1) else {
                        continue;
                    };
                    let r = value - host.intensity;
                    let w = cfg.point_weight(host.grad_sq);
                    let jac = grad.dot(&dpi);
                    let omega = w * huber_weight(r, gamma);
                    acc.energy += w * huber_energy(r, gamma);
                    acc.gradient += omega * jac * r;
                    acc.hessian += omega * jac * jac;
                    acc.valid += 1;
                }
                acc
            })
            .collect();
        partials.into_iter().fold(Accum::default(), Accum::merge)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    energy: f64,
    gradient: f64,
    hessian: f64,
    valid: usize,
}

impl Accum {
    fn merge(self, other: Accum) -> Accum {
        Accum {
            energy: self.energy + other.energy,
            gradient: self.gradient + other.gradient,
            hessian: self.hessian + other.hessian,
            valid: self.valid + other.valid,
        }
    }
}

/// Scale energy at `level` and the number of points that contributed.
pub fn energy(
    bundle: &KeyframeBundle,
    s: f64,
    level: usize,
    cfg: &OptimizerConfig,
) -> Result<(f64, usize)> {
    let acc = bundle.accumulate(s, level, cfg);
    if acc.valid < cfg.min_valid_points {
        return Err(Error::InsufficientOverlap {
            valid: acc.valid,
            required: cfg.min_valid_points,
        });
    }
    Ok((acc.energy, acc.valid))
}

/// One Gauss-Newton increment of the scale.
pub fn gn_step(
    bundle: &KeyframeBundle,
    s: f64,
    level: usize,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    let acc = bundle.accumulate(s, level, cfg);
    if acc.valid < cfg.min_valid_points {
        return Err(Error::InsufficientOverlap {
            valid: acc.valid,
            required: cfg.min_valid_points,
        });
    }
    if !(acc.hessian >= MIN_HESSIAN) {
        return Err(Error::DegenerateNormalEquation {
            hessian: acc.hessian,
        });
    }
    Ok(-acc.gradient / acc.hessian)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelStatus {
    Converged,
    MaxIterations,
    /// No halving of the Gauss-Newton step reduced the energy.
    Stalled,
    InsufficientOverlap,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: usize,
    /// Gauss-Newton steps computed on this level.
    pub iterations: usize,
    /// Full passes over the points (initial linearization plus every trial
    /// step, including rejected halvings).
    pub evaluations: usize,
    /// Energy at the level's start followed by the energy after every
    /// accepted step.
    pub energies: Vec<f64>,
    pub final_energy: f64,
    pub valid_count: usize,
    pub scale: f64,
    pub status: LevelStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleResult {
    pub scale: f64,
    pub initial_scale: f64,
    /// Coarsest level first.
    pub levels: Vec<LevelTrace>,
    pub converged: bool,
    pub valid_fraction: f64,
}

impl ScaleResult {
    pub fn finest(&self) -> Option<&LevelTrace> {
        self.levels.iter().find(|t| t.level == 0)
    }

    pub fn total_iterations(&self) -> usize {
        self.levels.iter().map(|t| t.iterations).sum()
    }

    pub fn total_evaluations(&self) -> usize {
        self.levels.iter().map(|t| t.evaluations).sum()
    }

    /// True when every level's accepted energies never increased.
    pub fn is_monotone(&self) -> bool {
        self.levels
            .iter()
            .all(|t| t.energies.windows(2).all(|w| w[1] <= w[0]))
    }
}

/// Coarse-to-fine Gauss-Newton over the bundle's pyramid levels, starting at
/// `s0`. Only the `cfg.levels` finest pyramid levels are used.
pub fn optimize_scale(
    bundle: &KeyframeBundle,
    s0: f64,
    cfg: &OptimizerConfig,
) -> Result<ScaleResult> {
    cfg.validate()?;
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::Input(format!("initial scale {s0} must be positive")));
    }
    if !(SCALE_MIN..=SCALE_MAX).contains(&s0) {
        return Err(Error::ScaleOutOfBounds { scale: s0 });
    }
    if cfg.levels > bundle.num_levels() {
        return Err(Error::Config(format!(
            "{} levels requested but the bundle has {}",
            cfg.levels,
            bundle.num_levels()
        )));
    }

    let mut s = s0;
    let mut traces = Vec::with_capacity(cfg.levels);
    for level in (0..cfg.levels).rev() {
        let trace = optimize_level(bundle, &mut s, level, cfg)?;
        traces.push(trace);
    }

    let ran = |t: &&LevelTrace| {
        !matches!(
            t.status,
            LevelStatus::InsufficientOverlap | LevelStatus::Degenerate
        )
    };
    if !traces.iter().any(|t| ran(&t)) {
        let any_degenerate = traces.iter().any(|t| t.status == LevelStatus::Degenerate);
        if any_degenerate {
            let hessian = bundle.accumulate(s, 0, cfg).hessian;
            return Err(Error::DegenerateNormalEquation { hessian });
        }
        return Err(Error::ScaleOptimizationFailed(
            "insufficient overlap at every pyramid level".into(),
        ));
    }

    let finest = traces.last().expect("at least one level");
    let valid_fraction = finest.valid_count as f64 / bundle.points.len() as f64;
    let converged =
        finest.status == LevelStatus::Converged && valid_fraction >= cfg.min_valid_fraction;
    Ok(ScaleResult {
        scale: s,
        initial_scale: s0,
        levels: traces,
        converged,
        valid_fraction,
    })
}

fn optimize_level(
    bundle: &KeyframeBundle,
    s: &mut f64,
    level: usize,
    cfg: &OptimizerConfig,
) -> Result<LevelTrace> {
    let mut current = bundle.accumulate(*s, level, cfg);
    let mut trace = LevelTrace {
        level,
        iterations: 0,
        evaluations: 1,
        energies: Vec::new(),
        final_energy: current.energy,
        valid_count: current.valid,
        scale: *s,
        status: LevelStatus::MaxIterations,
    };
    if current.valid < cfg.min_valid_points {
        trace.status = LevelStatus::InsufficientOverlap;
        return Ok(trace);
    }
    trace.energies.push(current.energy);

    while trace.iterations < cfg.max_iterations_per_level {
        if !(current.hessian >= MIN_HESSIAN) {
            trace.status = LevelStatus::Degenerate;
            break;
        }
        let inc = -current.gradient / current.hessian;
        trace.iterations += 1;
        if inc.abs() / *s < cfg.convergence_tol {
            trace.status = LevelStatus::Converged;
            break;
        }

        let mut step = inc;
        let mut accepted = None;
        let mut any_in_range = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate = *s + step;
            if (SCALE_MIN..=SCALE_MAX).contains(&candidate) {
                any_in_range = true;
                let trial = bundle.accumulate(candidate, level, cfg);
                trace.evaluations += 1;
                if trial.valid >= cfg.min_valid_points && trial.energy <= current.energy {
                    accepted = Some((candidate, trial));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((candidate, trial)) => {
                *s = candidate;
                current = trial;
                trace.energies.push(current.energy);
            }
            None if !any_in_range => {
                return Err(Error::ScaleOutOfBounds { scale: *s + inc });
            }
            None => {
                trace.status = LevelStatus::Stalled;
                break;
            }
        }
    }
    trace.final_energy = current.energy;
    trace.valid_count = current.valid;
    trace.scale = *s;
    Ok(trace)
}
