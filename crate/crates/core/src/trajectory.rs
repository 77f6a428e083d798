//! Trajectories of world-from-camera poses, KITTI-style relative error
//! evaluation and piecewise-constant scale correction.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `RᵀR = I` for loaded poses.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Default evaluation segment lengths in meters.
pub const KITTI_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

/// World-from-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl TrajectoryPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = Self {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Builds from a row-major 3×4 matrix `[R | t]`.
    pub fn from_row_major(v: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        Self::new(rotation, Vector3::new(v[3], v[7], v[11]))
    }

    #[rustfmt::skip]
    pub fn to_row_major(&self) -> [f64; 12] {
        let (r, t) = (&self.rotation, &self.translation);
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    fn validate(&self) -> Result<()> {
        if !self
            .rotation
            .iter()
            .chain(self.translation.iter())
            .all(|x| x.is_finite())
        {
            return Err(Error::Input("pose has non-finite entries".into()));
        }
        let dev = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        if dev > ORTHONORMAL_TOL {
            return Err(Error::Input(format!(
                "rotation not orthonormal (max |RᵀR − I| = {dev:.3e})"
            )));
        }
        Ok(())
    }

    /// `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self⁻¹ · other`: the motion from this pose to `other`.
    pub fn between(&self, other: &Self) -> Self {
        self.inverse().compose(other)
    }

    /// Rotation angle in radians, from `2 sin θ = ‖vee(R − Rᵀ)‖` and
    /// `2 cos θ = tr R − 1`. Exactly zero for symmetric `R`.
    pub fn angle(&self) -> f64 {
        let r = &self.rotation;
        let v = Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        );
        v.norm().atan2(r.trace() - 1.0)
    }
}

/// Mean errors over all segments of one length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentError {
    /// Segment length in meters.
    pub length: f64,
    /// Mean translational error, percent of the segment length.
    pub translational_pct: f64,
    /// Mean rotational error, degrees per 100 m.
    pub rotational_deg_per_100m: f64,
    /// Number of segments averaged.
    pub segments: usize,
}

/// Accumulated path length along the trajectory positions.
pub fn path_distances(poses: &[TrajectoryPose]) -> Vec<f64> {
    let mut dist = Vec::with_capacity(poses.len());
    let mut acc = 0.0;
    for (i, p) in poses.iter().enumerate() {
        if i > 0 {
            acc += (p.translation - poses[i - 1].translation).norm();
        }
        dist.push(acc);
    }
    dist
}

/// For every start frame and length `L`, the segment ends at the first frame
/// whose accumulated ground-truth distance from the start is at least `L`.
/// Lengths no segment fits are omitted from the result.
pub fn relative_errors(
    gt: &[TrajectoryPose],
    est: &[TrajectoryPose],
    lengths: &[f64],
) -> Result<Vec<SegmentError>> {
    if gt.len() != est.len() {
        return Err(Error::Input(format!(
            "trajectories differ in length: {} ground-truth vs {} estimated poses",
            gt.len(),
            est.len()
        )));
    }
    if gt.len() < 2 {
        return Err(Error::Input("trajectories need at least 2 poses".into()));
    }
    if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::Input(format!("segment length {l} must be positive")));
    }
    let dist = path_distances(gt);

    let mut out = Vec::new();
    for &len in lengths {
        let errs: Vec<(f64, f64)> = (0..gt.len())
            .into_par_iter()
            .filter_map(|i| {
                let target = dist[i] + len;
                let j = i + dist[i..].partition_point(|&d| d < target);
                (j < gt.len()).then(|| {
                    let gt_rel = gt[i].between(&gt[j]);
                    let est_rel = est[i].between(&est[j]);
                    let e = gt_rel.between(&est_rel);
                    (
                        e.translation.norm() / len * 100.0,
                        e.angle().to_degrees() / len * 100.0,
                    )
                })
            })
            .collect();
        if errs.is_empty() {
            continue;
        }
        let n = errs.len() as f64;
        out.push(SegmentError {
            length: len,
            translational_pct: errs.iter().map(|e| e.0).sum::<f64>() / n,
            rotational_deg_per_100m: errs.iter().map(|e| e.1).sum::<f64>() / n,
            segments: errs.len(),
        });
    }
    Ok(out)
}

/// Segment-weighted mean over all lengths as `(t_rel %, r_rel deg/100 m)`,
/// i.e. the mean over every evaluated segment.
pub fn overall_average(errors: &[SegmentError]) -> Option<(f64, f64)> {
    let n: usize = errors.iter().map(|e| e.segments).sum();
    if n == 0 {
        return None;
    }
    let w = |f: fn(&SegmentError) -> f64| {
        errors.iter().map(|e| f(e) * e.segments as f64).sum::<f64>() / n as f64
    };
    Some((w(|e| e.translational_pct), w(|e| e.rotational_deg_per_100m)))
}

/// Rescales relative translations with the scale of the most recent keyframe
/// (`scales[0]` before the first one), keeps rotations, and re-chains from
/// the first pose. Scaling a body-frame step `Rᵀ(t₁ − t₀)` and mapping it back
/// equals scaling the world-frame step, which is what is computed.
pub fn apply_scale_correction(
    poses: &[TrajectoryPose],
    scales: &[f64],
    keyframes: &[usize],
) -> Result<Vec<TrajectoryPose>> {
    if scales.len() != keyframes.len() {
        return Err(Error::Input(format!(
            "{} scales for {} keyframes",
            scales.len(),
            keyframes.len()
        )));
    }
    if scales.is_empty() {
        return Err(Error::Input(
            "at least one keyframe scale is required".into(),
        ));
    }
    if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::Input(format!("scale {s} must be positive")));
    }
    if keyframes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input(
            "keyframe indices must be strictly ascending".into(),
        ));
    }
    if let Some(&k) = keyframes.last().filter(|&&k| k >= poses.len()) {
        return Err(Error::Input(format!(
            "keyframe index {k} out of range for {} poses",
            poses.len()
        )));
    }

    let Some(first) = poses.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(poses.len());
    out.push(*first);
    let mut kf = 0;
    for i in 1..poses.len() {
        let from = i - 1;
        while kf + 1 < keyframes.len() && keyframes[kf + 1] <= from {
            kf += 1;
        }
        let step = poses[i].translation - poses[from].translation;
        out.push(TrajectoryPose {
            rotation: poses[i].rotation,
            translation: out[from].translation + step * scales[kf],
        });
    }
    Ok(out)
}
