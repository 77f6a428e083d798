//! Pinhole camera model and the scaled stereo projection.
//!
//! A point hosted in the reference camera is described by its pixel and an
//! inverse depth that is only known up to the monocular scale `s`. The scaled
//! projection places the back-projected point at `s` times its nominal
//! position, moves it into the second camera with the fixed stereo transform
//! and projects it there:
//!
//! ```text
//! u1 = (s·fx·x' + fx·tx) / (s·z' + tz) + cx
//! v1 = (s·fy·y' + fy·ty) / (s·z' + tz) + cy
//! ```
//!
//! where `(x', y', z')` is the nominal point rotated into the second camera's
//! orientation. Only the translation breaks the scale ambiguity; as `s` grows
//! the baseline's influence vanishes.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible depth (meters) in front of a camera.
pub const MIN_DEPTH: f64 = 1e-6;

pub type Point3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidIntrinsics("non-finite parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::InvalidIntrinsics(format!(
                "cx = {} outside (0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidIntrinsics(format!(
                "cy = {} outside (0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    /// Intrinsics of pyramid level `level`, using the pixel-center convention
    /// so that `(u + 0.5) / 2^l - 0.5` maps level-0 pixels onto level `l`.
    pub fn at_level(&self, level: usize) -> Self {
        let scale = (1u64 << level) as f64;
        Self {
            fx: self.fx / scale,
            fy: self.fy / scale,
            cx: (self.cx + 0.5) / scale - 0.5,
            cy: (self.cy + 0.5) / scale - 0.5,
            width: self.width >> level,
            height: self.height >> level,
        }
    }

    /// True when `p` lies at least `border` pixels inside the image.
    pub fn contains(&self, p: Pixel, border: f64) -> bool {
        p.u >= border
            && p.v >= border
            && p.u <= self.width as f64 - 1.0 - border
            && p.v <= self.height as f64 - 1.0 - border
    }
}

/// Maps a level-0 pixel coordinate onto pyramid level `level`.
pub fn pixel_at_level(p: Pixel, level: usize) -> Pixel {
    let scale = (1u64 << level) as f64;
    Pixel::new((p.u + 0.5) / scale - 0.5, (p.v + 0.5) / scale - 0.5)
}

/// Rigid transform from the reference camera into the second stereo camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoExtrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl StereoExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidExtrinsics("non-finite entry".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho > 1e-9 {
            return Err(Error::InvalidExtrinsics(format!(
                "rotation not orthonormal (max |R^T R - I| = {ortho:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidExtrinsics(format!(
                "rotation determinant {det} != +1"
            )));
        }
        if translation.norm() <= 0.0 {
            return Err(Error::InvalidExtrinsics("zero baseline".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Rectified pair: identity rotation, second camera `baseline` meters to
    /// the right of the reference camera.
    pub fn rectified(baseline: f64) -> Result<Self> {
        Self::new(Matrix3::identity(), Vector3::new(-baseline, 0.0, 0.0))
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn baseline(&self) -> f64 {
        self.translation.norm()
    }

    /// Identity rotation with the second camera displaced along +x, so
    /// matches lie on the same row at smaller `u`.
    pub fn is_rectified(&self) -> bool {
        let t = &self.translation;
        self.rotation == Matrix3::identity() && t.x < 0.0 && t.y == 0.0 && t.z == 0.0
    }

    pub fn transform(&self, x: &Point3) -> Point3 {
        self.rotation * x + self.translation
    }
}

pub fn back_project(p: Pixel, inv_depth: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !(inv_depth.is_finite() && inv_depth > 0.0) {
        return Err(Error::InvalidDepth(inv_depth));
    }
    let z = 1.0 / inv_depth;
    Ok(Vector3::new(
        (p.u - k.cx) / k.fx * z,
        (p.v - k.cy) / k.fy * z,
        z,
    ))
}

pub fn project(x: &Point3, k: &CameraIntrinsics) -> Result<Pixel> {
    if !(x.z > MIN_DEPTH) {
        return Err(Error::BehindCamera { z: x.z });
    }
    Ok(Pixel::new(k.fx * x.x / x.z + k.cx, k.fy * x.y / x.z + k.cy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledProjection {
    pub pixel: Pixel,
    /// Nominal point rotated into the second camera, `R · Π0⁻¹(p, d)`.
    pub rotated: Point3,
    /// Depth in the second camera, `s·z' + tz`.
    pub depth: f64,
}

/// Closed-form projection of a scaled point into the second camera.
pub fn project_scaled(
    p: Pixel,
    inv_depth: f64,
    s: f64,
    extrinsics: &StereoExtrinsics,
    k0: &CameraIntrinsics,
    k1: &CameraIntrinsics,
) -> Result<ScaledProjection> {
    let rotated = extrinsics.rotation() * back_project(p, inv_depth, k0)?;
    let pixel = project_rotated(&rotated, s, extrinsics.translation(), k1)?;
    Ok(ScaledProjection {
        pixel,
        rotated,
        depth: s * rotated.z + extrinsics.translation().z,
    })
}

/// Scaled projection of an already rotated point.
#[inline]
pub fn project_rotated(
    rotated: &Point3,
    s: f64,
    t: &Vector3<f64>,
    k1: &CameraIntrinsics,
) -> Result<Pixel> {
    let depth = s * rotated.z + t.z;
    if !(depth > MIN_DEPTH) {
        return Err(Error::BehindCamera { z: depth });
    }
    Ok(Pixel::new(
        (s * k1.fx * rotated.x + k1.fx * t.x) / depth + k1.cx,
        (s * k1.fy * rotated.y + k1.fy * t.y) / depth + k1.cy,
    ))
}

/// Derivative of the scaled projection with respect to the scale:
///
/// ```text
/// ∂Π1/∂s = 1/(s·z' + tz)² · [fx·x'·tz − fx·z'·tx, fy·y'·tz − fy·z'·ty]
/// ```
#[inline]
pub fn jacobian_scale(
    rotated: &Point3,
    s: f64,
    t: &Vector3<f64>,
    k1: &CameraIntrinsics,
) -> Result<Vector2<f64>> {
    let depth = s * rotated.z + t.z;
    if !(depth > MIN_DEPTH) {
        return Err(Error::DegenerateGeometry { denom: depth });
    }
    let inv_sq = 1.0 / (depth * depth);
    Ok(Vector2::new(
        (k1.fx * rotated.x * t.z - k1.fx * rotated.z * t.x) * inv_sq,
        (k1.fy * rotated.y * t.z - k1.fy * rotated.z * t.y) * inv_sq,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    fn k(fx: f64, fy: f64, cx: f64, cy: f64) -> CameraIntrinsics {
        CameraIntrinsics::new(fx, fy, cx, cy, 640, 480).unwrap()
    }

    fn axis_angle(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
        let axis = Unit::new_normalize(Vector3::from(axis));
        *Rotation3::from_axis_angle(&axis, angle).matrix()
    }

    #[test]
    fn back_project_principal_ray() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        let x = back_project(Pixel::new(320.0, 240.0), 1.0, &k).unwrap();
        assert_eq!(x, Vector3::new(0.0, 0.0, 1.0));
        let x = back_project(Pixel::new(720.0, 240.0), 0.5, &k).unwrap();
        assert_eq!(x, Vector3::new(2.0, 0.0, 2.0));
    }

    #[test]
    fn back_project_round_trip() {
        let k = k(450.0, 455.0, 320.0, 240.0);
        let p = Pixel::new(100.5, 200.25);
        let x = back_project(p, 0.2, &k).unwrap();
        assert_eq!(x.z, 5.0);
        let q = project(&x, &k).unwrap();
        assert!((q.u - p.u).abs() < 1e-9 && (q.v - p.v).abs() < 1e-9);
    }

    #[test]
    fn back_project_rejects_bad_depth() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                back_project(Pixel::new(1.0, 1.0), d, &k),
                Err(Error::InvalidDepth(_))
            ));
        }
    }

    #[test]
    fn project_examples() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        let p = project(&Vector3::new(0.0, 0.0, 5.0), &k).unwrap();
        assert_eq!(p, Pixel::new(320.0, 240.0));
        let p = project(&Vector3::new(1.0, 0.0, 1.0), &k).unwrap();
        assert_eq!(p, Pixel::new(720.0, 240.0));
        assert!(matches!(
            project(&Vector3::new(0.0, 0.0, 1e-7), &k),
            Err(Error::BehindCamera { .. })
        ));
        assert!(project(&Vector3::new(0.0, 0.0, -1.0), &k).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 10.0, 10.0, 20, 20).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 20.0, 10.0, 20, 20).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 10.0, 0.0, 20, 20).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 10.0, 10.0, 20, 20).is_ok());
    }

    #[test]
    fn level_intrinsics_match_pixel_mapping() {
        let k0 = k(400.0, 410.0, 319.5, 239.5);
        let x = Vector3::new(0.3, -0.2, 4.0);
        let p0 = project(&x, &k0).unwrap();
        for level in 1..4 {
            let kl = k0.at_level(level);
            let pl = project(&x, &kl).unwrap();
            let expected = pixel_at_level(p0, level);
            assert!((pl.u - expected.u).abs() < 1e-12);
            assert!((pl.v - expected.v).abs() < 1e-12);
        }
        assert_eq!(k0.at_level(2).width, 160);
        assert_eq!(k0.at_level(2).height, 120);
    }

    #[test]
    fn extrinsics_validation() {
        assert!(StereoExtrinsics::rectified(0.5).is_ok());
        assert!(StereoExtrinsics::new(Matrix3::identity(), Vector3::zeros()).is_err());
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0;
        assert!(StereoExtrinsics::new(r, Vector3::new(1.0, 0.0, 0.0)).is_err());
        r[(0, 0)] = 1.001;
        assert!(StereoExtrinsics::new(r, Vector3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn rectified_disparity() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        let t = StereoExtrinsics::rectified(0.5).unwrap();
        let proj = project_scaled(Pixel::new(320.0, 240.0), 1.0, 1.0, &t, &k, &k).unwrap();
        assert!((proj.pixel.u - 120.0).abs() < 1e-12);
        assert!((proj.pixel.v - 240.0).abs() < 1e-12);
    }

    #[test]
    fn large_scale_limit_removes_baseline() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        let r = axis_angle([0.2, 1.0, -0.3], 0.05);
        let t = StereoExtrinsics::new(r, Vector3::new(-0.5, 0.02, 0.01)).unwrap();
        let p = Pixel::new(300.0, 200.0);
        let far = project_scaled(p, 0.3, 1e6, &t, &k, &k).unwrap().pixel;
        let limit = project(&(r * back_project(p, 0.3, &k).unwrap()), &k).unwrap();
        assert!((far.u - limit.u).abs() < 1e-3);
        assert!((far.v - limit.v).abs() < 1e-3);
    }

    #[test]
    fn scaled_projection_matches_composition() {
        let k0 = k(450.0, 455.0, 320.0, 240.0);
        let k1 = k(440.0, 445.0, 318.0, 242.0);
        let r = axis_angle([1.0, 2.0, 3.0], 0.1);
        let t = StereoExtrinsics::new(r, Vector3::new(-0.4, 0.01, 0.02)).unwrap();
        let p = Pixel::new(350.0, 250.0);
        let fast = project_scaled(p, 0.25, 1.7, &t, &k0, &k1).unwrap().pixel;

        // Independent composition: back-project, scale, rigid transform, project.
        let x = back_project(p, 0.25, &k0).unwrap() * 1.7;
        let slow = project(&t.transform(&x), &k1).unwrap();
        assert!((fast.u - slow.u).abs() < 1e-9);
        assert!((fast.v - slow.v).abs() < 1e-9);
    }

    #[test]
    fn scaled_projection_identity_reduces_to_project() {
        let k0 = k(450.0, 455.0, 320.0, 240.0);
        let k1 = k(430.0, 420.0, 300.0, 250.0);
        // Identity rotation, translation too small to matter at 1e-12 but nonzero.
        let t = StereoExtrinsics::new(Matrix3::identity(), Vector3::new(1e-100, 0.0, 0.0)).unwrap();
        let p = Pixel::new(123.0, 321.0);
        let a = project_scaled(p, 0.4, 1.0, &t, &k0, &k1).unwrap().pixel;
        let b = project(&back_project(p, 0.4, &k0).unwrap(), &k1).unwrap();
        assert!((a.u - b.u).abs() < 1e-12 && (a.v - b.v).abs() < 1e-12);
    }

    #[test]
    fn scaled_projection_behind_camera() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        // Second camera 1 m ahead of the reference camera: small scales put the
        // point behind it.
        let t = StereoExtrinsics::new(Matrix3::identity(), Vector3::new(0.0, 0.0, -1.0)).unwrap();
        let r = project_scaled(Pixel::new(320.0, 240.0), 0.5, 0.1, &t, &k, &k);
        assert!(matches!(r, Err(Error::BehindCamera { .. })));
    }

    #[test]
    fn jacobian_rectified_closed_form() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        let b = 0.5;
        let t = Vector3::new(-b, 0.0, 0.0);
        let x = Vector3::new(0.3, -0.1, 4.0);
        let s = 1.3;
        let j = jacobian_scale(&x, s, &t, &k).unwrap();
        assert!((j.x - 400.0 * b / (s * s * x.z)).abs() < 1e-12);
        assert_eq!(j.y, 0.0);
    }

    #[test]
    fn jacobian_vanishes_for_translation_along_point() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        let x = Vector3::new(0.3, -0.1, 4.0);
        let t = x * 0.1;
        let j = jacobian_scale(&x, 2.0, &t, &k).unwrap();
        assert!(j.norm() < 1e-12);

        // The projection itself does not move with s in that configuration.
        let step = 1e-6;
        let a = project_rotated(&x, 2.0 + step, &t, &k).unwrap();
        let b = project_rotated(&x, 2.0 - step, &t, &k).unwrap();
        assert!(((a.u - b.u) / (2.0 * step)).abs() < 1e-6);
    }

    #[test]
    fn jacobian_degenerate_denominator() {
        let k = k(400.0, 400.0, 320.0, 240.0);
        let x = Vector3::new(0.0, 0.0, 1.0);
        let t = Vector3::new(0.1, 0.0, -2.0);
        assert!(matches!(
            jacobian_scale(&x, 2.0, &t, &k),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    proptest! {
        #[test]
        fn project_back_project_round_trip(
            u in 0.0f64..640.0,
            v in 0.0f64..480.0,
            d in 0.01f64..10.0,
        ) {
            let k = k(450.0, 455.0, 320.0, 240.0);
            let q = project(&back_project(Pixel::new(u, v), d, &k).unwrap(), &k).unwrap();
            prop_assert!((q.u - u).abs() < 1e-9 && (q.v - v).abs() < 1e-9);
        }

        #[test]
        fn jacobian_matches_central_difference(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            angle in 0.0f64..0.2,
            tx in -0.8f64..-0.1, ty in -0.05f64..0.05, tz in -0.05f64..0.05,
            u in 50.0f64..590.0, v in 50.0f64..430.0,
            d in 0.05f64..1.0, s in 0.3f64..4.0,
        ) {
            let k0 = k(400.0, 400.0, 320.0, 240.0);
            let k1 = k(410.0, 405.0, 322.0, 238.0);
            let axis = if ax.abs() + ay.abs() + az.abs() < 1e-3 { [0.0, 0.0, 1.0] } else { [ax, ay, az] };
            let t = StereoExtrinsics::new(axis_angle(axis, angle), Vector3::new(tx, ty, tz)).unwrap();
            let proj = project_scaled(Pixel::new(u, v), d, s, &t, &k0, &k1).unwrap();
            let j = jacobian_scale(&proj.rotated, s, t.translation(), &k1).unwrap();
            let h = 1e-6;
            let plus = project_rotated(&proj.rotated, s + h, t.translation(), &k1).unwrap();
            let minus = project_rotated(&proj.rotated, s - h, t.translation(), &k1).unwrap();
            let fd = Vector2::new((plus.u - minus.u) / (2.0 * h), (plus.v - minus.v) / (2.0 * h));
            let rel = (fd - j).norm() / j.norm().max(1e-3);
            prop_assert!(rel < 1e-4, "rel = {rel}, j = {j:?}, fd = {fd:?}");
        }
    }
}
