use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use scale_opt::geometry::{back_project, pixel_at_level, project, project_scaled};
use scale_opt::{CameraIntrinsics, GrayImage, ImagePyramid, Pixel, StereoExtrinsics};

fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(420.0, 415.0, 319.5, 239.5, 640, 480).unwrap()
}

fn rotation(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let axis = if axis.iter().map(|a| a.abs()).sum::<f64>() < 1e-3 {
        [0.0, 0.0, 1.0]
    } else {
        axis
    };
    *Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle).matrix()
}

fn close(a: Pixel, b: Pixel, tol: f64) -> bool {
    (a.u - b.u).abs() <= tol * a.u.abs().max(1.0) && (a.v - b.v).abs() <= tol * a.v.abs().max(1.0)
}

proptest! {
    #[test]
    fn projection_ignores_global_scale(
        x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.1f64..50.0,
        s in 1e-3f64..1e3,
    ) {
        let k = intrinsics();
        let p = Vector3::new(x, y, z);
        let a = project(&p, &k).unwrap();
        let b = project(&(s * p), &k).unwrap();
        prop_assert!(close(a, b, 1e-12), "{a:?} vs {b:?}");
    }

    #[test]
    fn unit_scale_equals_rigid_transform_then_project(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0, angle in 0.0f64..0.3,
        tx in -1.0f64..-0.05, ty in -0.1f64..0.1, tz in -0.1f64..0.1,
        u in 0.0f64..639.0, v in 0.0f64..479.0, d in 0.05f64..2.0,
    ) {
        let k0 = intrinsics();
        let k1 = CameraIntrinsics::new(400.0, 402.0, 321.0, 238.0, 640, 480).unwrap();
        let t = StereoExtrinsics::new(rotation([ax, ay, az], angle), Vector3::new(tx, ty, tz)).unwrap();
        let p = Pixel::new(u, v);
        let scaled = project_scaled(p, d, 1.0, &t, &k0, &k1).unwrap();
        let direct = project(&t.transform(&back_project(p, d, &k0).unwrap()), &k1).unwrap();
        prop_assert!(close(scaled.pixel, direct, 1e-9), "{:?} vs {direct:?}", scaled.pixel);
    }

    #[test]
    fn pyramid_intrinsics_follow_the_pixel_mapping(
        x in -3.0f64..3.0, y in -2.0f64..2.0, z in 1.0f64..20.0, level in 0usize..5,
    ) {
        let k = intrinsics();
        let p = Vector3::new(x, y, z);
        let coarse = project(&p, &k.at_level(level)).unwrap();
        let mapped = pixel_at_level(project(&p, &k).unwrap(), level);
        prop_assert!(close(coarse, mapped, 1e-12));
    }

    #[test]
    fn pyramid_levels_agree_on_affine_images(
        a in 0.0f64..100.0, b in -0.2f64..0.2, c in -0.2f64..0.2,
        u in 16.0f64..110.0, v in 16.0f64..110.0,
    ) {
        let img = GrayImage::from_fn(128, 128, |x, y| a + b * x as f64 + c * y as f64);
        let k = CameraIntrinsics::new(100.0, 100.0, 63.5, 63.5, 128, 128).unwrap();
        let pyr = ImagePyramid::build(&img, &k, 4).unwrap();
        let expected = a + b * u + c * v;
        for level in 0..4 {
            let q = pixel_at_level(Pixel::new(u, v), level);
            let got = pyr.level(level).sample_bilinear(q).unwrap();
            prop_assert!((got - expected).abs() < 1e-9, "level {level}: {got} vs {expected}");
        }
    }

    #[test]
    fn pyramids_compose(seed in 0u64..1000) {
        let img = GrayImage::from_fn(96, 64, |x, y| ((x * 31 + y * 17 + seed as usize) % 97) as f64);
        let k = CameraIntrinsics::new(80.0, 80.0, 47.5, 31.5, 96, 64).unwrap();
        let full = ImagePyramid::build(&img, &k, 4).unwrap();
        let again = ImagePyramid::build(&img, &k, 4).unwrap();
        let tail = ImagePyramid::build(full.level(1), full.intrinsics(1), 3).unwrap();
        for level in 0..3 {
            prop_assert_eq!(tail.level(level), full.level(level + 1));
            prop_assert_eq!(tail.intrinsics(level), full.intrinsics(level + 1));
        }
        for level in 0..4 {
            prop_assert_eq!(again.level(level), full.level(level));
        }
    }
}
