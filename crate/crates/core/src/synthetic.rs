//! Ground-truth stereo scenes and the brute-force scale oracle.
//!
//! The texture is painted onto the surface through the reference camera: a
//! surface point seen by camera 0 at pixel `(u, v)` carries intensity
//! `T(u, v)`. The reference image is `T` sampled at pixel centers; the second
//! image is rendered by inverse warping, intersecting each of its pixel rays
//! with the surface and looking the hit point up in `T`. Both images are
//! therefore photo-consistent up to interpolation and the added noise.

use nalgebra::{Matrix3, Vector3};
use rand::seq::index::sample_weighted;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_scaled, CameraIntrinsics, Pixel, StereoExtrinsics, MIN_DEPTH};
use crate::image::{GrayImage, ImagePyramid};
use crate::optimizer::{huber_energy, KeyframeBundle, OptimizerConfig, PointWeight, ScalePoint};

const TEXTURE_STREAM: u64 = 1;
const NOISE0_STREAM: u64 = 2;
const NOISE1_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Plane `z = depth` in the reference camera frame.
    FrontoParallel { depth: f64 },
    /// Plane `n · X = offset` in the reference camera frame.
    InclinedPlane { normal: [f64; 3], offset: f64 },
    /// `z = base_depth + amplitude · sin(2πx/λ) · cos(2πy/λ)`.
    HeightField {
        base_depth: f64,
        amplitude: f64,
        wavelength: f64,
    },
}

impl Geometry {
    /// Plane tilted away from the camera, passing 5 m in front of it.
    pub fn standard_inclined() -> Self {
        Geometry::InclinedPlane {
            normal: [0.3, 0.2, 1.0],
            offset: 5.0,
        }
    }

    /// Gentle bumps of ±0.25 m around 5 m, 4 m wavelength.
    pub fn standard_height_field() -> Self {
        Geometry::HeightField {
            base_depth: 5.0,
            amplitude: 0.25,
            wavelength: 4.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Geometry::FrontoParallel { depth } => depth > MIN_DEPTH,
            Geometry::InclinedPlane { normal, offset } => {
                let n = Vector3::from(normal);
                n.norm() > 0.0 && offset.is_finite()
            }
            Geometry::HeightField {
                base_depth,
                amplitude,
                wavelength,
            } => {
                // Slope bound keeps every viewing ray's intersection unique.
                wavelength > 0.0
                    && amplitude >= 0.0
                    && base_depth - amplitude > MIN_DEPTH
                    && 2.0 * std::f64::consts::PI * amplitude / wavelength < 0.5
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid geometry {self:?}")))
        }
    }

    /// Ray parameter of the first intersection with the surface, if it lies in
    /// front of the ray origin.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Geometry::FrontoParallel { depth } => {
                let t = (depth - origin.z) / dir.z;
                (t > 0.0 && t.is_finite()).then_some(t)
            }
            Geometry::InclinedPlane { normal, offset } => {
                let n = Vector3::from(normal);
                let t = (offset - n.dot(origin)) / n.dot(dir);
                (t > 0.0 && t.is_finite()).then_some(t)
            }
            Geometry::HeightField {
                base_depth,
                amplitude,
                wavelength,
            } => {
                if dir.z <= 0.0 {
                    return None;
                }
                let k = 2.0 * std::f64::consts::PI / wavelength;
                // g(t) = z(t) − h(x(t), y(t)) is increasing along forward rays.
                let g = |t: f64| {
                    let p = origin + dir * t;
                    p.z - base_depth - amplitude * (k * p.x).sin() * (k * p.y).cos()
                };
                let dg = |t: f64| {
                    let p = origin + dir * t;
                    let hx = amplitude * k * (k * p.x).cos() * (k * p.y).cos();
                    let hy = -amplitude * k * (k * p.x).sin() * (k * p.y).sin();
                    dir.z - hx * dir.x - hy * dir.y
                };
                let mut lo = (base_depth - amplitude - origin.z) / dir.z;
                let mut hi = (base_depth + amplitude - origin.z) / dir.z;
                if g(lo) > 0.0 || g(hi) < 0.0 {
                    return None;
                }
                let mut t = 0.5 * (lo + hi);
                for _ in 0..100 {
                    let v = g(t);
                    if v.abs() < 1e-13 {
                        break;
                    }
                    if v > 0.0 {
                        hi = t;
                    } else {
                        lo = t;
                    }
                    let d = dg(t);
                    let newton = t - v / d;
                    t = if d > 0.0 && newton > lo && newton < hi {
                        newton
                    } else {
                        0.5 * (lo + hi)
                    };
                    if hi - lo < 1e-14 {
                        break;
                    }
                }
                (t > 0.0).then_some(t)
            }
        }
    }
}

const OCTAVE_WEIGHTS: [f64; 3] = [1.0, 2.0, 4.0];
// sqrt(1 + 4 + 16)
const OCTAVE_NORM: f64 = 4.582_575_694_955_84;

fn default_cell() -> f64 {
    4.0
}
fn default_contrast() -> f64 {
    40.0
}
fn default_amplitude() -> f64 {
    60.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    /// Three octaves (cell, 2·cell, 4·cell pixels) of seeded white noise,
    /// each blurred with a 5×5 box and reconstructed with cubic B-splines.
    /// Octave amplitudes grow 1:2:4 with cell size (a pink spectrum), which
    /// keeps coarse pyramid levels textured.
    BandLimited {
        #[serde(default = "default_cell")]
        cell_px: f64,
        #[serde(default = "default_contrast")]
        contrast: f64,
    },
    /// Vertical stripes: `128 + a·sin(2πu/period)`.
    Sinusoid {
        period: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    Checkerboard {
        period: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

impl Texture {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Texture::BandLimited { cell_px, contrast } => cell_px >= 1.0 && contrast >= 0.0,
            Texture::Sinusoid { period, amplitude }
            | Texture::Checkerboard { period, amplitude } => {
                period >= 2.0 && (0.0..=127.5).contains(&amplitude)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid texture {self:?}")))
        }
    }
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Declarative description of a synthetic stereo scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub geometry: Geometry,
    pub texture: Texture,
    /// Shared by both cameras.
    pub intrinsics: CameraIntrinsics,
    /// Rotation from the reference camera into the second camera, row-major.
    #[serde(default = "identity_rows")]
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Factor relating exported monocular inverse depths to metric ones.
    pub s_true: f64,
}

impl SceneConfig {
    /// 640×480, fx = fy = 400, rectified 0.5 m baseline, band-limited texture
    /// on a fronto-parallel plane 5 m away, s_true = 2.37.
    pub fn standard() -> Self {
        Self {
            geometry: Geometry::FrontoParallel { depth: 5.0 },
            texture: Texture::BandLimited {
                cell_px: default_cell(),
                contrast: default_contrast(),
            },
            intrinsics: CameraIntrinsics {
                fx: 400.0,
                fy: 400.0,
                cx: 319.5,
                cy: 239.5,
                width: 640,
                height: 480,
            },
            rotation: identity_rows(),
            translation: [-0.5, 0.0, 0.0],
            noise_sigma: 0.0,
            seed: 7,
            s_true: 2.37,
        }
    }

    /// Standard rig with a coarser band-limited texture (6 px cells). From
    /// s0 = s_true/3 the 4-level pyramid converges and a single level does not.
    pub fn wide_basin() -> Self {
        Self {
            texture: Texture::BandLimited {
                cell_px: 6.0,
                contrast: default_contrast(),
            },
            ..Self::standard()
        }
    }

    /// Period-8 vertical stripes on the standard plane with unit intensity
    /// noise. The 40 px disparity spans five periods, so every patch has
    /// several equally good matches along the epipolar line.
    pub fn repetitive() -> Self {
        Self {
            texture: Texture::Sinusoid {
                period: 8.0,
                amplitude: default_amplitude(),
            },
            noise_sigma: 1.0,
            ..Self::standard()
        }
    }

    /// Three geometries times {band-limited, long-period sinusoid}.
    pub fn canonical() -> Vec<(String, Self)> {
        let geometries = [
            ("fronto", Geometry::FrontoParallel { depth: 5.0 }),
            ("inclined", Geometry::standard_inclined()),
            ("heightfield", Geometry::standard_height_field()),
        ];
        let textures = [
            ("bandlimited", Self::standard().texture),
            (
                "sinusoid",
                Texture::Sinusoid {
                    period: 256.0,
                    amplitude: default_amplitude(),
                },
            ),
        ];
        let mut out = Vec::new();
        for (gn, g) in geometries {
            for (tn, t) in textures {
                let cfg = Self {
                    geometry: g,
                    texture: t,
                    ..Self::standard()
                };
                out.push((format!("{gn}-{tn}"), cfg));
            }
        }
        out
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.rotation[r][c])
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    /// The rig as a validated transform. Fails for a zero baseline, which
    /// `render_scene` accepts.
    pub fn extrinsics(&self) -> Result<StereoExtrinsics> {
        StereoExtrinsics::new(self.rotation_matrix(), self.translation_vector())
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.geometry.validate()?;
        self.texture.validate()?;
        let r = self.rotation_matrix();
        if (r.transpose() * r - Matrix3::identity()).amax() > 1e-9
            || (r.determinant() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config("rotation is not a proper rotation".into()));
        }
        if self.translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("non-finite translation".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        if !(self.s_true > 0.0 && self.s_true.is_finite()) {
            return Err(Error::Config("s_true must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub config: SceneConfig,
    pub img0: GrayImage,
    pub img1: GrayImage,
    /// True metric depth per reference pixel, row-major.
    pub depth0: Vec<f64>,
    pub s_true: f64,
}

impl SyntheticScene {
    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.config.intrinsics
    }

    pub fn depth_at(&self, x: usize, y: usize) -> f64 {
        self.depth0[y * self.img0.width() + x]
    }

    /// Builds the optimizer input for `points` with `levels` pyramid levels.
    pub fn bundle(&self, points: Vec<ScalePoint>, levels: usize) -> Result<KeyframeBundle> {
        let k = self.intrinsics();
        KeyframeBundle::new(
            ImagePyramid::build(&self.img0, k, levels)?,
            ImagePyramid::build(&self.img1, k, levels)?,
            self.config.extrinsics()?,
            points,
        )
    }
}

/// Continuous texture over reference-camera pixel coordinates.
struct TextureField {
    texture: Texture,
    octaves: Vec<Lattice>,
}

struct Lattice {
    cell: f64,
    origin: (f64, f64),
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl Lattice {
    fn new(cell: f64, range: ((f64, f64), (f64, f64)), rng: &mut ChaCha8Rng) -> Self {
        const BOX: usize = 5;
        let ((x0, x1), (y0, y1)) = range;
        let nx = ((x1 - x0) / cell).ceil() as usize + 4;
        let ny = ((y1 - y0) / cell).ceil() as usize + 4;
        let (wx, wy) = (nx + BOX - 1, ny + BOX - 1);
        let noise: Vec<f64> = (0..wx * wy).map(|_| StandardNormal.sample(rng)).collect();
        // 5×5 box blur, rescaled back to unit variance.
        let mut values = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let mut acc = 0.0;
                for dj in 0..BOX {
                    let row = &noise[(j + dj) * wx + i..(j + dj) * wx + i + BOX];
                    acc += row.iter().sum::<f64>();
                }
                values[j * nx + i] = acc / BOX as f64;
            }
        }
        Self {
            cell,
            origin: (x0 - 2.0 * cell, y0 - 2.0 * cell),
            nx,
            ny,
            values,
        }
    }

    fn eval(&self, u: f64, v: f64) -> f64 {
        let x = (u - self.origin.0) / self.cell;
        let y = (v - self.origin.1) / self.cell;
        let (ix, fx) = (x.floor(), x - x.floor());
        let (iy, fy) = (y.floor(), y - y.floor());
        let wx = bspline_weights(fx);
        let wy = bspline_weights(fy);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let j = (iy as i64 - 1 + b as i64).clamp(0, self.ny as i64 - 1) as usize;
            let row = &self.values[j * self.nx..(j + 1) * self.nx];
            let mut racc = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                let i = (ix as i64 - 1 + a as i64).clamp(0, self.nx as i64 - 1) as usize;
                racc += wxa * row[i];
            }
            acc += wyb * racc;
        }
        acc
    }
}

fn bspline_weights(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        (1.0 - f).powi(3) / 6.0,
        (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0,
        (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0,
        f3 / 6.0,
    ]
}

impl TextureField {
    fn new(texture: Texture, width: usize, height: usize, seed: u64) -> Self {
        let mut octaves = Vec::new();
        if let Texture::BandLimited { cell_px, .. } = texture {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(TEXTURE_STREAM);
            let (w, h) = (width as f64, height as f64);
            let range = ((-w, 2.0 * w), (-h, 2.0 * h));
            for k in 0..3 {
                octaves.push(Lattice::new(cell_px * (1 << k) as f64, range, &mut rng));
            }
        }
        Self { texture, octaves }
    }

    fn eval(&self, u: f64, v: f64) -> f64 {
        let value = match self.texture {
            Texture::BandLimited { contrast, .. } => {
                let sum: f64 = self
                    .octaves
                    .iter()
                    .zip(OCTAVE_WEIGHTS)
                    .map(|(o, w)| w * o.eval(u, v))
                    .sum();
                128.0 + contrast / OCTAVE_NORM * sum
            }
            Texture::Sinusoid { period, amplitude } => {
                128.0 + amplitude * (2.0 * std::f64::consts::PI * u / period).sin()
            }
            Texture::Checkerboard { period, amplitude } => {
                let half = 0.5 * period;
                let parity = ((u / half).floor() + (v / half).floor()).rem_euclid(2.0);
                if parity < 0.5 {
                    128.0 + amplitude
                } else {
                    128.0 - amplitude
                }
            }
        };
        value.clamp(0.0, 255.0)
    }
}

/// Renders both views and the reference depth map. Pure function of the
/// configuration (including its seed).
pub fn render_scene(cfg: &SceneConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    let k = cfg.intrinsics;
    let (w, h) = (k.width, k.height);
    let field = TextureField::new(cfg.texture, w, h, cfg.seed);
    let geometry = cfg.geometry;
    let rt = cfg.rotation_matrix().transpose();
    let center1 = -(rt * cfg.translation_vector());

    let ray = |u: f64, v: f64| Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);

    // Reference view: texture at pixel centers plus the true depth.
    let rows0: Vec<Result<Vec<(f64, f64)>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let (u, v) = (x as f64, y as f64);
                    let d = ray(u, v);
                    let t = geometry
                        .intersect(&Vector3::zeros(), &d)
                        .filter(|&t| t * d.z > MIN_DEPTH)
                        .ok_or_else(|| {
                            Error::Config(format!("geometry behind reference camera at ({x}, {y})"))
                        })?;
                    Ok((field.eval(u, v), t * d.z))
                })
                .collect()
        })
        .collect();

    // Second view by inverse warping into the reference camera.
    let rows1: Vec<Result<Vec<f64>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let d = rt * ray(x as f64, y as f64);
                    let hit = geometry
                        .intersect(&center1, &d)
                        .map(|t| center1 + d * t)
                        .filter(|p| p.z > MIN_DEPTH)
                        .ok_or_else(|| {
                            Error::Config(format!("geometry behind second camera at ({x}, {y})"))
                        })?;
                    let u0 = k.fx * hit.x / hit.z + k.cx;
                    let v0 = k.fy * hit.y / hit.z + k.cy;
                    Ok(field.eval(u0, v0))
                })
                .collect()
        })
        .collect();

    let mut data0 = Vec::with_capacity(w * h);
    let mut depth0 = Vec::with_capacity(w * h);
    for row in rows0 {
        for (i, z) in row? {
            data0.push(i);
            depth0.push(z);
        }
    }
    let mut data1 = Vec::with_capacity(w * h);
    for row in rows1 {
        data1.extend(row?);
    }

    if cfg.noise_sigma > 0.0 {
        add_noise(&mut data0, cfg.noise_sigma, cfg.seed, NOISE0_STREAM);
        add_noise(&mut data1, cfg.noise_sigma, cfg.seed, NOISE1_STREAM);
    }

    Ok(SyntheticScene {
        config: cfg.clone(),
        img0: GrayImage::new(w, h, data0)?,
        img1: GrayImage::new(w, h, data1)?,
        depth0,
        s_true: cfg.s_true,
    })
}

fn add_noise(data: &mut [f64], sigma: f64, seed: u64, stream: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for v in data.iter_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v = (*v + sigma * n).clamp(0.0, 255.0);
    }
}

/// Draws `n` distinct reference pixels with probability proportional to the
/// gradient magnitude and attaches mis-scaled inverse depths
/// `s_true / depth · exp(σ·N(0, 1))`, so the optimal scale is `s_true`.
pub fn sample_points(
    scene: &SyntheticScene,
    n: usize,
    inv_depth_noise: f64,
    seed: u64,
) -> Result<Vec<ScalePoint>> {
    if n == 0 {
        return Err(Error::Input("need at least one point".into()));
    }
    if !(inv_depth_noise >= 0.0) {
        return Err(Error::Input("inverse depth noise must be >= 0".into()));
    }
    let img = &scene.img0;
    let (w, h) = (img.width(), img.height());
    const MARGIN: usize = 2;
    if w <= 2 * MARGIN || h <= 2 * MARGIN {
        return Err(Error::Texture("image too small to sample points".into()));
    }
    let (iw, ih) = (w - 2 * MARGIN, h - 2 * MARGIN);
    let grad: Vec<f64> = (0..iw * ih)
        .map(|i| {
            let (x, y) = (i % iw + MARGIN, i / iw + MARGIN);
            let gx = 0.5 * (img.get(x + 1, y) - img.get(x - 1, y));
            let gy = 0.5 * (img.get(x, y + 1) - img.get(x, y - 1));
            (gx * gx + gy * gy).sqrt()
        })
        .collect();
    let textured = grad.iter().filter(|&&g| g > 0.0).count();
    if textured < n {
        return Err(Error::Texture(format!(
            "{textured} pixels with nonzero gradient, {n} points requested"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample_weighted(&mut rng, grad.len(), |i| grad[i], n)
        .map_err(|e| Error::Texture(format!("weighted sampling failed: {e}")))?
        .into_vec();
    picked.sort_unstable();

    Ok(picked
        .into_iter()
        .map(|i| {
            let (x, y) = (i % iw + MARGIN, i / iw + MARGIN);
            let mut inv_depth = scene.s_true / scene.depth_at(x, y);
            if inv_depth_noise > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                inv_depth *= (inv_depth_noise * z).exp();
            }
            ScalePoint {
                host_pixel: Pixel::new(x as f64, y as f64),
                inv_depth,
                host_intensity: img.get(x, y),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub scale: f64,
    /// `None` when fewer than `min_valid_points` points were valid.
    pub energy: Option<f64>,
    pub valid_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub best_scale: f64,
    pub best_index: usize,
    pub curve: Vec<EnergySample>,
}

impl BruteForceResult {
    /// Log-spacing between neighboring grid scales.
    pub fn log_cell(&self) -> f64 {
        let n = self.curve.len();
        (self.curve[n - 1].scale / self.curve[0].scale).ln() / (n - 1) as f64
    }
}

/// Full-resolution scale energy of the bundle, evaluated point by point
/// without the optimizer's accumulation machinery.
pub fn reference_energy(bundle: &KeyframeBundle, s: f64, cfg: &OptimizerConfig) -> (f64, usize) {
    let k0 = bundle.pyr0().intrinsics(0);
    let k1 = bundle.pyr1().intrinsics(0);
    let img0 = bundle.pyr0().level(0);
    let img1 = bundle.pyr1().level(0);
    let mut energy = 0.0;
    let mut valid = 0;
    for p in bundle.points() {
        let Ok(proj) = project_scaled(p.host_pixel, p.inv_depth, s, bundle.extrinsics(), k0, k1)
        else {
            continue;
        };
        if !k1.contains(proj.pixel, 1.0) {
            continue;
        }
        let Some(value) = img1.sample_bilinear(proj.pixel) else {
            continue;
        };
        let weight = match cfg.weight {
            PointWeight::Constant { value } => value,
            PointWeight::Gradient { c } => {
                let g = img0
                    .gradient_bilinear(p.host_pixel)
                    .map(|g| g.norm_squared())
                    .unwrap_or(0.0);
                c * c / (c * c + g)
            }
        };
        energy += weight * huber_energy(value - p.host_intensity, cfg.huber_gamma);
        valid += 1;
    }
    (energy, valid)
}

/// Exhaustive minimization of the full-resolution energy over a log-uniform
/// grid of `steps` scales in `[s_lo, s_hi]`.
pub fn brute_force_scale(
    bundle: &KeyframeBundle,
    s_lo: f64,
    s_hi: f64,
    steps: usize,
    cfg: &OptimizerConfig,
) -> Result<BruteForceResult> {
    if !(s_lo > 0.0 && s_hi > s_lo) || steps < 2 {
        return Err(Error::Input(format!(
            "invalid oracle grid [{s_lo}, {s_hi}] with {steps} steps"
        )));
    }
    let (a, b) = (s_lo.ln(), s_hi.ln());
    let curve: Vec<EnergySample> = (0..steps)
        .into_par_iter()
        .map(|i| {
            let scale = (a + (b - a) * i as f64 / (steps - 1) as f64).exp();
            let (e, valid) = reference_energy(bundle, scale, cfg);
            EnergySample {
                scale,
                energy: (valid >= cfg.min_valid_points).then_some(e),
                valid_count: valid,
            }
        })
        .collect();
    // First minimum wins on ties.
    let (best_index, _) = curve
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.energy.map(|e| (i, e)))
        .fold(None, |acc: Option<(usize, f64)>, (i, e)| match acc {
            Some((_, best)) if best <= e => acc,
            _ => Some((i, e)),
        })
        .ok_or(Error::OracleFailure)?;
    Ok(BruteForceResult {
        best_scale: curve[best_index].scale,
        best_index,
        curve,
    })
}
