//! Text and binary interchange formats: KITTI calibration and pose files,
//! point-cloud CSV, and synthetic scene directories.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pixel, StereoExtrinsics};
use crate::image::GrayImage;
use crate::optimizer::ScalePoint;
use crate::synthetic::{SceneConfig, SyntheticScene};
use crate::trajectory::TrajectoryPose;

pub const SCENE_SCHEMA_VERSION: u32 = 1;
pub const POINT_CLOUD_HEADER: &str = "u,v,inv_depth";

pub const IMG0_FILE: &str = "img0.pgm";
pub const IMG1_FILE: &str = "img1.pgm";
pub const DEPTH_FILE: &str = "depth0.raw";
pub const SCENE_FILE: &str = "scene.json";
pub const POINTS_FILE: &str = "points.csv";

/// Calibrated rectified stereo rig.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub k0: CameraIntrinsics,
    pub k1: CameraIntrinsics,
    pub extrinsics: StereoExtrinsics,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_floats<const N: usize>(path: &Path, line: usize, tokens: &[&str]) -> Result<[f64; N]> {
    if tokens.len() != N {
        return Err(Error::parse(
            path,
            line,
            format!("expected {N} values, found {}", tokens.len()),
        ));
    }
    let mut out = [0.0; N];
    for (o, t) in out.iter_mut().zip(tokens) {
        let v: f64 = t
            .parse()
            .map_err(|_| Error::parse(path, line, format!("malformed number '{t}'")))?;
        if !v.is_finite() {
            return Err(Error::parse(path, line, format!("non-finite value '{t}'")));
        }
        *o = v;
    }
    Ok(out)
}

/// Reads the `P0:` and `P1:` projection matrices of a KITTI `calib.txt`.
/// Other keys are ignored. The file carries no image size, so it is passed in.
pub fn load_kitti_calib(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
) -> Result<Calibration> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut p0 = None;
    let mut p1 = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut tokens = raw.split_whitespace();
        let slot = match tokens.next() {
            Some("P0:") => &mut p0,
            Some("P1:") => &mut p1,
            _ => continue,
        };
        let rest: Vec<&str> = tokens.collect();
        *slot = Some((line, parse_floats::<12>(path, line, &rest)?));
    }
    let eof = text.lines().count().max(1);
    let (l0, p0) = p0.ok_or_else(|| Error::parse(path, eof, "missing P0 line"))?;
    let (l1, p1) = p1.ok_or_else(|| Error::parse(path, eof, "missing P1 line"))?;

    let intrinsics = |line: usize, p: &[f64; 12]| {
        if p[0] == 0.0 || p[5] == 0.0 {
            return Err(Error::parse(path, line, "zero focal length"));
        }
        CameraIntrinsics::new(p[0], p[5], p[2], p[6], width, height)
            .map_err(|e| Error::parse(path, line, e.to_string()))
    };
    let k0 = intrinsics(l0, &p0)?;
    let k1 = intrinsics(l1, &p1)?;
    let baseline = -p1[3] / p1[0];
    if baseline == 0.0 {
        return Err(Error::parse(path, l1, "zero stereo baseline"));
    }
    let extrinsics =
        StereoExtrinsics::rectified(baseline).map_err(|e| Error::parse(path, l1, e.to_string()))?;
    Ok(Calibration { k0, k1, extrinsics })
}

/// One pose per line, 12 row-major values of `[R | t]`.
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryPose>> {
    let path = path.as_ref();
    read_text(path)?
        .lines()
        .enumerate()
        .map(|(i, raw)| {
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            let values = parse_floats::<12>(path, i + 1, &tokens)?;
            TrajectoryPose::from_row_major(&values)
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))
        })
        .collect()
}

/// Shortest round-trip formatting, so write → read → write is byte-stable.
pub fn format_trajectory(poses: &[TrajectoryPose]) -> String {
    let mut out = String::new();
    for p in poses {
        let row: Vec<String> = p.to_row_major().iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: impl AsRef<Path>, poses: &[TrajectoryPose]) -> Result<()> {
    write_text(path.as_ref(), &format_trajectory(poses))
}

/// One value per line, e.g. per-keyframe scales or keyframe indices.
pub fn load_column<T: FromStr>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    read_text(path)?
        .lines()
        .enumerate()
        .map(|(i, raw)| {
            raw.trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("malformed value '{}'", raw.trim())))
        })
        .collect()
}

/// Points from a CSV file with the exact header `u,v,inv_depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<ScalePoint>,
    /// 1-based line numbers of well-formed lines dropped for invalid values.
    pub rejected_lines: Vec<usize>,
}

/// Malformed lines are parse errors. Lines with a non-positive inverse depth
/// or a pixel outside `img0` are dropped and reported; dropping more than
/// half of the points is an input error. Host intensities are sampled from
/// `img0`.
pub fn load_point_cloud(path: impl AsRef<Path>, img0: &GrayImage) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == POINT_CLOUD_HEADER => {}
        _ => {
            return Err(Error::parse(
                path,
                1,
                format!("expected header '{POINT_CLOUD_HEADER}'"),
            ))
        }
    }
    let mut points = Vec::new();
    let mut rejected_lines = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        let tokens: Vec<&str> = raw.split(',').map(str::trim).collect();
        let [u, v, inv_depth] = parse_floats::<3>(path, line, &tokens)?;
        let host_pixel = Pixel::new(u, v);
        match img0.sample_bilinear(host_pixel) {
            Some(host_intensity) if inv_depth > 0.0 => points.push(ScalePoint {
                host_pixel,
                inv_depth,
                host_intensity,
            }),
            _ => rejected_lines.push(line),
        }
    }
    let total = points.len() + rejected_lines.len();
    if total == 0 {
        return Err(Error::Input(format!("{}: no points", path.display())));
    }
    if 2 * rejected_lines.len() > total {
        return Err(Error::Input(format!(
            "{}: {} of {total} points rejected",
            path.display(),
            rejected_lines.len()
        )));
    }
    Ok(PointCloud {
        points,
        rejected_lines,
    })
}

pub fn write_point_cloud(path: impl AsRef<Path>, points: &[ScalePoint]) -> Result<()> {
    let mut out = String::from(POINT_CLOUD_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.host_pixel.u, p.host_pixel.v, p.inv_depth
        ));
    }
    write_text(path.as_ref(), &out)
}

/// JSON sidecar of an exported scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetadata {
    pub schema_version: u32,
    pub s_true: f64,
    pub intrinsics: CameraIntrinsics,
    /// Row-major rotation of camera 1 from camera 0.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub baseline: f64,
    /// Radial-tangential coefficients; images are undistorted, so all zero.
    pub distortion: [f64; 5],
    pub config: SceneConfig,
}

impl SceneMetadata {
    pub fn from_config(config: &SceneConfig) -> Self {
        Self {
            schema_version: SCENE_SCHEMA_VERSION,
            s_true: config.s_true,
            intrinsics: config.intrinsics,
            rotation: config.rotation,
            translation: config.translation,
            baseline: config.translation_vector().norm(),
            distortion: [0.0; 5],
            config: config.clone(),
        }
    }

    pub fn calibration(&self) -> Result<Calibration> {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        Ok(Calibration {
            k0: self.intrinsics,
            k1: self.intrinsics,
            extrinsics: StereoExtrinsics::new(r, Vector3::from(self.translation))?,
        })
    }
}

pub fn load_scene_metadata(path: impl AsRef<Path>) -> Result<SceneMetadata> {
    let path = path.as_ref();
    let meta: SceneMetadata = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if meta.schema_version != SCENE_SCHEMA_VERSION {
        return Err(Error::Input(format!(
            "{}: unsupported schema_version {}",
            path.display(),
            meta.schema_version
        )));
    }
    if meta.distortion.iter().any(|&d| d != 0.0) {
        return Err(Error::Input(format!(
            "{}: nonzero distortion; images must be undistorted",
            path.display()
        )));
    }
    meta.intrinsics.validate()?;
    Ok(meta)
}

/// Calibration from either a KITTI `calib.txt` (image size from `img0`) or a
/// scene `.json` sidecar.
pub fn load_calibration(path: impl AsRef<Path>, img0: &GrayImage) -> Result<Calibration> {
    let path = path.as_ref();
    let cal = if path.extension().is_some_and(|e| e == "json") {
        load_scene_metadata(path)?.calibration()?
    } else {
        load_kitti_calib(path, img0.width(), img0.height())?
    };
    if (cal.k0.width, cal.k0.height) != (img0.width(), img0.height()) {
        return Err(Error::Input(format!(
            "calibration is for {}×{} images but img0 is {}×{}",
            cal.k0.width,
            cal.k0.height,
            img0.width(),
            img0.height()
        )));
    }
    Ok(cal)
}

pub fn write_depth_raw(path: impl AsRef<Path>, depth: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = depth
        .iter()
        .flat_map(|&d| (d as f32).to_le_bytes())
        .collect();
    fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn load_depth_raw(path: impl AsRef<Path>, width: usize, height: usize) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 4 * width * height {
        return Err(Error::Input(format!(
            "{}: {} bytes, expected {} for {width}×{height} f32",
            path.display(),
            bytes.len(),
            4 * width * height
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Paths of the files in an exported scene directory.
#[derive(Debug, Clone)]
pub struct SceneDir {
    pub img0: PathBuf,
    pub img1: PathBuf,
    pub depth: PathBuf,
    pub scene: PathBuf,
    pub points: PathBuf,
}

impl SceneDir {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            img0: d.join(IMG0_FILE),
            img1: d.join(IMG1_FILE),
            depth: d.join(DEPTH_FILE),
            scene: d.join(SCENE_FILE),
            points: d.join(POINTS_FILE),
        }
    }
}

/// Writes the images as 8-bit PGM, depth as f32 raw, the JSON sidecar and
/// the points. Creates `dir` if needed.
pub fn write_scene(
    dir: impl AsRef<Path>,
    scene: &SyntheticScene,
    points: &[ScalePoint],
) -> Result<SceneDir> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SceneDir::new(dir);
    scene.img0.save_pgm(&files.img0)?;
    scene.img1.save_pgm(&files.img1)?;
    write_depth_raw(&files.depth, &scene.depth0)?;
    let meta = SceneMetadata::from_config(&scene.config);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_text(&files.scene, &(json + "\n"))?;
    write_point_cloud(&files.points, points)?;
    Ok(files)
}

/// A scene directory loaded back for optimization.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub img0: GrayImage,
    pub img1: GrayImage,
    pub meta: SceneMetadata,
    pub calibration: Calibration,
    pub points: PointCloud,
}

pub fn load_scene(dir: impl AsRef<Path>) -> Result<LoadedScene> {
    let files = SceneDir::new(dir);
    let meta = load_scene_metadata(&files.scene)?;
    let img0 = GrayImage::load(&files.img0)?;
    let img1 = GrayImage::load(&files.img1)?;
    let calibration = load_calibration(&files.scene, &img0)?;
    let points = load_point_cloud(&files.points, &img0)?;
    Ok(LoadedScene {
        img0,
        img1,
        meta,
        calibration,
        points,
    })
}
