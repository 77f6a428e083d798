//! Direct photometric scale optimization for stereo camera pairs.
//!
//! A monocular visual odometry front end reconstructs points only up to an
//! unknown scale. Given the second image of a calibrated stereo pair, the
//! scale is recovered by projecting the points into that image and minimizing
//! the photometric error over the single scale parameter
//! ([`optimizer::optimize_scale`]).
//!
//! Supporting modules provide the camera model ([`geometry`]), images and
//! pyramids ([`image`]), a ground-truth scene renderer with a brute-force
//! oracle ([`synthetic`]), a block-matching stereo baseline ([`stereo`]), and
//! dataset I/O plus KITTI-style trajectory evaluation ([`io`], [`trajectory`]).

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod optimizer;
pub mod stereo;
pub mod synthetic;
pub mod trajectory;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, Pixel, Point3, StereoExtrinsics};
pub use image::{GrayImage, ImagePyramid};
pub use optimizer::{
    energy, gn_step, optimize_scale, KeyframeBundle, OptimizerConfig, ScalePoint, ScaleResult,
};
pub use synthetic::{brute_force_scale, render_scene, sample_points, SceneConfig, SyntheticScene};
pub use trajectory::{apply_scale_correction, relative_errors, SegmentError, TrajectoryPose};
