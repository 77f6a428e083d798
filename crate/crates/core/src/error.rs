use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid inverse depth {0} (must be finite and > 0)")]
    InvalidDepth(f64),

    #[error("point behind camera (z = {z:.3e})")]
    BehindCamera { z: f64 },

    #[error("degenerate geometry: projection denominator {denom:.3e} below threshold")]
    DegenerateGeometry { denom: f64 },

    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid stereo extrinsics: {0}")]
    InvalidExtrinsics(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient overlap: {valid} valid points, {required} required")]
    InsufficientOverlap { valid: usize, required: usize },

    #[error("degenerate normal equation (sum of weighted squared Jacobians = {hessian:.3e})")]
    DegenerateNormalEquation { hessian: f64 },

    #[error("scale left the admissible range: {scale:.3e}")]
    ScaleOutOfBounds { scale: f64 },

    #[error("scale optimization failed: {0}")]
    ScaleOptimizationFailed(String),

    #[error("texture error: {0}")]
    Texture(String),

    #[error("brute-force oracle failed: no grid scale had sufficient overlap")]
    OracleFailure,

    #[error("stereo baseline failed: {accepted} accepted matches, {required} required")]
    BaselineFailure { accepted: usize, required: usize },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("input error: {0}")]
    Input(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("image error on {}: {source}", path.display())]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
}

impl Error {
    /// True for failures of the numerical pipeline itself, as opposed to bad
    /// inputs. The CLI maps these to exit status 2.
    pub fn is_algorithmic(&self) -> bool {
        matches!(
            self,
            Error::InsufficientOverlap { .. }
                | Error::DegenerateNormalEquation { .. }
                | Error::ScaleOutOfBounds { .. }
                | Error::ScaleOptimizationFailed(_)
                | Error::OracleFailure
                | Error::BaselineFailure { .. }
                | Error::Texture(_)
        )
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
