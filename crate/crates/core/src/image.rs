//! Grayscale images, 2×2 box pyramids and bilinear sampling.

use std::path::Path;

use image::{DynamicImage, GrayImage as Gray8, ImageFormat};
use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pixel};

/// Default pyramid depth used by the optimizer.
pub const DEFAULT_LEVELS: usize = 4;

/// Row-major floating-point intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input("image has zero size".into()));
        }
        if data.len() != width * height {
            return Err(Error::Input(format!(
                "image data length {} != {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("image contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear interpolation of the four neighbors of `p`. `None` outside
    /// `[0, w-1] × [0, h-1]`.
    pub fn sample_bilinear(&self, p: Pixel) -> Option<f64> {
        if !(p.u >= 0.0
            && p.v >= 0.0
            && p.u <= (self.width - 1) as f64
            && p.v <= (self.height - 1) as f64)
        {
            return None;
        }
        if self.width < 2 || self.height < 2 {
            return Some(self.get(p.u as usize, p.v as usize));
        }
        let x0 = (p.u.floor() as usize).min(self.width - 2);
        let y0 = (p.v.floor() as usize).min(self.height - 2);
        let fx = p.u - x0 as f64;
        let fy = p.v - y0 as f64;
        let i = y0 * self.width + x0;
        let d = &self.data;
        let top = d[i] + fx * (d[i + 1] - d[i]);
        let bottom = d[i + self.width] + fx * (d[i + self.width + 1] - d[i + self.width]);
        Some(top + fy * (bottom - top))
    }

    /// Bilinear interpolation of per-pixel central-difference gradients.
    /// Requires `p` to be at least one pixel from every border.
    pub fn gradient_bilinear(&self, p: Pixel) -> Option<Vector2<f64>> {
        self.sample_with_gradient(p).map(|(_, g)| g)
    }

    /// Intensity and gradient at the same subpixel location. Valid inside the
    /// one-pixel safety border only, so both are always available together.
    #[inline]
    pub fn sample_with_gradient(&self, p: Pixel) -> Option<(f64, Vector2<f64>)> {
        let (w, h) = (self.width, self.height);
        if w < 4 || h < 4 {
            return None;
        }
        if !(p.u >= 1.0 && p.v >= 1.0 && p.u <= (w - 2) as f64 && p.v <= (h - 2) as f64) {
            return None;
        }
        let x0 = (p.u.floor() as usize).min(w - 3);
        let y0 = (p.v.floor() as usize).min(h - 3);
        let fx = p.u - x0 as f64;
        let fy = p.v - y0 as f64;
        let d = &self.data;
        let at = |x: usize, y: usize| d[y * w + x];
        let grad = |x: usize, y: usize| {
            (
                0.5 * (at(x + 1, y) - at(x - 1, y)),
                0.5 * (at(x, y + 1) - at(x, y - 1)),
            )
        };
        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;
        let value = w00 * at(x0, y0)
            + w10 * at(x0 + 1, y0)
            + w01 * at(x0, y0 + 1)
            + w11 * at(x0 + 1, y0 + 1);
        let g00 = grad(x0, y0);
        let g10 = grad(x0 + 1, y0);
        let g01 = grad(x0, y0 + 1);
        let g11 = grad(x0 + 1, y0 + 1);
        let gu = w00 * g00.0 + w10 * g10.0 + w01 * g01.0 + w11 * g11.0;
        let gv = w00 * g00.1 + w10 * g10.1 + w01 * g01.1 + w11 * g11.1;
        Some((value, Vector2::new(gu, gv)))
    }

    /// 2×2 block average; an odd trailing row or column is dropped.
    pub fn downsample(&self) -> Self {
        let (w, h) = (self.width / 2, self.height / 2);
        Self::from_fn(w, h, |x, y| {
            let (sx, sy) = (2 * x, 2 * y);
            0.25 * (self.get(sx, sy)
                + self.get(sx + 1, sy)
                + self.get(sx, sy + 1)
                + self.get(sx + 1, sy + 1))
        })
    }

    /// Loads an 8- or 16-bit grayscale or color PNG/PGM. Color is converted by
    /// luminance, 16-bit data is rescaled to `[0, 255]`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let luma = |r: f64, g: f64, b: f64| 0.299 * r + 0.587 * g + 0.114 * b;
        let data: Vec<f64> = match img {
            DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f64).collect(),
            DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f64).collect(),
            DynamicImage::ImageLuma16(buf) => buf
                .pixels()
                .map(|p| p.0[0] as f64 * 255.0 / 65535.0)
                .collect(),
            DynamicImage::ImageLumaA16(buf) => buf
                .pixels()
                .map(|p| p.0[0] as f64 * 255.0 / 65535.0)
                .collect(),
            DynamicImage::ImageRgb8(buf) => buf
                .pixels()
                .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            other => other
                .to_rgb32f()
                .pixels()
                .map(|p| 255.0 * luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
        };
        GrayImage::new(w, h, data)
    }

    /// Writes an 8-bit binary PGM (values rounded and clamped to `[0, 255]`).
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        let buf = Gray8::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, ImageFormat::Pnm)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Copy with every value rounded to the 8-bit grid, i.e. what a PGM
    /// round trip yields.
    pub fn quantized(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|v| v.round().clamp(0.0, 255.0))
                .collect(),
        }
    }
}

/// Coarse-to-fine image pyramid with the matching per-level intrinsics.
#[derive(Debug, Clone)]
pub struct ImagePyramid {
    levels: Vec<GrayImage>,
    intrinsics: Vec<CameraIntrinsics>,
}

impl ImagePyramid {
    pub fn build(img: &GrayImage, k: &CameraIntrinsics, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Config("pyramid needs at least one level".into()));
        }
        let min = 1usize << (levels - 1);
        if img.width() < min || img.height() < min {
            return Err(Error::Config(format!(
                "{}x{} image too small for {levels} pyramid levels",
                img.width(),
                img.height()
            )));
        }
        if img.width() != k.width || img.height() != k.height {
            return Err(Error::Config(format!(
                "image is {}x{} but intrinsics declare {}x{}",
                img.width(),
                img.height(),
                k.width,
                k.height
            )));
        }
        let mut imgs = Vec::with_capacity(levels);
        imgs.push(img.clone());
        for _ in 1..levels {
            let next = imgs.last().unwrap().downsample();
            imgs.push(next);
        }
        let intrinsics = (0..levels).map(|l| k.at_level(l)).collect();
        Ok(Self {
            levels: imgs,
            intrinsics,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, level: usize) -> &GrayImage {
        &self.levels[level]
    }

    pub fn intrinsics(&self, level: usize) -> &CameraIntrinsics {
        &self.intrinsics[level]
    }
}
