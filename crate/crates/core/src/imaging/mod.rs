//! Image buffers, degradations, quality metrics and training patches.

mod color;
mod io;
mod jpeg;
mod metrics;
mod noise;
mod patches;
mod resize;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub use color::rgb_to_y;
pub use io::{decode_png, decode_pnm, encode_pnm, load_image, save_image};
pub use jpeg::{jpeg_degrade, luminance_table};
pub use metrics::{psnr, ssim};
pub use noise::{add_awgn, add_awgn_with};
pub use patches::{mod_crop, sample_batch, Degradation, DegradationSpec, Dihedral, PatchSampler};
pub use resize::{bicubic_resize, cubic_kernel, ScaleFactor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    Gray,
    Rgb,
    /// Luminance of BT.601 YCbCr.
    Luma,
}

/// Planar image with values nominally in `[0, 1]`.
///
/// Noisy images may leave that range; values are clipped only when saved or
/// measured.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    colorspace: ColorSpace,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, colorspace: ColorSpace, data: Vec<f64>) -> Result<Self> {
        let channels = match colorspace {
            ColorSpace::Rgb => 3,
            ColorSpace::Gray | ColorSpace::Luma => 1,
        };
        if data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
            colorspace,
        })
    }

    pub fn filled(width: usize, height: usize, colorspace: ColorSpace, value: f64) -> Self {
        let channels = if colorspace == ColorSpace::Rgb { 3 } else { 1 };
        ImageBuffer {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
            colorspace,
        }
    }

    pub fn from_fn(width: usize, height: usize, colorspace: ColorSpace, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut img = Self::filled(width, height, colorspace, 0.0);
        for c in 0..img.channels {
            for y in 0..height {
                for x in 0..width {
                    img.data[(c * height + y) * width + x] = f(c, y, x);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn map_data(&self, f: impl Fn(f64) -> f64) -> ImageBuffer {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Values clipped to `[0, 1]`.
    pub fn clipped(&self) -> ImageBuffer {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        out
    }

    /// Values rounded to the nearest 8-bit level (after clipping).
    pub fn quantized(&self) -> ImageBuffer {
        let mut out = self.clone();
        out.data
            .iter_mut()
            .for_each(|v| *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
        out
    }

    /// Rectangular window `[y, y + h) x [x, x + w)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<ImageBuffer> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(ImageBuffer::from_fn(w, h, self.colorspace, |c, yy, xx| self.get(c, y + yy, x + xx)))
    }

    /// Drops `border` pixels from every side.
    pub fn shave(&self, border: usize) -> Result<ImageBuffer> {
        if 2 * border >= self.width || 2 * border >= self.height {
            return Err(Error::InvalidArgument(format!(
                "cannot shave {border} px from {}x{}",
                self.width, self.height
            )));
        }
        self.crop(border, border, self.width - 2 * border, self.height - 2 * border)
    }

    /// `[1, C, H, W]` tensor view of the pixels.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(Shape::new(1, self.channels, self.height, self.width), self.data.clone())
            .expect("buffer length matches its dimensions")
    }

    /// Image from one sample of a `[B, C, H, W]` tensor.
    pub fn from_tensor(t: &Tensor, index: usize, colorspace: ColorSpace) -> Result<ImageBuffer> {
        let s = t.shape();
        if index >= s.batch() {
            return Err(Error::InvalidArgument(format!("sample {index} of {s}")));
        }
        ImageBuffer::new(s.width(), s.height(), colorspace, t.sample(index).into_vec())
            .map_err(|_| Error::InvalidArgument(format!("{} channels do not fit {colorspace:?}", s.channels())))
    }
}
