//! Degradation specs and training-patch sampling.
//!
//! Patches are cut from the high-quality image first, augmented, and only then
//! degraded, so every LQ patch is exactly the degradation of its HQ partner.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{add_awgn_with, bicubic_resize, jpeg_degrade, ImageBuffer, ScaleFactor};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Degradation {
    /// Antialiased bicubic downscale by an integer factor.
    BicubicDown(usize),
    /// Additive white Gaussian noise, sigma on the 0-255 scale.
    Awgn(f64),
    Jpeg(u8),
}

impl Degradation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Degradation::BicubicDown(s) if !(2..=4).contains(&s) => {
                Err(Error::InvalidArgument(format!("downscale factor {s} not in 2..=4")))
            }
            Degradation::Awgn(sigma) if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::InvalidArgument(format!("noise sigma must be > 0, got {sigma}")))
            }
            Degradation::Jpeg(q) if !(1..=100).contains(&q) => {
                Err(Error::InvalidArgument(format!("JPEG quality {q} outside 1..=100")))
            }
            _ => Ok(()),
        }
    }

    /// Ratio of HQ to LQ side length.
    pub fn scale(&self) -> usize {
        match *self {
            Degradation::BicubicDown(s) => s,
            _ => 1,
        }
    }

    fn apply<R: Rng>(&self, hq: &ImageBuffer, rng: &mut R) -> Result<ImageBuffer> {
        match *self {
            Degradation::BicubicDown(s) => bicubic_resize(hq, ScaleFactor::down(s), true),
            Degradation::Awgn(sigma) => add_awgn_with(hq, sigma, rng),
            Degradation::Jpeg(q) => jpeg_degrade(hq, q),
        }
    }
}

impl fmt::Display for Degradation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degradation::BicubicDown(s) => write!(f, "bicubic_down:{s}"),
            Degradation::Awgn(sigma) => write!(f, "awgn:{sigma}"),
            Degradation::Jpeg(q) => write!(f, "jpeg:{q}"),
        }
    }
}

impl FromStr for Degradation {
    type Err = Error;

    /// `bicubic_down:<scale>`, `awgn:<sigma>` or `jpeg:<quality>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad degradation '{s}'"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let d = match kind.trim() {
            "bicubic_down" | "bicubic" => Degradation::BicubicDown(value.trim().parse().map_err(|_| bad())?),
            "awgn" | "noise" => Degradation::Awgn(value.trim().parse().map_err(|_| bad())?),
            "jpeg" => Degradation::Jpeg(value.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradationSpec {
    pub kind: Degradation,
    /// Seed of the noise streams; unused by deterministic kinds.
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(kind: Degradation, seed: u64) -> Result<Self> {
        kind.validate()?;
        Ok(DegradationSpec { kind, seed })
    }

    /// Degrades a whole image. Noise is drawn from the evaluation stream keyed
    /// by `image_index`. Super-resolution inputs are first cropped to a
    /// multiple of the scale.
    pub fn degrade_image(&self, hq: &ImageBuffer, image_index: u64) -> Result<ImageBuffer> {
        self.kind.validate()?;
        let hq = mod_crop(hq, self.kind.scale())?;
        self.kind.apply(&hq, &mut rng::keyed(self.seed, Stream::Eval, image_index))
    }
}

impl fmt::Display for DegradationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},seed={}", self.kind, self.seed)
    }
}

impl FromStr for DegradationSpec {
    type Err = Error;

    /// `<degradation>[,seed=<n>]`, for example `awgn:30,seed=7`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, seed) = match s.split_once(',') {
            Some((k, rest)) => {
                let seed = rest
                    .trim()
                    .strip_prefix("seed=")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad degradation seed in '{s}'")))?;
                (k, seed)
            }
            None => (s, 0),
        };
        DegradationSpec::new(kind.parse()?, seed)
    }
}

/// Crops the bottom/right edge so both sides are multiples of `scale`.
pub fn mod_crop(img: &ImageBuffer, scale: usize) -> Result<ImageBuffer> {
    let (w, h) = (img.width() / scale * scale, img.height() / scale * scale);
    if w == 0 || h == 0 {
        return Err(Error::InvalidArgument(format!(
            "{}x{} image is smaller than scale {scale}",
            img.width(),
            img.height()
        )));
    }
    if (w, h) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    img.crop(0, 0, w, h)
}

/// One of the eight symmetries of the square: an optional horizontal flip
/// followed by `rotations` quarter turns counter-clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dihedral {
    pub flip: bool,
    pub rotations: u8,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral { flip: false, rotations: 0 };

    pub fn all() -> [Dihedral; 8] {
        std::array::from_fn(|i| Dihedral::from_index(i as u8))
    }

    pub fn from_index(i: u8) -> Dihedral {
        Dihedral { flip: i >= 4, rotations: i % 4 }
    }

    pub fn inverse(self) -> Dihedral {
        if self.flip {
            self
        } else {
            Dihedral { flip: false, rotations: (4 - self.rotations) % 4 }
        }
    }

    pub fn apply(self, img: &ImageBuffer) -> ImageBuffer {
        let mut out = if self.flip {
            let w = img.width();
            ImageBuffer::from_fn(w, img.height(), img.colorspace(), |c, y, x| img.get(c, y, w - 1 - x))
        } else {
            img.clone()
        };
        for _ in 0..self.rotations % 4 {
            let w = out.width();
            out = ImageBuffer::from_fn(out.height(), w, out.colorspace(), |c, y, x| out.get(c, x, w - 1 - y));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchSampler {
    /// LQ-side patch edge.
    pub patch_size: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub augment: bool,
    /// Reuse the same noise field for a given batch slot every iteration.
    pub fixed_noise: bool,
}

impl Default for PatchSampler {
    fn default() -> Self {
        PatchSampler {
            patch_size: 48,
            batch_size: 16,
            seed: 0,
            augment: true,
            fixed_noise: false,
        }
    }
}

/// Draws an `(lq, hq)` batch for `iteration`.
///
/// Slot `i` uses the crop stream `(sampler.seed, iteration, i)` and the noise
/// stream `(spec.seed, iteration, i)`, so any batch can be regenerated from its
/// iteration number alone.
pub fn sample_batch(
    images: &[ImageBuffer],
    spec: &DegradationSpec,
    sampler: &PatchSampler,
    iteration: u64,
) -> Result<(Tensor, Tensor)> {
    spec.kind.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidArgument("no training images".into()));
    }
    if sampler.patch_size == 0 || sampler.batch_size == 0 {
        return Err(Error::InvalidArgument("patch and batch size must be positive".into()));
    }
    let hq_size = sampler.patch_size * spec.kind.scale();
    if let Some(small) = images.iter().find(|im| im.width() < hq_size || im.height() < hq_size) {
        return Err(Error::InvalidArgument(format!(
            "{}x{} image is smaller than the {hq_size}x{hq_size} patch",
            small.width(),
            small.height()
        )));
    }
    let mut lq = Vec::with_capacity(sampler.batch_size);
    let mut hq = Vec::with_capacity(sampler.batch_size);
    for slot in 0..sampler.batch_size as u64 {
        let mut crop_rng = rng::keyed2(sampler.seed, Stream::Crop, iteration, slot);
        let img = &images[crop_rng.random_range(0..images.len())];
        let x = crop_rng.random_range(0..=img.width() - hq_size);
        let y = crop_rng.random_range(0..=img.height() - hq_size);
        let mut patch = img.crop(x, y, hq_size, hq_size)?;
        if sampler.augment {
            patch = Dihedral::from_index(crop_rng.random_range(0..8)).apply(&patch);
        }
        let noise_iter = if sampler.fixed_noise { 0 } else { iteration };
        let mut noise_rng = rng::keyed2(spec.seed, Stream::Noise, noise_iter, slot);
        lq.push(spec.kind.apply(&patch, &mut noise_rng)?.to_tensor());
        hq.push(patch.to_tensor());
    }
    Ok((Tensor::stack(&lq)?, Tensor::stack(&hq)?))
}
