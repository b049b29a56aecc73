//! Separable bicubic resampling.
//!
//! Output pixel `o` samples input coordinate `(o + 0.5) / s - 0.5`. When
//! shrinking with antialiasing the kernel is stretched by `1 / s`. Weights are
//! normalized per output pixel and out-of-range taps mirror the border
//! (`-1 -> 0`, `-2 -> 1`).

use super::ImageBuffer;
use crate::error::{Error, Result};

const CUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn cubic_kernel(x: f64) -> f64 {
    let ax = x.abs();
    let a = CUBIC_A;
    if ax <= 1.0 {
        ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0
    } else if ax < 2.0 {
        ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a
    } else {
        0.0
    }
}

/// Rational resize factor `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScaleFactor {
    num: usize,
    den: usize,
}

impl ScaleFactor {
    pub const IDENTITY: ScaleFactor = ScaleFactor { num: 1, den: 1 };

    pub fn up(k: usize) -> Self {
        ScaleFactor { num: k, den: 1 }
    }

    pub fn down(k: usize) -> Self {
        ScaleFactor { num: 1, den: k }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `ceil(len * num / den)`.
    pub fn apply(self, len: usize) -> usize {
        (len * self.num).div_ceil(self.den)
    }
}

struct Taps {
    first: isize,
    weights: Vec<f64>,
}

fn taps_for(in_len: usize, out_len: usize, scale: f64, antialias: bool) -> Vec<Taps> {
    let kscale = if antialias && scale < 1.0 { scale } else { 1.0 };
    let support = 2.0 / kscale;
    (0..out_len)
        .map(|o| {
            let u = (o as f64 + 0.5) / scale - 0.5;
            let first = (u - support).ceil() as isize;
            let last = (u + support).floor() as isize;
            let mut weights: Vec<f64> = (first..=last)
                .map(|i| kscale * cubic_kernel((u - i as f64) * kscale))
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            debug_assert!(in_len > 0);
            Taps { first, weights }
        })
        .collect()
}

fn mirror(i: isize, len: usize) -> usize {
    let n = len as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn resample_1d(src: &[f64], stride: usize, len: usize, taps: &[Taps], dst: &mut [f64], dst_stride: usize) {
    for (o, t) in taps.iter().enumerate() {
        let mut acc = 0.0;
        for (k, w) in t.weights.iter().enumerate() {
            acc += w * src[mirror(t.first + k as isize, len) * stride];
        }
        dst[o * dst_stride] = acc;
    }
}

/// Resizes every channel by `scale`.
pub fn bicubic_resize(img: &ImageBuffer, scale: ScaleFactor, antialias: bool) -> Result<ImageBuffer> {
    if scale.num == 0 || scale.den == 0 {
        return Err(Error::InvalidArgument("zero resize factor".into()));
    }
    if scale == ScaleFactor::IDENTITY || scale.num == scale.den {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let (ow, oh) = (scale.apply(w), scale.apply(h));
    if ow == 0 || oh == 0 || w == 0 || h == 0 {
        return Err(Error::InvalidArgument(format!("resize of {w}x{h} by {} is empty", scale.value())));
    }
    let s = scale.value();
    let htaps = taps_for(w, ow, s, antialias);
    let vtaps = taps_for(h, oh, s, antialias);

    let mut out = Vec::with_capacity(ow * oh * img.channels());
    for c in 0..img.channels() {
        let src = img.plane(c);
        let mut rows = vec![0.0; ow * h];
        for y in 0..h {
            resample_1d(&src[y * w..], 1, w, &htaps, &mut rows[y * ow..], 1);
        }
        let mut plane = vec![0.0; ow * oh];
        for x in 0..ow {
            resample_1d(&rows[x..], ow, h, &vtaps, &mut plane[x..], ow);
        }
        out.extend(plane);
    }
    ImageBuffer::new(ow, oh, img.colorspace(), out)
}
