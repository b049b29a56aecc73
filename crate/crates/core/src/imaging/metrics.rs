//! PSNR and SSIM on `[0, 1]` images.
//!
//! Both metrics clip their inputs to `[0, 1]` and drop `shave` border pixels
//! first. Identical images have PSNR `f64::INFINITY`.

use super::ImageBuffer;
use crate::error::{Error, Result};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn prepare(a: &ImageBuffer, b: &ImageBuffer, shave: usize) -> Result<(ImageBuffer, ImageBuffer)> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(Error::InvalidArgument(format!(
            "metric inputs differ: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let (a, b) = if shave > 0 { (a.shave(shave)?, b.shave(shave)?) } else { (a.clone(), b.clone()) };
    Ok((a.clipped(), b.clipped()))
}

/// `10 log10(1 / MSE)` over all channels of the shaved region.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, shave: usize) -> Result<f64> {
    let (a, b) = prepare(a, b, shave)?;
    let n = a.data().len();
    if n == 0 {
        return Err(Error::InvalidArgument("PSNR of an empty image".into()));
    }
    let sse: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (n as f64 / sse).log10())
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            w[y * SSIM_WINDOW + x] = g[y] * g[x];
        }
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize, window: &[f64]) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (ow, oh) = (width + 1 - SSIM_WINDOW, height + 1 - SSIM_WINDOW);
    let mut total = 0.0;
    for y0 in 0..oh {
        for x0 in 0..ow {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for wy in 0..SSIM_WINDOW {
                let row = (y0 + wy) * width + x0;
                for wx in 0..SSIM_WINDOW {
                    let w = window[wy * SSIM_WINDOW + wx];
                    let (p, q) = (a[row + wx], b[row + wx]);
                    ma += w * p;
                    mb += w * q;
                    saa += w * p * p;
                    sbb += w * q * q;
                    sab += w * p * q;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    total / (ow * oh) as f64
}

/// Mean SSIM over all valid 11x11 Gaussian windows, averaged over channels.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, shave: usize) -> Result<f64> {
    let (a, b) = prepare(a, b, shave)?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    let window = gaussian_window();
    let sum: f64 = (0..a.channels())
        .map(|c| ssim_plane(a.plane(c), b.plane(c), a.width(), a.height(), &window))
        .sum();
    Ok(sum / a.channels() as f64)
}
