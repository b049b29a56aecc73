//! Baseline-JPEG style luminance degradation.
//!
//! Pixels are level-shifted to `[-128, 127]`, transformed per 8x8 block with
//! the orthonormal DCT-II, quantized with the standard luminance table scaled
//! by the IJG quality law, dequantized, inverse transformed and rounded back
//! to 8-bit levels. Partial edge blocks are padded by replicating the last
//! row/column; the padding is cropped away afterwards.

use std::sync::OnceLock;

use super::ImageBuffer;
use crate::error::{Error, Result};

const BLOCK: usize = 8;

/// ITU-T T.81 Annex K luminance quantization table, row-major.
const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Quantization table for `quality` in `[1, 100]`.
pub fn luminance_table(quality: u8) -> [u16; 64] {
    let q = u32::from(quality.clamp(1, 100));
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    LUMA_TABLE.map(|t| ((u32::from(t) * scale + 50) / 100).clamp(1, 255) as u16)
}

/// `basis[u][x] = c(u) cos((2x + 1) u pi / 16)` with orthonormal `c`.
fn dct_basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static BASIS: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; BLOCK]; BLOCK];
        for (u, row) in b.iter_mut().enumerate() {
            let c = if u == 0 { (1.0 / BLOCK as f64).sqrt() } else { (2.0 / BLOCK as f64).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        b
    })
}

fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let b = dct_basis();
    let mut tmp = [0.0; 64];
    for y in 0..BLOCK {
        for u in 0..BLOCK {
            tmp[y * BLOCK + u] = (0..BLOCK).map(|x| b[u][x] * block[y * BLOCK + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            out[v * BLOCK + u] = (0..BLOCK).map(|y| b[v][y] * tmp[y * BLOCK + u]).sum();
        }
    }
    out
}

fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let b = dct_basis();
    let mut tmp = [0.0; 64];
    for v in 0..BLOCK {
        for x in 0..BLOCK {
            tmp[v * BLOCK + x] = (0..BLOCK).map(|u| b[u][x] * coef[v * BLOCK + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            out[y * BLOCK + x] = (0..BLOCK).map(|v| b[v][y] * tmp[v * BLOCK + x]).sum();
        }
    }
    out
}

/// Compresses and decompresses a single-channel image at `quality`.
pub fn jpeg_degrade(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    if img.channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "JPEG degradation works on one channel, got {}",
            img.channels()
        )));
    }
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidArgument(format!("JPEG quality {quality} outside 1..=100")));
    }
    let table = luminance_table(quality);
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    let src = img.plane(0);
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            let mut block = [0.0; 64];
            for y in 0..BLOCK {
                let sy = (by + y).min(h - 1);
                for x in 0..BLOCK {
                    let sx = (bx + x).min(w - 1);
                    block[y * BLOCK + x] = src[sy * w + sx].clamp(0.0, 1.0) * 255.0 - 128.0;
                }
            }
            let mut coef = fdct(&block);
            for (c, &q) in coef.iter_mut().zip(&table) {
                let q = f64::from(q);
                *c = (*c / q).round() * q;
            }
            let rec = idct(&coef);
            let dst = out.data_mut();
            for y in 0..BLOCK.min(h - by) {
                for x in 0..BLOCK.min(w - bx) {
                    let v = (rec[y * BLOCK + x] + 128.0).round().clamp(0.0, 255.0);
                    dst[(by + y) * w + bx + x] = v / 255.0;
                }
            }
        }
    }
    Ok(out)
}
