use std::fmt::{self, Write as _};

use super::config::degradation_fits;
use super::dataset::prepare_for_task;
use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, mod_crop, psnr, rgb_to_y, ssim, ColorSpace, DegradationSpec, ImageBuffer, ScaleFactor};
use crate::model::{Model, Task};
use crate::parallel;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub name: String,
    /// PSNR of the degraded input (bicubic-upscaled for super-resolution).
    pub input_psnr: f64,
    pub psnr: f64,
    pub ssim: f64,
}

/// Per-image metrics plus their means, printed as tab-separated text.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn mean(&self) -> MetricsRow {
        let n = self.rows.len() as f64;
        let avg = |f: fn(&MetricsRow) -> f64| self.rows.iter().map(f).sum::<f64>() / n;
        MetricsRow {
            name: "mean".into(),
            input_psnr: avg(|r| r.input_psnr),
            psnr: avg(|r| r.psnr),
            ssim: avg(|r| r.ssim),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("image\tinput_psnr\tpsnr\tssim\n");
        for r in self.rows.iter().chain(std::iter::once(&self.mean())) {
            let _ = writeln!(s, "{}\t{}\t{}\t{:.6}", r.name, fmt_db(r.input_psnr), fmt_db(r.psnr), r.ssim);
        }
        s
    }
}

impl fmt::Display for MetricsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv())
    }
}

/// Identical images print as `inf`.
fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

/// Measurement view of an image: Y channel for RGB super-resolution output.
fn measured(img: &ImageBuffer, task: Task) -> Result<ImageBuffer> {
    match (task, img.colorspace()) {
        (Task::SuperResolution { .. }, ColorSpace::Rgb) => rgb_to_y(img),
        _ => Ok(img.clone()),
    }
}

/// Restores one high-quality image after degrading it with `spec`.
/// Returns `(degraded, restored, reference)`; the reference is the HQ image
/// after task conversion and scale cropping.
pub fn restore(model: &Model, spec: &DegradationSpec, hq: &ImageBuffer, index: u64) -> Result<(ImageBuffer, ImageBuffer, ImageBuffer)> {
    let task = model.config.task;
    let hq = mod_crop(&prepare_for_task(hq, task)?, task.scale())?;
    let lq = spec.degrade_image(&hq, index)?;
    let out = model.infer(&lq.to_tensor())?;
    let restored = ImageBuffer::from_tensor(&out, 0, hq.colorspace())?.clipped();
    Ok((lq, restored, hq))
}

/// PSNR/SSIM of every image, in parallel across images. Super-resolution is
/// measured on the Y channel with `scale` pixels shaved from each border.
pub fn evaluate(model: &Model, images: &[(String, ImageBuffer)], spec: &DegradationSpec) -> Result<MetricsTable> {
    let task = model.config.task;
    if !degradation_fits(task, spec.kind) {
        return Err(Error::Config(format!(
            "degradation {} does not match the model's {} task",
            spec.kind,
            task.name()
        )));
    }
    if images.is_empty() {
        return Err(Error::InvalidArgument("no evaluation images".into()));
    }
    let shave = if task.scale() > 1 { task.scale() } else { 0 };
    let rows = parallel::map_range(images.len(), |i| -> Result<MetricsRow> {
        let (name, img) = &images[i];
        let (lq, restored, hq) = restore(model, spec, img, i as u64)?;
        let baseline = match task {
            Task::SuperResolution { scale } => bicubic_resize(&lq, ScaleFactor::up(scale), false)?,
            _ => lq,
        };
        let reference = measured(&hq, task)?;
        let restored = measured(&restored, task)?;
        let baseline = measured(&baseline, task)?;
        Ok(MetricsRow {
            name: name.clone(),
            input_psnr: psnr(&reference, &baseline, shave)?,
            psnr: psnr(&reference, &restored, shave)?,
            ssim: ssim(&reference, &restored, shave)?,
        })
    });
    Ok(MetricsTable {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}
