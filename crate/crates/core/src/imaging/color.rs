use super::{ColorSpace, ImageBuffer};
use crate::error::{Error, Result};

/// BT.601 studio-swing luminance, `Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255`
/// with `R, G, B` in `[0, 1]`, so `Y` spans `[16/255, 235/255]`.
pub fn rgb_to_y(img: &ImageBuffer) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::InvalidArgument(format!(
            "luminance needs an RGB image, got {} channel(s)",
            img.channels()
        )));
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let y = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((r, g), b)| (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0)
        .collect();
    ImageBuffer::new(img.width(), img.height(), ColorSpace::Luma, y)
}
