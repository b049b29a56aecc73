use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{load_image, rgb_to_y, ColorSpace, ImageBuffer};
use crate::model::Task;

const EXTENSIONS: [&str; 4] = ["pgm", "ppm", "pnm", "png"];

/// Loads every supported image in `path` (sorted by file name), or the single
/// file `path` points at.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<(String, ImageBuffer)>> {
    let path = path.as_ref();
    let files = if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no images in {}", path.display())));
    }
    files
        .iter()
        .map(|f| {
            let name = f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            Ok((name, load_image(f)?))
        })
        .collect()
}

/// Converts an image to the channel layout a task works in: RGB for
/// super-resolution (gray is replicated), luminance otherwise.
pub fn prepare_for_task(img: &ImageBuffer, task: Task) -> Result<ImageBuffer> {
    match (task, img.colorspace()) {
        (Task::SuperResolution { .. }, ColorSpace::Rgb) => Ok(img.clone()),
        (Task::SuperResolution { .. }, _) => {
            Ok(ImageBuffer::from_fn(img.width(), img.height(), ColorSpace::Rgb, |_, y, x| img.get(0, y, x)))
        }
        (_, ColorSpace::Rgb) => rgb_to_y(img),
        _ => Ok(img.clone()),
    }
}
