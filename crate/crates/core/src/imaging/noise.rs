use rand::Rng;
use rand_distr::StandardNormal;

use super::ImageBuffer;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Adds i.i.d. Gaussian noise with standard deviation `sigma_255 / 255`,
/// drawn from the `(seed, noise, 0)` stream. The result is not clipped.
pub fn add_awgn(img: &ImageBuffer, sigma_255: f64, seed: u64) -> Result<ImageBuffer> {
    add_awgn_with(img, sigma_255, &mut rng::keyed(seed, Stream::Noise, 0))
}

pub fn add_awgn_with<R: Rng>(img: &ImageBuffer, sigma_255: f64, rng: &mut R) -> Result<ImageBuffer> {
    if !(sigma_255 > 0.0 && sigma_255.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be > 0, got {sigma_255}")));
    }
    let sigma = sigma_255 / 255.0;
    let mut out = img.clone();
    for v in out.data_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma * z;
    }
    Ok(out)
}
