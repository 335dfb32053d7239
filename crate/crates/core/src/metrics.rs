use crate::error::{Error, Result};
use crate::image::GrayImage;

pub fn mse(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    if reference.dims() != test.dims() {
        return Err(Error::Dimension(format!(
            "{:?} vs {:?}",
            reference.dims(),
            test.dims()
        )));
    }
    let n = reference.pixels().len() as f64;
    Ok(reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio on the 8-bit scale; `+inf` for identical images.
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    let e = mse(reference, test)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / e).log10())
}
