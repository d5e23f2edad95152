//! 8-bit RGB PNG round-trips for image tensors with values in `[0, 1]`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use image::{ImageBuffer, Rgb};
use std::path::Path;

pub fn save_rgb(path: &Path, image: &Tensor<f64>) -> Result<()> {
    let (h, w, c) = image.dims3()?;
    if c != 3 {
        return Err(Error::shape(format!("expected 3 channels, got {}", c)));
    }
    let data = image.data();
    let buf = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let base = ((y as usize) * w + x as usize) * 3;
        Rgb([
            (data[base].clamp(0.0, 1.0) * 255.0).round() as u8,
            (data[base + 1].clamp(0.0, 1.0) * 255.0).round() as u8,
            (data[base + 2].clamp(0.0, 1.0) * 255.0).round() as u8,
        ])
    });
    buf.save(path)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

pub fn load_rgb(path: &Path) -> Result<Tensor<f64>> {
    let img = image::open(path)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut t = Tensor::zeros(&[h, w, 3]);
    let data = t.data_mut();
    for (x, y, px) in img.enumerate_pixels() {
        let base = ((y as usize) * w + x as usize) * 3;
        data[base] = px[0] as f64 / 255.0;
        data[base + 1] = px[1] as f64 / 255.0;
        data[base + 2] = px[2] as f64 / 255.0;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_8bit_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        // values on the exact 8-bit lattice survive the round trip
        let mut t = Tensor::<f64>::zeros(&[4, 5, 3]);
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            *v = ((i * 7) % 256) as f64 / 255.0;
        }
        save_rgb(&path, &t).unwrap();
        let back = load_rgb(&path).unwrap();
        assert_eq!(t.shape(), back.shape());
        for (a, b) in t.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
