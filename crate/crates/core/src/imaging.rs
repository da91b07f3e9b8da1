//! Cover image decoding, bilinear resizing and [0,1] scaling.

use std::io::Write;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// RGB pixels on the 0..=255 scale, stored channel-major (`[3][H][W]`).
#[derive(Clone, Debug, PartialEq)]
pub struct PixelGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl PixelGrid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::Contract(format!(
                "pixel grid {height}x{width} needs {} values, got {}",
                3 * height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// From interleaved 8-bit RGB rows.
    pub fn from_rgb8(height: usize, width: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != 3 * height * width {
            return Err(Error::Contract(
                "rgb buffer does not match dimensions".into(),
            ));
        }
        let plane = height * width;
        let mut data = vec![0.0; 3 * plane];
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + i] = px[c] as f64;
            }
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Decodes PNG, JPEG or binary PPM. Grayscale is promoted to RGB and any
/// alpha channel dropped.
pub fn load_image(path: &Path) -> Result<PixelGrid> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| Error::format(path, e))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    PixelGrid::from_rgb8(h as usize, w as usize, rgb.as_raw())
}

/// Writes 8-bit RGB as binary PPM (`P6`).
pub fn write_ppm(path: &Path, height: usize, width: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != 3 * height * width {
        return Err(Error::Contract(
            "rgb buffer does not match dimensions".into(),
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write!(file, "P6\n{width} {height}\n255\n")
        .and_then(|_| file.write_all(rgb))
        .map_err(|e| Error::io(path, e))
}

/// Bilinear resampling with pixel-centre alignment and edge clamping:
/// output pixel `d` samples source coordinate `(d + 0.5)·(src/dst) − 0.5`.
/// Aspect ratio is not preserved.
pub fn resize(image: &PixelGrid, target_h: usize, target_w: usize) -> Result<PixelGrid> {
    if image.is_empty() || image.height == 0 || image.width == 0 {
        return Err(Error::Contract("cannot resize an empty image".into()));
    }
    if target_h == 0 || target_w == 0 {
        return Err(Error::Contract("resize target must be at least 1x1".into()));
    }
    if (target_h, target_w) == (image.height, image.width) {
        return Ok(image.clone());
    }
    let ys = sample_positions(image.height, target_h);
    let xs = sample_positions(image.width, target_w);
    let mut data = Vec::with_capacity(3 * target_h * target_w);
    for c in 0..3 {
        for &(y0, y1, wy) in &ys {
            for &(x0, x1, wx) in &xs {
                let top = (1.0 - wx) * image.get(c, y0, x0) + wx * image.get(c, y0, x1);
                let bottom = (1.0 - wx) * image.get(c, y1, x0) + wx * image.get(c, y1, x1);
                data.push((1.0 - wy) * top + wy * bottom);
            }
        }
    }
    PixelGrid::new(target_h, target_w, data)
}

/// For each output index: the two source neighbours and the weight of the
/// second.
fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

/// Scales 0..=255 channel values into `[0, 1]`, giving a `[3×H×W]` tensor.
pub fn normalize(image: &PixelGrid) -> Tensor {
    let values = image
        .data
        .iter()
        .map(|v| (v / 255.0).clamp(0.0, 1.0))
        .collect();
    Tensor::from_parts(vec![3, image.height, image.width], values)
}

/// Load, resize to `size×size`, and normalize.
pub fn preprocess(path: &Path, size: usize) -> Result<Tensor> {
    let raw = load_image(path)?;
    Ok(normalize(&resize(&raw, size, size)?))
}
