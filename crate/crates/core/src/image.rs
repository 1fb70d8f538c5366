//! `ImageTensor`: the C×H×W sample carrier with values in `[-1, 1]`.
//!
//! Storage is f64 so that the diffusion algebra (noise round trips, gradient
//! oracles) can be checked at full double precision; the network side converts
//! to f32 at its boundary.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::invalid_argument(format!(
                "image data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(ImageTensor { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        ImageTensor { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }

    /// Quantize `[-1, 1]` to 8-bit RGB bytes, channel-interleaved row-major.
    ///
    /// The mapping is the linear one used for the corpus PNG files; together
    /// with [`ImageTensor::from_rgb8`] the round trip error is at most `1/255`.
    pub fn to_rgb8(&self) -> Result<Vec<u8>> {
        if self.channels != 3 {
            return Err(Error::invalid_argument(format!(
                "to_rgb8 needs 3 channels, got {}",
                self.channels
            )));
        }
        let mut out = Vec::with_capacity(self.height * self.width * 3);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..3 {
                    let v = self.get(c, y, x).clamp(-1.0, 1.0);
                    out.push(((v + 1.0) * 0.5 * 255.0).round() as u8);
                }
            }
        }
        Ok(out)
    }

    pub fn from_rgb8(bytes: &[u8], height: usize, width: usize) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return Err(Error::invalid_argument(format!(
                "byte length {} does not match {}x{}x3",
                bytes.len(),
                height,
                width
            )));
        }
        let mut img = ImageTensor::zeros(3, height, width);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    let b = bytes[(y * width + x) * 3 + c];
                    img.set(c, y, x, b as f64 / 255.0 * 2.0 - 1.0);
                }
            }
        }
        Ok(img)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.to_rgb8()?;
        let buf: image::RgbImage =
            image::ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes)
                .expect("buffer size checked above");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Decode { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::Decode { path: path.to_path_buf(), msg: e.to_string() })?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Self::from_rgb8(img.as_raw(), h, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_round_trip_error_bounded() {
        let vals: Vec<f64> = (0..3 * 4 * 4).map(|i| -1.0 + 2.0 * (i as f64) / 47.0).collect();
        let img = ImageTensor::new(3, 4, 4, vals).unwrap();
        let back = ImageTensor::from_rgb8(&img.to_rgb8().unwrap(), 4, 4).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(ImageTensor::new(3, 2, 2, vec![0.0; 11]).is_err());
    }

    #[test]
    fn png_round_trip_is_exact_on_quantized_values() {
        let dir = std::env::temp_dir().join(format!("tcdiff_img_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.png");
        let mut img = ImageTensor::zeros(3, 8, 8);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = ((i % 256) as f64 / 255.0) * 2.0 - 1.0;
        }
        img.save_png(&path).unwrap();
        let back = ImageTensor::load_png(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
