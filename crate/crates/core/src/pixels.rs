//! Decoded raster data: row-major interleaved intensities in [0, 1].

use std::path::Path;

use image::{DynamicImage, ImageBuffer};

use crate::error::{Error, Result};

/// Luminance weights for the RGB-to-gray conversion, fixed for
/// bit-reproducible summaries.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A decoded image: `width * height * channels` intensities in [0, 1],
/// row-major, channels interleaved. `channels` is 1 (gray) or 3 (RGB).
#[derive(Clone, Debug, PartialEq)]
pub struct Pixels {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Pixels {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Pixels> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidPixels(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidPixels(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidPixels(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidPixels(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Pixels {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, channels: usize, level: f64) -> Result<Pixels> {
        Pixels::new(
            width,
            height,
            channels,
            vec![level; width * height * channels],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + channel]
    }

    /// Single-channel luminance plane. Gray images are returned as-is;
    /// RGB is mixed with the fixed 0.299/0.587/0.114 weights.
    pub fn luminance(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.clone();
        }
        self.data
            .chunks_exact(3)
            .map(|px| LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2])
            .collect()
    }

    /// Decodes an image file. 8-bit sources are divided by 255; gray inputs
    /// stay single-channel, everything else lands in RGB.
    pub fn decode_file<P: AsRef<Path>>(path: P) -> Result<Pixels> {
        let img = image::open(path.as_ref())?;
        Self::from_dynamic(img)
    }

    pub fn decode_bytes(bytes: &[u8]) -> Result<Pixels> {
        let img = image::load_from_memory(bytes)?;
        Self::from_dynamic(img)
    }

    pub(crate) fn from_dynamic(img: DynamicImage) -> Result<Pixels> {
        match img {
            DynamicImage::ImageLuma8(gray) => {
                let (w, h) = gray.dimensions();
                let data = gray.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
                Pixels::new(w as usize, h as usize, 1, data)
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                let data = rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
                Pixels::new(w as usize, h as usize, 3, data)
            }
        }
    }

    /// Quantizes to 8-bit samples (round to nearest).
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Deterministic PNG encoding, used as the wire payload for tool and
    /// reasoner requests.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let encoder = image::codecs::png::PngEncoder::new(&mut out);
        let raw = self.to_u8();
        let (w, h) = (self.width as u32, self.height as u32);
        if self.channels == 1 {
            let buf: ImageBuffer<image::Luma<u8>, _> =
                ImageBuffer::from_raw(w, h, raw).expect("sized buffer");
            buf.write_with_encoder(encoder)?;
        } else {
            let buf: ImageBuffer<image::Rgb<u8>, _> =
                ImageBuffer::from_raw(w, h, raw).expect("sized buffer");
            buf.write_with_encoder(encoder)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_buffers() {
        assert!(Pixels::new(0, 4, 1, vec![]).is_err());
        assert!(Pixels::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Pixels::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Pixels::new(2, 2, 1, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(Pixels::new(2, 2, 1, vec![0.0, 0.5, 1.0, f64::NAN]).is_err());
    }

    #[test]
    fn luminance_weights_are_fixed() {
        let px = Pixels::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(px.luminance(), vec![0.299]);
        let px = Pixels::new(1, 1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(px.luminance(), vec![0.587]);
        let px = Pixels::new(1, 1, 3, vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(px.luminance(), vec![0.114]);
    }

    #[test]
    fn png_roundtrip_preserves_8bit_content() {
        let data: Vec<f64> = (0..48).map(|i| (i % 256) as f64 / 255.0).collect();
        let px = Pixels::new(4, 4, 3, data).unwrap();
        let png = px.to_png_bytes().unwrap();
        let back = Pixels::decode_bytes(&png).unwrap();
        assert_eq!(back, px);
    }

    #[test]
    fn gray_png_stays_single_channel() {
        let px = Pixels::constant(5, 3, 1, 0.5).unwrap();
        let png = px.to_png_bytes().unwrap();
        let back = Pixels::decode_bytes(&png).unwrap();
        assert_eq!(back.channels(), 1);
        assert_eq!(back.width(), 5);
        assert_eq!(back.height(), 3);
    }
}
