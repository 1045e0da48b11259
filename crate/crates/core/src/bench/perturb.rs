//! Robustness perturbations: baseline JPEG recompression, truncated Gaussian
//! blur, and bilinear resizing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixels::Pixels;

/// One perturbation with its parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PerturbationSpec {
    /// Encode/decode roundtrip at the given quality factor, 1..=100. Uses
    /// baseline sequential coding with the standard quantization tables
    /// scaled by the conventional mapping (5000/QF below 50, 200 - 2*QF
    /// otherwise, entries clamped to at least 1).
    Jpeg { quality: u8 },
    /// Convolution with a normalized Gaussian truncated at radius
    /// `ceil(3*sigma)`, reflect padding.
    Blur { sigma: f64 },
    /// Bilinear resize to `(floor(W*scale), floor(H*scale))`, minimum 1x1.
    Resize { scale: f64 },
}

impl PerturbationSpec {
    /// Parses the CLI grammar: `jpeg:85`, `blur:1.0`, `resize:0.5`.
    pub fn parse(text: &str) -> Result<PerturbationSpec> {
        let (kind, param) = text
            .split_once(':')
            .ok_or_else(|| Error::InvalidSpec(format!("expected kind:param, got {text:?}")))?;
        let spec = match kind {
            "jpeg" => {
                let quality: u8 = param
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad jpeg quality {param:?}")))?;
                PerturbationSpec::Jpeg { quality }
            }
            "blur" => {
                let sigma: f64 = param
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad blur sigma {param:?}")))?;
                PerturbationSpec::Blur { sigma }
            }
            "resize" => {
                let scale: f64 = param
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad resize scale {param:?}")))?;
                PerturbationSpec::Resize { scale }
            }
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown perturbation kind {other:?} (jpeg|blur|resize)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbationSpec::Jpeg { quality } => {
                if !(1..=100).contains(&quality) {
                    return Err(Error::InvalidSpec(format!(
                        "jpeg quality must lie in 1..=100, got {quality}"
                    )));
                }
            }
            PerturbationSpec::Blur { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "blur sigma must be positive, got {sigma}"
                    )));
                }
            }
            PerturbationSpec::Resize { scale } => {
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "resize scale must be positive, got {scale}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Human-readable table label, e.g. `jpeg QF=85`.
    pub fn label(&self) -> String {
        match *self {
            PerturbationSpec::Jpeg { quality } => format!("jpeg QF={quality}"),
            PerturbationSpec::Blur { sigma } => format!("blur sigma={sigma:?}"),
            PerturbationSpec::Resize { scale } => format!("resize x{scale:?}"),
        }
    }
}

/// Applies the perturbation, returning a fresh raster.
pub fn perturb(pixels: &Pixels, spec: &PerturbationSpec) -> Result<Pixels> {
    spec.validate()?;
    match *spec {
        PerturbationSpec::Jpeg { quality } => jpeg_roundtrip(pixels, quality),
        PerturbationSpec::Blur { sigma } => Ok(gaussian_blur(pixels, sigma)),
        PerturbationSpec::Resize { scale } => Ok(resize_bilinear(pixels, scale)),
    }
}

/// Encode/decode roundtrip through the baseline JPEG codec.
pub fn jpeg_roundtrip(pixels: &Pixels, quality: u8) -> Result<Pixels> {
    let raw = pixels.to_u8();
    let (w, h) = (pixels.width(), pixels.height());
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(Error::Jpeg(format!("image {w}x{h} exceeds codec limits")));
    }
    let color = if pixels.channels() == 1 {
        jpeg_encoder::ColorType::Luma
    } else {
        jpeg_encoder::ColorType::Rgb
    };
    let mut encoded = Vec::new();
    let encoder = jpeg_encoder::Encoder::new(&mut encoded, quality);
    encoder
        .encode(&raw, w as u16, h as u16, color)
        .map_err(|e| Error::Jpeg(e.to_string()))?;
    Pixels::decode_bytes(&encoded)
}

fn reflect(index: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = index;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= len {
            i = 2 * len - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Separable Gaussian blur; the kernel is normalized so constant images pass
/// through unchanged.
pub fn gaussian_blur(pixels: &Pixels, sigma: f64) -> Pixels {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f64) * (i as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }

    let (w, h, c) = (pixels.width(), pixels.height(), pixels.channels());
    // Horizontal pass.
    let mut mid = vec![0.0; w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sx = reflect(x as isize + ki as isize - radius, w);
                    acc += k * pixels.get(sx, y, ch);
                }
                mid[(y * w + x) * c + ch] = acc;
            }
        }
    }
    // Vertical pass.
    let mut out = vec![0.0; w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sy = reflect(y as isize + ki as isize - radius, h);
                    acc += k * mid[(sy * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = acc.clamp(0.0, 1.0);
            }
        }
    }
    Pixels::new(w, h, c, out).expect("blur preserves validity")
}

/// Bilinear resize to `(floor(W*scale), floor(H*scale))`, at least 1x1.
pub fn resize_bilinear(pixels: &Pixels, scale: f64) -> Pixels {
    let (w, h, c) = (pixels.width(), pixels.height(), pixels.channels());
    let out_w = ((w as f64 * scale).floor() as usize).max(1);
    let out_h = ((h as f64 * scale).floor() as usize).max(1);
    let ratio_x = w as f64 / out_w as f64;
    let ratio_y = h as f64 / out_h as f64;
    let mut out = vec![0.0; out_w * out_h * c];
    for y in 0..out_h {
        for x in 0..out_w {
            let src_x = ((x as f64 + 0.5) * ratio_x - 0.5).clamp(0.0, (w - 1) as f64);
            let src_y = ((y as f64 + 0.5) * ratio_y - 0.5).clamp(0.0, (h - 1) as f64);
            let x0 = src_x.floor() as usize;
            let y0 = src_y.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = src_x - x0 as f64;
            let fy = src_y - y0 as f64;
            for ch in 0..c {
                let top = pixels.get(x0, y0, ch) * (1.0 - fx) + pixels.get(x1, y0, ch) * fx;
                let bottom = pixels.get(x0, y1, ch) * (1.0 - fx) + pixels.get(x1, y1, ch) * fx;
                out[(y * out_w + x) * c + ch] = (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0);
            }
        }
    }
    Pixels::new(out_w, out_h, c, out).expect("resize preserves validity")
}

/// Peak signal-to-noise ratio in dB against a unit peak. Infinite for
/// identical images; errors on dimension mismatch.
pub fn psnr(a: &Pixels, b: &Pixels) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::InvalidSpec(
            "psnr inputs must share dimensions".into(),
        ));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}
