//! Resampling-residual evidence: box-average downsample, nearest-neighbor
//! upsample, and statistics over the absolute residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixels::Pixels;

pub const DEFAULT_PIXEL_FACTOR: usize = 2;

/// Residual statistics of `|x - Up(Down(x))|`, computed per channel over the
/// region that tiles evenly by `factor` (ragged edges are truncated).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelEvidence {
    pub factor: usize,
    pub residual_mean: f64,
    /// Population variance of the residual.
    pub residual_var: f64,
    pub residual_max: f64,
    /// Normalized residual autocorrelation at lag = factor (horizontal and
    /// vertical pooled), clamped to [0, 1]. Zero for a zero residual.
    pub periodicity_score: f64,
}

pub fn pixel_evidence(pixels: &Pixels, factor: usize) -> Result<PixelEvidence> {
    if factor < 2 {
        return Err(Error::InvalidConfig(format!(
            "downsample factor must be at least 2, got {factor}"
        )));
    }
    let (w, h) = (pixels.width(), pixels.height());
    if w < 2 * factor || h < 2 * factor {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 2 * factor,
        });
    }

    let crop_w = (w / factor) * factor;
    let crop_h = (h / factor) * factor;
    let channels = pixels.channels();
    let block_count = (factor * factor) as f64;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut max = 0.0_f64;
    let mut lag_num = 0.0;
    let mut lag_den = 0.0;
    let total = (crop_w * crop_h * channels) as f64;

    for c in 0..channels {
        // Residual plane for this channel.
        let mut residual = vec![0.0; crop_w * crop_h];
        for by in 0..crop_h / factor {
            for bx in 0..crop_w / factor {
                let mut block_sum = 0.0;
                for dy in 0..factor {
                    for dx in 0..factor {
                        block_sum += pixels.get(bx * factor + dx, by * factor + dy, c);
                    }
                }
                let mean = block_sum / block_count;
                for dy in 0..factor {
                    for dx in 0..factor {
                        let x = bx * factor + dx;
                        let y = by * factor + dy;
                        let r = (pixels.get(x, y, c) - mean).abs();
                        residual[y * crop_w + x] = r;
                        sum += r;
                        sum_sq += r * r;
                        if r > max {
                            max = r;
                        }
                    }
                }
            }
        }
        for y in 0..crop_h {
            for x in 0..crop_w {
                let r = residual[y * crop_w + x];
                lag_den += r * r;
                if x + factor < crop_w {
                    lag_num += r * residual[y * crop_w + x + factor];
                }
                if y + factor < crop_h {
                    lag_num += r * residual[(y + factor) * crop_w + x];
                }
            }
        }
    }

    let residual_mean = sum / total;
    let residual_var = sum_sq / total - residual_mean * residual_mean;
    let periodicity_score = if lag_den > 0.0 {
        (lag_num / lag_den).clamp(0.0, 1.0)
    } else {
        0.0
    };

    Ok(PixelEvidence {
        factor,
        residual_mean,
        residual_var: residual_var.max(0.0),
        residual_max: max,
        periodicity_score,
    })
}
