//! Frequency-domain evidence: 2-D DFT, high-frequency energy fraction, and
//! the azimuthally averaged radial power profile.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixels::Pixels;

pub const DEFAULT_HF_CUTOFF: f64 = 0.75;

/// Unnormalized forward 2-D DFT of the luminance plane, row-major bins.
#[derive(Clone, Debug)]
pub struct Spectrum {
    width: usize,
    height: usize,
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Bin at horizontal frequency index `u`, vertical index `v`.
    #[inline]
    pub fn bin(&self, u: usize, v: usize) -> Complex64 {
        self.bins[v * self.width + u]
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Sum of |F|^2 over all bins.
    pub fn total_power(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Forward 2-D DFT, unnormalized convention: `F[u,v] = sum x[m,n] *
/// exp(-2*pi*i*(u*m/W + v*n/H))`. Three-channel input is reduced to
/// luminance first.
pub fn dft2(pixels: &Pixels) -> Spectrum {
    let (w, h) = (pixels.width(), pixels.height());
    let mut bins: Vec<Complex64> = pixels
        .luminance()
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();

    let mut planner = FftPlanner::new();
    if w > 1 {
        let row_fft = planner.plan_fft_forward(w);
        crate::par::for_each_chunk_mut(&mut bins, w, |row| row_fft.process(row));
    }
    if h > 1 {
        let col_fft = planner.plan_fft_forward(h);
        // Transpose so columns become contiguous, transform, transpose back.
        let mut transposed = vec![Complex64::default(); bins.len()];
        for v in 0..h {
            for u in 0..w {
                transposed[u * h + v] = bins[v * w + u];
            }
        }
        crate::par::for_each_chunk_mut(&mut transposed, h, |col| col_fft.process(col));
        for u in 0..w {
            for v in 0..h {
                bins[v * w + u] = transposed[u * h + v];
            }
        }
    }

    Spectrum {
        width: w,
        height: h,
        bins,
    }
}

/// Frequency-domain observations for one image.
///
/// Radii are measured in cycles/pixel; the corner bin at (W/2, H/2) sits at
/// the maximum radius `sqrt(0.5)`, and `cutoff` is the fraction of that
/// radius beyond which energy counts as high-frequency. DC is excluded from
/// every statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEvidence {
    /// High-frequency energy over total non-DC energy, in [0, 1].
    pub hf_ratio: f64,
    /// Energy at the (W/2, H/2) bin over total non-DC energy. Zero when
    /// either dimension is odd (the bin does not exist).
    pub nyquist_peak: f64,
    /// Mean non-DC power per radius bin, `ceil(min(W,H)/2)` bins.
    pub radial_profile: Vec<f64>,
    pub cutoff: f64,
}

pub fn frequency_evidence(pixels: &Pixels, cutoff: f64) -> Result<FrequencyEvidence> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "hf cutoff must lie in (0, 1), got {cutoff}"
        )));
    }
    let (w, h) = (pixels.width(), pixels.height());
    if w < 8 || h < 8 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 8,
        });
    }

    let spectrum = dft2(pixels);
    let max_radius = 0.5_f64.hypot(0.5);
    let n_bins = min_dim_bins(w, h);
    let mut profile_sum = vec![0.0; n_bins];
    let mut profile_count = vec![0usize; n_bins];
    let mut total = 0.0;
    let mut high = 0.0;

    for v in 0..h {
        for u in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let power = spectrum.bin(u, v).norm_sqr();
            let fu = u.min(w - u) as f64 / w as f64;
            let fv = v.min(h - v) as f64 / h as f64;
            let radius = fu.hypot(fv);
            total += power;
            if radius > cutoff * max_radius {
                high += power;
            }
            let bin = ((radius / max_radius) * n_bins as f64) as usize;
            let bin = bin.min(n_bins - 1);
            profile_sum[bin] += power;
            profile_count[bin] += 1;
        }
    }

    let hf_ratio = if total > 0.0 { high / total } else { 0.0 };
    let nyquist_peak = if w % 2 == 0 && h % 2 == 0 && total > 0.0 {
        spectrum.bin(w / 2, h / 2).norm_sqr() / total
    } else {
        0.0
    };
    let radial_profile = profile_sum
        .iter()
        .zip(&profile_count)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();

    Ok(FrequencyEvidence {
        hf_ratio,
        nyquist_peak,
        radial_profile,
        cutoff,
    })
}

fn min_dim_bins(w: usize, h: usize) -> usize {
    w.min(h).div_ceil(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;

    /// Direct double-sum DFT, the independent oracle for the FFT path.
    fn dft2_naive(pixels: &Pixels) -> Vec<Complex64> {
        let (w, h) = (pixels.width(), pixels.height());
        let luma = pixels.luminance();
        let mut out = vec![Complex64::default(); w * h];
        for v in 0..h {
            for u in 0..w {
                let mut acc = Complex64::default();
                for n in 0..h {
                    for m in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * (u as f64 * m as f64 / w as f64 + v as f64 * n as f64 / h as f64);
                        acc += luma[n * w + m] * Complex64::new(phase.cos(), phase.sin());
                    }
                }
                out[v * w + u] = acc;
            }
        }
        out
    }

    #[test]
    fn all_ones_is_dc_only() {
        let px = Pixels::constant(4, 4, 1, 1.0).unwrap();
        let spectrum = dft2(&px);
        assert!((spectrum.bin(0, 0).re - 16.0).abs() < 1e-9);
        assert!(spectrum.bin(0, 0).im.abs() < 1e-9);
        for v in 0..4 {
            for u in 0..4 {
                if u == 0 && v == 0 {
                    continue;
                }
                assert!(spectrum.bin(u, v).norm() < 1e-9, "bin ({u},{v}) not zero");
            }
        }
    }

    #[test]
    fn matches_naive_dft_on_random_image() {
        let px = testkit::noise_image(16, 16, 1, 11);
        let fast = dft2(&px);
        let naive = dft2_naive(&px);
        for (a, b) in fast.bins().iter().zip(&naive) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn row_image_equals_1d_dft() {
        let px = testkit::noise_image(13, 1, 1, 5);
        let signal = px.luminance();
        let spectrum = dft2(&px);
        for u in 0..13 {
            let mut acc = Complex64::default();
            for (m, &x) in signal.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * u as f64 * m as f64 / 13.0;
                acc += x * Complex64::new(phase.cos(), phase.sin());
            }
            assert!((spectrum.bin(u, 0) - acc).norm() < 1e-9);
        }
    }

    #[test]
    fn parseval_on_random_image() {
        let px = testkit::noise_image(16, 16, 1, 7);
        let spectrum = dft2(&px);
        let spatial: f64 = px.luminance().iter().map(|v| v * v).sum();
        let spectral = spectrum.total_power() / (16.0 * 16.0);
        assert!((spectral - spatial).abs() / spatial < 1e-6);
    }

    #[test]
    fn constant_image_has_zero_hf_and_flat_profile() {
        for level in [0.0, 0.5, 1.0] {
            let px = Pixels::constant(16, 16, 1, level).unwrap();
            let ev = frequency_evidence(&px, DEFAULT_HF_CUTOFF).unwrap();
            assert_eq!(ev.hf_ratio, 0.0);
            assert_eq!(ev.nyquist_peak, 0.0);
            assert_eq!(ev.radial_profile.len(), 8);
            assert!(ev.radial_profile.iter().all(|&p| p == 0.0));
        }
    }

    #[test]
    fn checkerboard_energy_sits_at_the_corner_bin() {
        let px = testkit::checkerboard(64, 64);
        let ev = frequency_evidence(&px, DEFAULT_HF_CUTOFF).unwrap();
        assert!(
            ev.nyquist_peak >= 0.99,
            "nyquist_peak = {}",
            ev.nyquist_peak
        );
        assert!(
            (ev.hf_ratio - 1.0).abs() <= 0.02,
            "hf_ratio = {}",
            ev.hf_ratio
        );

        // Cross-check against the direct double-sum oracle: all non-DC
        // energy lands in the (W/2, H/2) bin.
        let naive = dft2_naive(&px);
        let mut non_dc = 0.0;
        for (i, c) in naive.iter().enumerate() {
            if i != 0 {
                non_dc += c.norm_sqr();
            }
        }
        let corner = naive[32 * 64 + 32].norm_sqr();
        assert!(corner / non_dc >= 0.99);
    }

    #[test]
    fn smooth_gradient_is_low_frequency() {
        let px = testkit::radial_gradient(64, 64);
        let ev = frequency_evidence(&px, DEFAULT_HF_CUTOFF).unwrap();
        assert!(ev.hf_ratio < 0.05, "hf_ratio = {}", ev.hf_ratio);
    }

    #[test]
    fn small_images_are_rejected() {
        let px = Pixels::constant(7, 16, 1, 0.3).unwrap();
        assert!(matches!(
            frequency_evidence(&px, DEFAULT_HF_CUTOFF),
            Err(Error::ImageTooSmall { min: 8, .. })
        ));
    }

    #[test]
    fn cutoff_outside_unit_interval_is_rejected() {
        let px = Pixels::constant(16, 16, 1, 0.3).unwrap();
        assert!(frequency_evidence(&px, 0.0).is_err());
        assert!(frequency_evidence(&px, 1.0).is_err());
    }
}
