//! Derived views for the transformation-consistency skill.

use crate::pixels::Pixels;

/// View ids in production order.
pub const VIEW_IDS: [&str; 4] = ["rot90", "rot180", "grayscale", "channel-swap"];

/// Returns exactly four derived views: a clockwise quarter rotation, a half
/// rotation, the grayscale reduction, and the RGB->BGR channel swap.
pub fn transform_views(pixels: &Pixels) -> Vec<(String, Pixels)> {
    vec![
        ("rot90".to_string(), rot90(pixels)),
        ("rot180".to_string(), rot180(pixels)),
        ("grayscale".to_string(), grayscale(pixels)),
        ("channel-swap".to_string(), channel_swap(pixels)),
    ]
}

/// Clockwise quarter rotation; swaps width and height.
pub fn rot90(pixels: &Pixels) -> Pixels {
    let (w, h, c) = (pixels.width(), pixels.height(), pixels.channels());
    let mut data = vec![0.0; w * h * c];
    for y in 0..w {
        for x in 0..h {
            for ch in 0..c {
                // Destination (x, y) in the h-by-w output reads from
                // (y, h - 1 - x) in the source.
                data[(y * h + x) * c + ch] = pixels.get(y, h - 1 - x, ch);
            }
        }
    }
    Pixels::new(h, w, c, data).expect("rotation preserves validity")
}

pub fn rot180(pixels: &Pixels) -> Pixels {
    let (w, h, c) = (pixels.width(), pixels.height(), pixels.channels());
    let mut data = vec![0.0; w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                data[(y * w + x) * c + ch] = pixels.get(w - 1 - x, h - 1 - y, ch);
            }
        }
    }
    Pixels::new(w, h, c, data).expect("rotation preserves validity")
}

/// Luminance reduction; single-channel input is returned unchanged.
pub fn grayscale(pixels: &Pixels) -> Pixels {
    if pixels.channels() == 1 {
        return pixels.clone();
    }
    Pixels::new(pixels.width(), pixels.height(), 1, pixels.luminance())
        .expect("luminance stays in range")
}

/// Swaps the first and third channel; identity on single-channel input.
pub fn channel_swap(pixels: &Pixels) -> Pixels {
    if pixels.channels() == 1 {
        return pixels.clone();
    }
    let mut data = pixels.data().to_vec();
    for px in data.chunks_exact_mut(3) {
        px.swap(0, 2);
    }
    Pixels::new(pixels.width(), pixels.height(), 3, data).expect("swap preserves validity")
}
