//! Quality diagnostics: PSNR with a MAX = 1 convention, band-split PSNR,
//! windowed SSIM, masked fidelity PSNR, and a cosine frame-consistency
//! proxy. Identical inputs produce an infinity sentinel rather than an
//! arbitrary cap.

use crate::apf::band_split;
use crate::error::{FragError, Result};
use crate::tensor::{FrameMask, LatentSequence};

/// Low/high band scores at a given cut frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandScores {
    pub low: f64,
    pub high: f64,
    pub f_cut: f64,
}

fn check_dims(a: &LatentSequence, b: &LatentSequence) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(FragError::DimMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean squared error over all elements.
pub fn mse(a: &LatentSequence, b: &LatentSequence) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

fn mse_to_db(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// Peak signal-to-noise ratio with MAX = 1; `inf` for identical inputs.
pub fn psnr(a: &LatentSequence, b: &LatentSequence) -> Result<f64> {
    Ok(mse_to_db(mse(a, b)?))
}

/// Low- and high-band mean squared errors under the hard split at `f_cut`.
pub fn band_mse(a: &LatentSequence, b: &LatentSequence, f_cut: f64) -> Result<(f64, f64)> {
    check_dims(a, b)?;
    let (a_low, a_high) = band_split(a, f_cut)?;
    let (b_low, b_high) = band_split(b, f_cut)?;
    Ok((mse(&a_low, &b_low)?, mse(&a_high, &b_high)?))
}

/// PSNR computed separately on the low and high band-split components.
pub fn band_psnr(a: &LatentSequence, b: &LatentSequence, f_cut: f64) -> Result<BandScores> {
    let (low, high) = band_mse(a, b, f_cut)?;
    Ok(BandScores {
        low: mse_to_db(low),
        high: mse_to_db(high),
        f_cut,
    })
}

const SSIM_WINDOW: usize = 8;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean SSIM over non-overlapping 8x8 windows (stride 8), averaged across
/// channels and frames; constants C1 = 0.01^2, C2 = 0.03^2 for unit range.
pub fn ssim(a: &LatentSequence, b: &LatentSequence) -> Result<f64> {
    check_dims(a, b)?;
    let (frames, width, height, channels) = a.shape();
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(FragError::InvalidArgument(format!(
            "frames {width}x{height} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let tiles_x = width / SSIM_WINDOW;
    let tiles_y = height / SSIM_WINDOW;
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;

    let mut total = 0.0;
    let mut windows = 0usize;
    for l in 0..frames {
        for c in 0..channels {
            for ty in 0..tiles_y {
                for tx in 0..tiles_x {
                    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for dy in 0..SSIM_WINDOW {
                        for dx in 0..SSIM_WINDOW {
                            let va = a.get(l, ty * SSIM_WINDOW + dy, tx * SSIM_WINDOW + dx, c);
                            let vb = b.get(l, ty * SSIM_WINDOW + dy, tx * SSIM_WINDOW + dx, c);
                            sa += va;
                            sb += vb;
                            saa += va * va;
                            sbb += vb * vb;
                            sab += va * vb;
                        }
                    }
                    let (mu_a, mu_b) = (sa / n, sb / n);
                    let var_a = saa / n - mu_a * mu_a;
                    let var_b = sbb / n - mu_b * mu_b;
                    let cov = sab / n - mu_a * mu_b;
                    let score = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                        / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2));
                    total += score;
                    windows += 1;
                }
            }
        }
    }
    Ok(total / windows as f64)
}

/// PSNR restricted to pixels where the mask is set; the mask is applied
/// identically to both tensors across frames and channels.
pub fn masked_psnr(a: &LatentSequence, b: &LatentSequence, mask: &FrameMask) -> Result<f64> {
    check_dims(a, b)?;
    let (frames, width, height, channels) = a.shape();
    if mask.width() != width || mask.height() != height {
        return Err(FragError::DimMismatch(format!(
            "mask {}x{} vs frames {}x{}",
            mask.width(),
            mask.height(),
            width,
            height
        )));
    }
    if mask.count_ones() == 0 {
        return Err(FragError::InvalidArgument("mask selects no pixels".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for l in 0..frames {
        for y in 0..height {
            for x in 0..width {
                if !mask.get(y, x) {
                    continue;
                }
                for c in 0..channels {
                    let d = a.get(l, y, x, c) - b.get(l, y, x, c);
                    sum += d * d;
                    count += 1;
                }
            }
        }
    }
    Ok(mse_to_db(sum / count as f64))
}

/// Mean cosine similarity between consecutive frames' flattened vectors.
/// This is a model-free proxy for embedding-based consistency scores and is
/// labeled as such wherever it is reported.
pub fn frame_consistency(v: &LatentSequence) -> Result<f64> {
    if v.frames() < 2 {
        return Err(FragError::InvalidArgument(
            "consistency needs at least 2 frames".into(),
        ));
    }
    let mut total = 0.0;
    for l in 0..v.frames() - 1 {
        let (a, b) = (v.frame(l), v.frame(l + 1));
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Err(FragError::InvalidArgument(format!(
                "zero-norm frame at index {}",
                if na == 0.0 { l } else { l + 1 }
            )));
        }
        total += dot / (na * nb);
    }
    Ok(total / (v.frames() - 1) as f64)
}
