//! The adaptive frequency pass filter: a radially symmetric low-pass gain
//! surface with a unit plateau of radius `r` and a Gaussian skirt of scale
//! `sigma`, applied per frame with broadcasting over frames and channels.
//! Also the hard-threshold band splitter used by the spectral metrics.

use crate::error::{FragError, Result};
use crate::spectral::{self, forward_spectrum, inverse_spectrum, Spectrum};
use crate::tensor::LatentSequence;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// Low-pass gain surface over a `W x H` center-shifted frequency grid.
///
/// Gains are 1 wherever the bin distance `d <= r` and decay as
/// `exp(-(d - r)^2 / (2 sigma^2))` beyond the plateau.
#[derive(Debug, Clone, PartialEq)]
pub struct ApfFilter {
    radius: f64,
    sigma: f64,
    width: usize,
    height: usize,
    gains: Vec<f64>,
}

impl ApfFilter {
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn gain(&self, v: usize, u: usize) -> f64 {
        self.gains[v * self.width + u]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Renders the gain surface as a binary PGM image, gain 1 = 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.gains.iter().map(|&g| (g * 255.0).round() as u8));
        out
    }
}

/// Builds the filter for a grid, validating `0 < r < radius_bound` and
/// `sigma > 0`. The skirt is evaluated exactly; far values underflow to 0.
pub fn build_filter(radius: f64, sigma: f64, width: usize, height: usize) -> Result<ApfFilter> {
    let bound = spectral::radius_bound(width, height);
    if !(radius > 0.0 && radius < bound) {
        return Err(FragError::InvalidArgument(format!(
            "radius {radius} outside (0, {bound})"
        )));
    }
    if sigma <= 0.0 {
        return Err(FragError::InvalidArgument(format!(
            "sigma {sigma} must be > 0"
        )));
    }
    let (cx, cy) = ((width / 2) as f64, (height / 2) as f64);
    let mut gains = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            let d = (u as f64 - cx).hypot(v as f64 - cy);
            let g = if d <= radius {
                1.0
            } else {
                (-(d - radius).powi(2) / (2.0 * sigma * sigma)).exp()
            };
            gains.push(g);
        }
    }
    Ok(ApfFilter {
        radius,
        sigma,
        width,
        height,
        gains,
    })
}

fn scale_spectrum(spectrum: &Spectrum, gain: impl Fn(usize, usize) -> f64) -> Spectrum {
    let (frames, width, height, channels) = spectrum.shape();
    let mut bins = vec![Complex64::default(); frames * width * height * channels];
    for l in 0..frames {
        for v in 0..height {
            for u in 0..width {
                let g = gain(v, u);
                for c in 0..channels {
                    let i = ((l * height + v) * width + u) * channels + c;
                    bins[i] = spectrum.bins()[i] * g;
                }
            }
        }
    }
    Spectrum::from_bins(frames, width, height, channels, bins).expect("same dims")
}

/// Scales an already-computed spectrum by the filter's gain surface.
pub fn filter_spectrum(filter: &ApfFilter, spectrum: &Spectrum) -> Result<Spectrum> {
    if filter.width != spectrum.width() || filter.height != spectrum.height() {
        return Err(FragError::DimMismatch(format!(
            "filter {}x{} vs spectrum {}x{}",
            filter.width,
            filter.height,
            spectrum.width(),
            spectrum.height()
        )));
    }
    Ok(scale_spectrum(spectrum, |v, u| filter.gain(v, u)))
}

/// Refines a sequence through the filter: transform, scale bins by the gain
/// surface (broadcast over frames and channels), inverse transform.
pub fn apply_filter(filter: &ApfFilter, z: &LatentSequence) -> Result<LatentSequence> {
    if filter.width != z.width() || filter.height != z.height() {
        return Err(FragError::DimMismatch(format!(
            "filter {}x{} vs frames {}x{}",
            filter.width,
            filter.height,
            z.width(),
            z.height()
        )));
    }
    let scaled = filter_spectrum(filter, &forward_spectrum(z))?;
    inverse_spectrum(&scaled)
}

/// Splits a sequence into complementary low/high parts with hard indicator
/// masks at `d_cut = f_cut * floor(W/2) / pi`: low takes `d < d_cut`, high
/// takes `d >= d_cut`. The two parts sum back to the input.
pub fn band_split(z: &LatentSequence, f_cut: f64) -> Result<(LatentSequence, LatentSequence)> {
    if !(f_cut > 0.0 && f_cut < PI) {
        return Err(FragError::InvalidArgument(format!(
            "f_cut {f_cut} outside (0, pi)"
        )));
    }
    let d_cut = f_cut * (z.width() / 2) as f64 / PI;
    let spectrum = forward_spectrum(z);
    let low = scale_spectrum(&spectrum, |v, u| {
        if spectrum.freq_dist(v, u) < d_cut {
            1.0
        } else {
            0.0
        }
    });
    let high = scale_spectrum(&spectrum, |v, u| {
        if spectrum.freq_dist(v, u) < d_cut {
            0.0
        } else {
            1.0
        }
    });
    Ok((inverse_spectrum(&low)?, inverse_spectrum(&high)?))
}
