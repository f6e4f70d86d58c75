//! Per-frame 2-D Fourier analysis: center-shifted spectra, differential
//! spectra between denoising steps, spatial moments and the adapted filter
//! radius, plus radial magnitude profiles.
//!
//! Conventions: the forward transform is unnormalized and the inverse is
//! scaled by `1/(W*H)`. Spectra are stored center-shifted with the DC bin at
//! `(floor(W/2), floor(H/2))`; frequency-grid coordinates are
//! `x = u - floor(W/2)`, `y = v - floor(H/2)` in grid-cell units.

use crate::error::{FragError, Result};
use crate::tensor::LatentSequence;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Smallest radius accepted by the open interval `(0, radius_bound)`.
pub const MIN_RADIUS: f64 = 1e-6;

/// Largest admissible filter radius for a `W x H` grid: the distance from
/// the center to a grid corner.
pub fn radius_bound(width: usize, height: usize) -> f64 {
    ((width as f64 / 2.0).powi(2) + (height as f64 / 2.0).powi(2)).sqrt()
}

/// Clamps a radius into the open interval `(0, radius_bound(w, h))`.
pub fn clamp_radius(r: f64, width: usize, height: usize) -> f64 {
    let bound = radius_bound(width, height);
    r.max(MIN_RADIUS).min(bound.next_down())
}

/// Complex per-frame, per-channel 2-D spectrum on a center-shifted grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    frames: usize,
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    /// Builds a spectrum from raw bins in `(l, v, u, c)` order. Intended for
    /// synthetic constructions; `forward_spectrum` is the usual source.
    pub fn from_bins(
        frames: usize,
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if frames == 0 || width == 0 || height == 0 || channels == 0 {
            return Err(FragError::InvalidArgument(
                "spectrum dimensions must all be >= 1".into(),
            ));
        }
        if data.len() != frames * width * height * channels {
            return Err(FragError::DimMismatch(format!(
                "spectrum payload has {} bins, dims imply {}",
                data.len(),
                frames * width * height * channels
            )));
        }
        Ok(Self {
            frames,
            width,
            height,
            channels,
            data,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
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
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.frames, self.width, self.height, self.channels)
    }

    #[inline]
    pub fn index_of(&self, l: usize, v: usize, u: usize, c: usize) -> usize {
        ((l * self.height + v) * self.width + u) * self.channels + c
    }

    #[inline]
    pub fn bin(&self, l: usize, v: usize, u: usize, c: usize) -> Complex64 {
        self.data[self.index_of(l, v, u, c)]
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.data
    }

    /// Frequency-grid x coordinate of column `u`.
    #[inline]
    pub fn freq_x(&self, u: usize) -> f64 {
        u as f64 - (self.width / 2) as f64
    }

    /// Frequency-grid y coordinate of row `v`.
    #[inline]
    pub fn freq_y(&self, v: usize) -> f64 {
        v as f64 - (self.height / 2) as f64
    }

    /// Distance of bin `(v, u)` from the DC bin.
    #[inline]
    pub fn freq_dist(&self, v: usize, u: usize) -> f64 {
        self.freq_x(u).hypot(self.freq_y(v))
    }
}

/// Bin-wise difference of two consecutive steps' spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialSpectrum(Spectrum);

impl DifferentialSpectrum {
    pub fn spectrum(&self) -> &Spectrum {
        &self.0
    }
}

/// Intensity-weighted centroid of a differential spectrum's positive
/// quadrant, in frequency-grid units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPoint {
    pub mx: f64,
    pub my: f64,
}

impl MomentPoint {
    /// Distance of the moment point from the DC bin.
    pub fn distance(&self) -> f64 {
        self.mx.hypot(self.my)
    }
}

/// Mean spectral magnitude per normalized-frequency bin; bin `b` covers
/// `[b*pi/n_bins, (b+1)*pi/n_bins)`, the last bin closing at `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    means: Vec<f64>,
}

impl RadialProfile {
    pub fn n_bins(&self) -> usize {
        self.means.len()
    }
    pub fn means(&self) -> &[f64] {
        &self.means
    }
    /// Center frequency of bin `b`, as a fraction of pi is `(b + 0.5)/n`.
    pub fn bin_center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) * PI / self.means.len() as f64
    }
}

struct PlanePlans {
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
}

impl PlanePlans {
    fn new(width: usize, height: usize, direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        PlanePlans {
            row: planner.plan_fft(width, direction),
            col: planner.plan_fft(height, direction),
        }
    }

    /// In-place 2-D FFT of one row-major `width x height` plane.
    fn transform(&self, plane: &mut [Complex64], width: usize, height: usize) {
        let mut scratch = vec![Complex64::default(); self.row.get_inplace_scratch_len()];
        for row in plane.chunks_exact_mut(width) {
            self.row.process_with_scratch(row, &mut scratch);
        }
        let mut transposed = transpose(plane, width, height);
        scratch.resize(self.col.get_inplace_scratch_len(), Complex64::default());
        for col in transposed.chunks_exact_mut(height) {
            self.col.process_with_scratch(col, &mut scratch);
        }
        let back = transpose(&transposed, height, width);
        plane.copy_from_slice(&back);
    }
}

fn transpose(plane: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = plane[y * width + x];
        }
    }
    out
}

/// Moves the DC bin from index 0 to `floor(n/2)` along both axes.
fn fft_shift(plane: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); plane.len()];
    for y in 0..height {
        let sy = (y + height / 2) % height;
        for x in 0..width {
            let sx = (x + width / 2) % width;
            out[sy * width + sx] = plane[y * width + x];
        }
    }
    out
}

/// Inverse of `fft_shift`.
fn fft_unshift(plane: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); plane.len()];
    for y in 0..height {
        let sy = (y + height / 2) % height;
        for x in 0..width {
            let sx = (x + width / 2) % width;
            out[y * width + x] = plane[sy * width + sx];
        }
    }
    out
}

fn gather_plane(z: &LatentSequence, l: usize, c: usize) -> Vec<Complex64> {
    let (w, h) = (z.width(), z.height());
    let mut plane = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            plane.push(Complex64::new(z.get(l, y, x, c), 0.0));
        }
    }
    plane
}

/// Per-frame, per-channel unnormalized 2-D DFT, center-shifted.
pub fn forward_spectrum(z: &LatentSequence) -> Spectrum {
    let (frames, width, height, channels) = z.shape();
    let plans = PlanePlans::new(width, height, FftDirection::Forward);

    let planes: Vec<Vec<Complex64>> = (0..frames * channels)
        .into_par_iter()
        .map(|i| {
            let (l, c) = (i / channels, i % channels);
            let mut plane = gather_plane(z, l, c);
            plans.transform(&mut plane, width, height);
            fft_shift(&plane, width, height)
        })
        .collect();

    let mut data = vec![Complex64::default(); frames * width * height * channels];
    for l in 0..frames {
        for c in 0..channels {
            let plane = &planes[l * channels + c];
            for v in 0..height {
                for u in 0..width {
                    data[((l * height + v) * width + u) * channels + c] = plane[v * width + u];
                }
            }
        }
    }
    Spectrum {
        frames,
        width,
        height,
        channels,
        data,
    }
}

/// Inverse of `forward_spectrum`: unshift, inverse DFT, scale by `1/(W*H)`.
/// The imaginary residue is discarded.
pub fn inverse_spectrum(spectrum: &Spectrum) -> Result<LatentSequence> {
    let (frames, width, height, channels) = spectrum.shape();
    let plans = PlanePlans::new(width, height, FftDirection::Inverse);
    let scale = 1.0 / (width as f64 * height as f64);

    let planes: Vec<Vec<f64>> = (0..frames * channels)
        .into_par_iter()
        .map(|i| {
            let (l, c) = (i / channels, i % channels);
            let mut plane = Vec::with_capacity(width * height);
            for v in 0..height {
                for u in 0..width {
                    plane.push(spectrum.bin(l, v, u, c));
                }
            }
            let mut plane = fft_unshift(&plane, width, height);
            plans.transform(&mut plane, width, height);
            plane.iter().map(|b| b.re * scale).collect()
        })
        .collect();

    let mut data = vec![0.0; frames * width * height * channels];
    for l in 0..frames {
        for c in 0..channels {
            let plane = &planes[l * channels + c];
            for y in 0..height {
                for x in 0..width {
                    data[((l * height + y) * width + x) * channels + c] = plane[y * width + x];
                }
            }
        }
    }
    LatentSequence::from_vec(frames, width, height, channels, data)
}

/// `S_t - S_prev`, bin-wise. Dimensions must match.
pub fn differential_spectrum(
    current: &Spectrum,
    previous: &Spectrum,
) -> Result<DifferentialSpectrum> {
    if current.shape() != previous.shape() {
        return Err(FragError::DimMismatch(format!(
            "differential operands {:?} vs {:?}",
            current.shape(),
            previous.shape()
        )));
    }
    let data = current
        .data
        .iter()
        .zip(&previous.data)
        .map(|(a, b)| a - b)
        .collect();
    Ok(DifferentialSpectrum(Spectrum {
        frames: current.frames,
        width: current.width,
        height: current.height,
        channels: current.channels,
        data,
    }))
}

/// Magnitude-weighted centroid of the differential spectrum over the strict
/// positive quadrant `x > 0, y > 0`, with magnitudes averaged over frames
/// and channels. Errors if the quadrant carries no mass.
pub fn spatial_moments(differential: &DifferentialSpectrum) -> Result<MomentPoint> {
    let s = differential.spectrum();
    let (frames, width, height, channels) = s.shape();
    let norm = 1.0 / (frames * channels) as f64;

    let mut weight_sum = 0.0;
    let mut mx_sum = 0.0;
    let mut my_sum = 0.0;
    for v in 0..height {
        let y = s.freq_y(v);
        if y <= 0.0 {
            continue;
        }
        for u in 0..width {
            let x = s.freq_x(u);
            if x <= 0.0 {
                continue;
            }
            let mut mag = 0.0;
            for l in 0..frames {
                for c in 0..channels {
                    mag += s.bin(l, v, u, c).norm();
                }
            }
            let w = mag * norm;
            weight_sum += w;
            mx_sum += x * w;
            my_sum += y * w;
        }
    }
    if weight_sum == 0.0 {
        return Err(FragError::DegenerateInput);
    }
    Ok(MomentPoint {
        mx: mx_sum / weight_sum,
        my: my_sum / weight_sum,
    })
}

/// `r = d(M_x, M_y) + d0`, clamped into the admissible radius interval for
/// the grid.
pub fn adapted_radius(moment: &MomentPoint, d0: f64, width: usize, height: usize) -> Result<f64> {
    if d0 < 0.0 {
        return Err(FragError::InvalidArgument("margin d0 must be >= 0".into()));
    }
    Ok(clamp_radius(moment.distance() + d0, width, height))
}

/// Mean spectral magnitude per radial bin, normalized frequency
/// `f = pi * d / floor(W/2)`. Frames must be square.
pub fn radial_profile(spectrum: &Spectrum, n_bins: usize) -> Result<RadialProfile> {
    let (frames, width, height, channels) = spectrum.shape();
    if n_bins < 2 {
        return Err(FragError::InvalidArgument("n_bins must be >= 2".into()));
    }
    if width != height {
        return Err(FragError::InvalidArgument(format!(
            "radial profile requires square frames, got {}x{}",
            width, height
        )));
    }
    let half = (width / 2) as f64;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for v in 0..height {
        for u in 0..width {
            let d = spectrum.freq_dist(v, u);
            if d > half {
                continue; // corner bins fall beyond f = pi
            }
            let b = ((d / half) * n_bins as f64).floor() as usize;
            let b = b.min(n_bins - 1);
            for l in 0..frames {
                for c in 0..channels {
                    sums[b] += spectrum.bin(l, v, u, c).norm();
                    counts[b] += 1;
                }
            }
        }
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    Ok(RadialProfile { means })
}

/// Sum of squared values, `sum |z|^2`.
pub fn spatial_energy(z: &LatentSequence) -> f64 {
    z.data().iter().map(|v| v * v).sum()
}

/// Sum of squared bin magnitudes, `sum |S|^2`.
pub fn spectral_energy(spectrum: &Spectrum) -> f64 {
    spectrum.data.iter().map(|b| b.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::LatentSequence;

    fn seeded_tensor(frames: usize, w: usize, h: usize, c: usize, seed: u64) -> LatentSequence {
        // small multiplicative congruential stream, enough for test data
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        LatentSequence::from_fn(frames, w, h, c, |_, _, _, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .unwrap()
    }

    #[test]
    fn constant_frame_has_only_dc() {
        let z = LatentSequence::from_fn(1, 8, 8, 1, |_, _, _, _| 0.75).unwrap();
        let s = forward_spectrum(&z);
        let (cu, cv) = (8 / 2, 8 / 2);
        for v in 0..8 {
            for u in 0..8 {
                let mag = s.bin(0, v, u, 0).norm();
                if (u, v) == (cu, cv) {
                    assert!((mag - 0.75 * 64.0).abs() < 1e-9);
                } else {
                    assert!(mag < 1e-9, "bin ({u},{v}) = {mag}");
                }
            }
        }
    }

    #[test]
    fn forward_inverse_round_trip() {
        let z = seeded_tensor(48, 64, 64, 4, 7);
        let back = inverse_spectrum(&forward_spectrum(&z)).unwrap();
        assert!(z.max_abs_diff(&back) < 1e-4);
    }

    #[test]
    fn dc_only_spectrum_inverts_to_constant_one() {
        let (w, h) = (16, 12);
        let mut bins = vec![Complex64::default(); w * h];
        bins[(h / 2) * w + (w / 2)] = Complex64::new((w * h) as f64, 0.0);
        let s = Spectrum::from_bins(1, w, h, 1, bins).unwrap();
        let z = inverse_spectrum(&s).unwrap();
        for &v in z.data() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval_holds() {
        let z = seeded_tensor(3, 20, 14, 2, 99);
        let s = forward_spectrum(&z);
        let lhs = spatial_energy(&z);
        let rhs = spectral_energy(&s) / (20.0 * 14.0);
        assert!((lhs - rhs).abs() <= 1e-6 * lhs.abs());
    }

    #[test]
    fn conjugate_symmetry_of_real_input() {
        let z = seeded_tensor(1, 16, 16, 1, 3);
        let s = forward_spectrum(&z);
        for v in 0..16 {
            for u in 0..16 {
                let (x, y) = (s.freq_x(u), s.freq_y(v));
                let (mu, mv) = (-x + 8.0, -y + 8.0);
                if !(0.0..16.0).contains(&mu) || !(0.0..16.0).contains(&mv) {
                    continue;
                }
                let a = s.bin(0, v, u, 0);
                let b = s.bin(0, mv as usize, mu as usize, 0).conj();
                let denom = a.norm().max(1e-30);
                assert!((a - b).norm() / denom < 1e-9);
            }
        }
    }

    #[test]
    fn differential_of_equal_spectra_is_zero() {
        let z = seeded_tensor(2, 8, 8, 1, 5);
        let s = forward_spectrum(&z);
        let d = differential_spectrum(&s, &s).unwrap();
        assert!(d.spectrum().bins().iter().all(|b| b.norm() == 0.0));
    }

    #[test]
    fn differential_against_zero_is_identity() {
        let z = seeded_tensor(2, 8, 8, 1, 6);
        let s = forward_spectrum(&z);
        let zero = Spectrum::from_bins(2, 8, 8, 1, vec![Complex64::default(); 2 * 64]).unwrap();
        let d = differential_spectrum(&s, &zero).unwrap();
        assert_eq!(d.spectrum().bins(), s.bins());
    }

    #[test]
    fn differential_rejects_dim_mismatch() {
        let a = forward_spectrum(&seeded_tensor(1, 8, 8, 1, 1));
        let b = forward_spectrum(&seeded_tensor(1, 16, 16, 1, 1));
        assert!(matches!(
            differential_spectrum(&a, &b),
            Err(FragError::DimMismatch(_))
        ));
    }

    fn point_mass_differential(
        w: usize,
        h: usize,
        points: &[(i64, i64, f64)],
    ) -> DifferentialSpectrum {
        let mut bins = vec![Complex64::default(); w * h];
        for &(x, y, mag) in points {
            let u = (x + (w / 2) as i64) as usize;
            let v = (y + (h / 2) as i64) as usize;
            bins[v * w + u] = Complex64::new(mag, 0.0);
        }
        DifferentialSpectrum(Spectrum::from_bins(1, w, h, 1, bins).unwrap())
    }

    #[test]
    fn point_mass_moment() {
        let d = point_mass_differential(16, 16, &[(5, 3, 2.0)]);
        let m = spatial_moments(&d).unwrap();
        assert!((m.mx - 5.0).abs() < 1e-12);
        assert!((m.my - 3.0).abs() < 1e-12);
        assert!((m.distance() - 34f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_moment() {
        let d = point_mass_differential(16, 16, &[(1, 1, 3.0), (3, 3, 3.0)]);
        let m = spatial_moments(&d).unwrap();
        assert_eq!(m.mx, 2.0);
        assert_eq!(m.my, 2.0);
        assert!((m.distance() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_quadrant_errors() {
        // mass only on the axes and negative quadrant
        let d = point_mass_differential(16, 16, &[(0, 4, 1.0), (4, 0, 1.0), (-3, -3, 1.0)]);
        assert!(matches!(
            spatial_moments(&d),
            Err(FragError::DegenerateInput)
        ));
    }

    #[test]
    fn adapted_radius_adds_margin() {
        let m = MomentPoint { mx: 5.0, my: 3.0 };
        let r = adapted_radius(&m, 6.0, 64, 64).unwrap();
        assert!((r - (34f64.sqrt() + 6.0)).abs() < 1e-12);

        let zero = MomentPoint { mx: 0.0, my: 0.0 };
        assert_eq!(adapted_radius(&zero, 6.0, 64, 64).unwrap(), 6.0);
    }

    #[test]
    fn adapted_radius_clamps_to_grid_bound() {
        let m = MomentPoint { mx: 100.0, my: 0.0 };
        let r = adapted_radius(&m, 6.0, 64, 64).unwrap();
        let bound = radius_bound(64, 64);
        assert!(r < bound);
        assert!(bound - r < 1e-9);
        assert!((bound - 45.254833995939045).abs() < 1e-12);
    }

    #[test]
    fn radial_profile_dc_only() {
        let (w, h) = (16, 16);
        let mut bins = vec![Complex64::default(); w * h];
        bins[(h / 2) * w + (w / 2)] = Complex64::new(5.0, 0.0);
        let s = Spectrum::from_bins(1, w, h, 1, bins).unwrap();
        let p = radial_profile(&s, 8).unwrap();
        assert!(p.means()[0] > 0.0);
        assert!(p.means()[1..].iter().all(|&m| m == 0.0));
    }

    #[test]
    fn radial_profile_ring_at_half_nyquist() {
        let (w, h) = (32, 32);
        let mut bins = vec![Complex64::default(); w * h];
        let target = w as f64 / 4.0;
        for v in 0..h {
            for u in 0..w {
                let x = u as f64 - 16.0;
                let y = v as f64 - 16.0;
                if (x.hypot(y) - target).abs() < 0.5 {
                    bins[v * w + u] = Complex64::new(1.0, 0.0);
                }
            }
        }
        let s = Spectrum::from_bins(1, w, h, 1, bins).unwrap();
        let p = radial_profile(&s, 8).unwrap();
        // f = pi * (W/4) / (W/2) = 0.5 pi -> bin 4 of 8
        let hot = p
            .means()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(hot, 4);
        assert!((p.bin_center(hot) - 0.5 * PI).abs() < PI / 8.0);
    }

    #[test]
    fn radial_profile_rejects_non_square() {
        let s = forward_spectrum(&seeded_tensor(1, 8, 16, 1, 2));
        assert!(matches!(
            radial_profile(&s, 4),
            Err(FragError::InvalidArgument(_))
        ));
    }

    #[test]
    fn moments_are_scale_equivariant() {
        let z = seeded_tensor(2, 16, 16, 2, 11);
        let zero =
            Spectrum::from_bins(2, 16, 16, 2, vec![Complex64::default(); 2 * 256 * 2]).unwrap();
        let d = differential_spectrum(&forward_spectrum(&z), &zero).unwrap();
        let m1 = spatial_moments(&d).unwrap();
        let scaled = DifferentialSpectrum(Spectrum {
            frames: 2,
            width: 16,
            height: 16,
            channels: 2,
            data: d.spectrum().bins().iter().map(|b| b * 37.5).collect(),
        });
        let m2 = spatial_moments(&scaled).unwrap();
        assert!((m1.mx - m2.mx).abs() < 1e-9);
        assert!((m1.my - m2.my).abs() < 1e-9);
    }
}
