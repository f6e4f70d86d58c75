//! Synthetic denoising trajectories with planted spectral schedules.
//!
//! A trajectory fixes a base video `x0`, a planted cutoff curve `r*(t)` that
//! grows as denoising progresses, and a noise amplitude curve `eta(t)` that
//! shrinks. Each step's latents are `hard_lowpass(x0, r*(t)) +
//! eta(t) * noise(seed, t)`, so the spectral content revealed between
//! consecutive steps is known exactly and the analysis side of the pipeline
//! can be checked against ground truth.
//!
//! All randomness is ChaCha20 keyed by (seed, step, purpose), with normal
//! deviates drawn via Box-Muller; trajectories are reproducible bit for bit.

use crate::error::{FragError, Result};
use crate::spectral::{forward_spectrum, inverse_spectrum, radius_bound, Spectrum};
use crate::tensor::{read_latents, LatentSequence};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

/// Built-in procedural base videos.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternId {
    /// Translating sharp diagonal edge over a pink-ish static texture;
    /// broadband, every radial band carries energy.
    MovingEdge,
    /// Drifting low-frequency cosines only; energy stays below 0.25 pi.
    SmoothGradient,
    /// Two coarse scenes switching mid-sequence, fine per-frame texture in
    /// the second half, and a channel-mean ladder shaped for clustering.
    TwoScene,
}

impl PatternId {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternId::MovingEdge => "moving-edge",
            PatternId::SmoothGradient => "smooth-gradient",
            PatternId::TwoScene => "two-scene",
        }
    }
}

impl FromStr for PatternId {
    type Err = FragError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving-edge" => Ok(PatternId::MovingEdge),
            "smooth-gradient" => Ok(PatternId::SmoothGradient),
            "two-scene" => Ok(PatternId::TwoScene),
            other => Err(FragError::UnknownPattern(other.into())),
        }
    }
}

/// Where the trajectory's clean video comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseSource {
    Pattern {
        id: PatternId,
        frames: usize,
        width: usize,
        height: usize,
        channels: usize,
    },
    File(PathBuf),
}

/// Full description of a synthetic trajectory; `(spec, seed)` determines
/// every byte of the output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub base: BaseSource,
    /// Strictly descending step values within `[0, t_max - 1]`.
    pub steps: Vec<usize>,
    pub t_max: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Shape exponent of the cutoff curve.
    pub exponent: f64,
    pub eta_max: f64,
    /// Shape exponent of the noise curve.
    pub eta_decay: f64,
    pub seed: u64,
}

pub const DEFAULT_FRAMES: usize = 48;
pub const DEFAULT_SIDE: usize = 64;
pub const DEFAULT_CHANNELS: usize = 4;
pub const DEFAULT_R_MIN: f64 = 4.0;
pub const DEFAULT_R_MAX: f64 = 40.0;
pub const DEFAULT_ETA_MAX: f64 = 0.02;

/// 50 sampling steps of stride 20 below `t_max`, descending.
pub fn default_step_list(t_max: usize) -> Vec<usize> {
    let mut steps = Vec::with_capacity(50);
    let mut t = t_max - 1;
    for _ in 0..50 {
        steps.push(t);
        if t < 20 {
            break;
        }
        t -= 20;
    }
    steps
}

impl TrajectorySpec {
    /// Default trajectory over a built-in pattern at the stock shape.
    pub fn with_pattern(id: PatternId, seed: u64) -> Self {
        TrajectorySpec {
            base: BaseSource::Pattern {
                id,
                frames: DEFAULT_FRAMES,
                width: DEFAULT_SIDE,
                height: DEFAULT_SIDE,
                channels: DEFAULT_CHANNELS,
            },
            steps: default_step_list(1000),
            t_max: 1000,
            r_min: DEFAULT_R_MIN,
            r_max: DEFAULT_R_MAX,
            exponent: 1.0,
            eta_max: DEFAULT_ETA_MAX,
            eta_decay: 1.0,
            seed,
        }
    }

    /// Planted cutoff at step `t`: `r_min + (r_max - r_min) * (1 - t/T)^p`,
    /// non-increasing in `t`.
    pub fn planted_radius(&self, t: usize) -> f64 {
        let frac = 1.0 - t as f64 / self.t_max as f64;
        self.r_min + (self.r_max - self.r_min) * frac.powf(self.exponent)
    }

    /// Noise amplitude at step `t`: `eta_max * (t/T)^decay`, non-decreasing
    /// in `t`.
    pub fn eta(&self, t: usize) -> f64 {
        self.eta_max * (t as f64 / self.t_max as f64).powf(self.eta_decay)
    }

    fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.steps.is_empty() {
            return Err(FragError::InvalidArgument("step list is empty".into()));
        }
        if self.t_max < 2 {
            return Err(FragError::InvalidArgument("t_max must be >= 2".into()));
        }
        if !self.steps.windows(2).all(|w| w[0] > w[1]) {
            return Err(FragError::InvalidArgument(
                "step list must be strictly descending".into(),
            ));
        }
        if self.steps[0] > self.t_max - 1 {
            return Err(FragError::InvalidArgument(format!(
                "step {} outside [0, {}]",
                self.steps[0],
                self.t_max - 1
            )));
        }
        let bound = radius_bound(width, height);
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max < bound) {
            return Err(FragError::InvalidArgument(format!(
                "cutoff curve requires 0 < r_min < r_max < {bound}"
            )));
        }
        if self.exponent <= 0.0 {
            return Err(FragError::InvalidArgument("exponent must be > 0".into()));
        }
        if self.eta_max < 0.0 || self.eta_decay < 0.0 {
            return Err(FragError::InvalidArgument(
                "eta_max and eta_decay must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// One synthesized step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub t: usize,
    pub planted_radius: f64,
    pub latents: LatentSequence,
}

/// A synthesized denoising trajectory, noisiest step first.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x0: LatentSequence,
    pub steps: Vec<TrajectoryStep>,
}

fn rng_for(seed: u64, t: usize, tag: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(t as u64).to_le_bytes());
    key[16..24].copy_from_slice(&tag.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

const TAG_PATTERN: u64 = 0x5041_5454_4552_4e00; // "PATTERN"
const TAG_NOISE: u64 = 0x4e4f_4953_4500_0000; // "NOISE"

fn uniform01(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal via Box-Muller on ChaCha20 uniforms.
fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64; // (0, 1]
    let u2 = uniform01(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Deterministic per-step Gaussian noise field.
pub fn gaussian_noise(
    seed: u64,
    t: usize,
    frames: usize,
    width: usize,
    height: usize,
    channels: usize,
) -> LatentSequence {
    let mut rng = rng_for(seed, t, TAG_NOISE);
    let data = (0..frames * width * height * channels)
        .map(|_| standard_normal(&mut rng))
        .collect();
    LatentSequence::from_vec(frames, width, height, channels, data).expect("finite noise")
}

/// Radially weighted random-phase texture: white noise shaped to a `1/d`
/// magnitude falloff, normalized to unit standard deviation.
fn pink_texture(width: usize, height: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let noise: Vec<f64> = (0..width * height).map(|_| standard_normal(rng)).collect();
    let plane = LatentSequence::from_vec(1, width, height, 1, noise).expect("finite");
    let spectrum = forward_spectrum(&plane);
    let shaped: Vec<Complex64> = (0..height)
        .flat_map(|v| {
            let spectrum = &spectrum;
            (0..width).map(move |u| {
                let d = spectrum.freq_dist(v, u);
                if d == 0.0 {
                    Complex64::default() // drop DC; textures are zero-mean
                } else {
                    spectrum.bin(0, v, u, 0) / d.max(1.0)
                }
            })
        })
        .collect();
    let shaped = Spectrum::from_bins(1, width, height, 1, shaped).expect("same dims");
    let textured = inverse_spectrum(&shaped).expect("finite");
    let values = textured.data();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
    values.iter().map(|v| (v - mean) * scale).collect()
}

fn make_moving_edge(
    frames: usize,
    width: usize,
    height: usize,
    channels: usize,
    seed: u64,
) -> LatentSequence {
    let mut rng = rng_for(seed, 0, TAG_PATTERN);
    let base_offset = (rng.next_u64() % width as u64) as usize;
    // duty cycle away from 1/2 keeps every diagonal harmonic populated
    let duty = (2 * width).div_ceil(5);
    let textures: Vec<Vec<f64>> = (0..channels)
        .map(|_| pink_texture(width, height, &mut rng))
        .collect();

    LatentSequence::from_fn(frames, width, height, channels, |l, y, x, c| {
        let s = (x + y + base_offset + l) % width;
        let edge = if s < duty { 1.0 } else { 0.0 };
        0.25 + 0.35 * edge + 0.2 * textures[c][y * width + x]
    })
    .expect("finite pattern")
    .quantized()
}

fn make_smooth_gradient(
    frames: usize,
    width: usize,
    height: usize,
    channels: usize,
    seed: u64,
) -> LatentSequence {
    let mut rng = rng_for(seed, 0, TAG_PATTERN);
    let phase_x = uniform01(&mut rng) * 2.0 * PI;
    let phase_y = uniform01(&mut rng) * 2.0 * PI;

    LatentSequence::from_fn(frames, width, height, channels, |l, y, x, c| {
        let drift = 0.35 * l as f64 + 0.2 * c as f64;
        let fx = 2.0 * PI * x as f64 / width as f64 + phase_x + drift;
        let fy = 2.0 * PI * 2.0 * y as f64 / height as f64 + phase_y + 0.5 * drift;
        0.5 + 0.15 * fx.cos() + 0.15 * fy.cos()
    })
    .expect("finite pattern")
    .quantized()
}

/// Channel-mean ladder of the two-scene pattern: a 0.5 jump at the scene
/// boundary, and alternating small/large per-frame steps whose magnitudes
/// grow with the frame index so boundary distances are all distinct.
fn two_scene_means(frames: usize, channels: usize) -> Vec<Vec<f64>> {
    let half = frames / 2;
    let mut means = vec![vec![0.3; channels]];
    for k in 0..frames - 1 {
        let delta = if k + 1 == half {
            0.5
        } else if k % 2 == 0 {
            0.012 + 0.001 * k as f64
        } else {
            0.040 + 0.001 * k as f64
        };
        let swing = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let prev = means.last().unwrap().clone();
        means.push(
            (0..channels)
                .map(|c| {
                    let dir = if c % 2 == 0 { 1.0 } else { -1.0 };
                    prev[c] + delta * swing * dir
                })
                .collect(),
        );
    }
    means
}

fn make_two_scene(
    frames: usize,
    width: usize,
    height: usize,
    channels: usize,
    seed: u64,
) -> LatentSequence {
    let mut rng = rng_for(seed, 0, TAG_PATTERN);
    let phase = uniform01(&mut rng) * 2.0 * PI;
    let means = two_scene_means(frames, channels);
    let half = frames / 2;
    let high_k = (width / 3).max(1) as f64;

    LatentSequence::from_fn(frames, width, height, channels, |l, y, x, c| {
        let coarse = if l < half {
            (2.0 * PI * x as f64 / width as f64 + phase).cos()
                * (2.0 * PI * y as f64 / height as f64).cos()
        } else {
            (2.0 * PI * x as f64 / width as f64 + phase + PI / 3.0).sin()
        };
        let fine = if l >= half {
            let psi = 0.9 * (l - half) as f64;
            (2.0 * PI * high_k * x as f64 / width as f64 + psi).cos()
                * (2.0 * PI * high_k * y as f64 / height as f64).cos()
        } else {
            0.0
        };
        means[l][c] + 0.1 * coarse + 0.08 * fine
    })
    .expect("finite pattern")
    .quantized()
}

/// Deterministic procedural test video; identical `(pattern, seed)` calls
/// return identical tensors.
pub fn make_test_video(
    pattern: PatternId,
    frames: usize,
    width: usize,
    height: usize,
    channels: usize,
    seed: u64,
) -> Result<LatentSequence> {
    if frames == 0 || width == 0 || height == 0 || channels == 0 {
        return Err(FragError::InvalidArgument(
            "pattern dimensions must all be >= 1".into(),
        ));
    }
    if pattern == PatternId::TwoScene && frames < 2 {
        return Err(FragError::InvalidArgument(
            "two-scene needs at least 2 frames".into(),
        ));
    }
    Ok(match pattern {
        PatternId::MovingEdge => make_moving_edge(frames, width, height, channels, seed),
        PatternId::SmoothGradient => make_smooth_gradient(frames, width, height, channels, seed),
        PatternId::TwoScene => make_two_scene(frames, width, height, channels, seed),
    })
}

/// Keeps bins with `d <= radius`, zeroes the rest.
fn hard_lowpass(spectrum: &Spectrum, radius: f64) -> Spectrum {
    let (frames, width, height, channels) = spectrum.shape();
    let mut bins = vec![Complex64::default(); spectrum.bins().len()];
    for v in 0..height {
        for u in 0..width {
            if spectrum.freq_dist(v, u) > radius {
                continue;
            }
            for l in 0..frames {
                for c in 0..channels {
                    let i = ((l * height + v) * width + u) * channels + c;
                    bins[i] = spectrum.bins()[i];
                }
            }
        }
    }
    Spectrum::from_bins(frames, width, height, channels, bins).expect("same dims")
}

/// Synthesizes the trajectory described by `spec`:
/// `z_t = hard_lowpass(x0, r*(t)) + eta(t) * gaussian_noise(seed, t)`.
pub fn synth_trajectory(spec: &TrajectorySpec) -> Result<Trajectory> {
    let x0 = match &spec.base {
        BaseSource::Pattern {
            id,
            frames,
            width,
            height,
            channels,
        } => make_test_video(*id, *frames, *width, *height, *channels, spec.seed)?,
        BaseSource::File(path) => read_latents(path)?,
    };
    spec.validate(x0.width(), x0.height())?;

    let base_spectrum = forward_spectrum(&x0);
    let (frames, width, height, channels) = x0.shape();
    let mut steps = Vec::with_capacity(spec.steps.len());
    for &t in &spec.steps {
        let r_star = spec.planted_radius(t);
        let clean = inverse_spectrum(&hard_lowpass(&base_spectrum, r_star))?;
        let eta = spec.eta(t);
        let latents = if eta == 0.0 {
            clean.quantized()
        } else {
            let noise = gaussian_noise(spec.seed, t, frames, width, height, channels);
            LatentSequence::from_vec(
                frames,
                width,
                height,
                channels,
                clean
                    .data()
                    .iter()
                    .zip(noise.data())
                    .map(|(z, n)| z + eta * n)
                    .collect(),
            )?
            .quantized()
        };
        steps.push(TrajectoryStep {
            t,
            planted_radius: r_star,
            latents,
        });
    }
    Ok(Trajectory { x0, steps })
}
