//! Frequency-adaptive temporal receptive fields over latent video sequences.
//!
//! The pipeline walks a list of denoising steps from noisy to clean. At each
//! step it transforms the latent frames into the frequency domain, measures
//! where newly synthesized content sits via the spatial moments of the
//! differential spectrum, widens a low-pass refinement filter accordingly,
//! and clusters the refined frames into contiguous temporal groups whose
//! granularity is driven by a logistic cut-rank schedule. The groups are the
//! receptive fields handed to group-wise quality operators.
//!
//! Modules:
//!
//! - [`tensor`] — tensor containers, the `.frag` file format, PGM/PPM ingest
//! - [`spectral`] — 2-D transforms, differential spectra, moments, profiles
//! - [`apf`] — the adaptive frequency pass filter and band splitting
//! - [`grouping`] — frame clustering, the cut scheduler, the step pipeline
//! - [`enhance`] — group-wise operators and the receptive-field contract
//! - [`simulate`] — synthetic denoising trajectories with planted spectra
//! - [`metrics`] — PSNR / SSIM / band metrics and a consistency proxy

pub mod apf;
pub mod enhance;
pub mod error;
pub mod grouping;
pub mod metrics;
pub mod simulate;
pub mod spectral;
pub mod tensor;

pub use error::{FragError, Result};
