//! Shared independent oracles for integration tests: a direct O(N^2) DFT
//! evaluated straight from the definition on the centered grid, rank
//! correlation, and a tiny deterministic value stream.

#![allow(dead_code)]

use frag_core::tensor::LatentSequence;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// Deterministic pseudo-random values in [-0.5, 0.5), LCG based, no shared
/// code with the library's RNG.
pub struct ValueStream(u64);

impl ValueStream {
    pub fn new(seed: u64) -> Self {
        ValueStream(
            seed.wrapping_mul(0x9E3779B97F4A7C15)
                .wrapping_add(0x1234_5678),
        )
    }
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }
    pub fn tensor(&mut self, l: usize, w: usize, h: usize, c: usize) -> LatentSequence {
        LatentSequence::from_fn(l, w, h, c, |_, _, _, _| self.next_f64() as f32 as f64).unwrap()
    }
}

/// Direct forward DFT of one `width x height` plane, evaluated from the
/// definition and laid out on the centered grid (DC at floor(n/2)).
pub fn naive_forward_plane(plane: &[f64], width: usize, height: usize) -> Vec<Complex64> {
    let (cw, ch) = ((width / 2) as i64, (height / 2) as i64);
    let mut out = vec![Complex64::default(); width * height];
    for v in 0..height {
        let fy = v as i64 - ch;
        for u in 0..width {
            let fx = u as i64 - cw;
            let mut acc = Complex64::default();
            for sy in 0..height {
                for sx in 0..width {
                    let angle = -2.0
                        * PI
                        * (fx as f64 * sx as f64 / width as f64
                            + fy as f64 * sy as f64 / height as f64);
                    acc += plane[sy * width + sx] * Complex64::new(angle.cos(), angle.sin());
                }
            }
            out[v * width + u] = acc;
        }
    }
    out
}

/// Direct inverse DFT of one centered plane, scaled by `1/(W*H)`.
pub fn naive_inverse_plane(bins: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let (cw, ch) = ((width / 2) as i64, (height / 2) as i64);
    let scale = 1.0 / (width as f64 * height as f64);
    let mut out = vec![Complex64::default(); width * height];
    for sy in 0..height {
        for sx in 0..width {
            let mut acc = Complex64::default();
            for v in 0..height {
                let fy = v as i64 - ch;
                for u in 0..width {
                    let fx = u as i64 - cw;
                    let angle = 2.0
                        * PI
                        * (fx as f64 * sx as f64 / width as f64
                            + fy as f64 * sy as f64 / height as f64);
                    acc += bins[v * width + u] * Complex64::new(angle.cos(), angle.sin());
                }
            }
            out[sy * width + sx] = acc * scale;
        }
    }
    out
}

/// Extracts one real plane of a tensor in row-major `(y, x)` order.
pub fn plane_of(z: &LatentSequence, l: usize, c: usize) -> Vec<f64> {
    let mut plane = Vec::with_capacity(z.width() * z.height());
    for y in 0..z.height() {
        for x in 0..z.width() {
            plane.push(z.get(l, y, x, c));
        }
    }
    plane
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        let (xa, xb) = (ra[i] - mean, rb[i] - mean);
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    num / (da.sqrt() * db.sqrt())
}
