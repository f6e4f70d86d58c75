//! The receptive-field contract: quality operators act on one temporal
//! group at a time and never see frames outside it. Two concrete operators
//! (group-mean broadcast and pivot propagation) plus the fixed
//! sliding-window baseline partition.

use crate::error::{FragError, Result};
use crate::grouping::{frame_distance, TemporalGroups};
use crate::tensor::LatentSequence;

/// A transformation over one stacked group of frames. `stack` holds the
/// group's frames back to back, each `frame_len` values in `(y, x, c)`
/// order; output shape must equal input shape.
pub trait GroupwiseOperator {
    fn name(&self) -> &'static str;
    fn apply(&self, stack: &mut [f64], frame_len: usize, channels: usize);
}

/// Leaves every group unchanged.
pub struct Identity;

impl GroupwiseOperator for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }
    fn apply(&self, _stack: &mut [f64], _frame_len: usize, _channels: usize) {}
}

/// Replaces every frame in the group by the group's element-wise mean.
pub struct GroupMean;

impl GroupwiseOperator for GroupMean {
    fn name(&self) -> &'static str {
        "group-mean"
    }
    fn apply(&self, stack: &mut [f64], frame_len: usize, _channels: usize) {
        let count = stack.len() / frame_len;
        let mut mean = vec![0.0; frame_len];
        for frame in stack.chunks_exact(frame_len) {
            for (m, v) in mean.iter_mut().zip(frame) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        for frame in stack.chunks_exact_mut(frame_len) {
            frame.copy_from_slice(&mean);
        }
    }
}

/// Blends every frame toward the group's medoid frame.
pub struct PivotPropagate {
    pub beta: f64,
}

impl GroupwiseOperator for PivotPropagate {
    fn name(&self) -> &'static str {
        "pivot"
    }
    fn apply(&self, stack: &mut [f64], frame_len: usize, channels: usize) {
        pivot_propagate(stack, frame_len, channels, self.beta).expect("validated beta");
    }
}

/// Index of the group's medoid: the frame with the smallest total pooled
/// frame distance to the others; ties go to the smaller index.
pub fn medoid_index(stack: &[f64], frame_len: usize, channels: usize) -> usize {
    let count = stack.len() / frame_len;
    let mut best = (f64::INFINITY, 0);
    for i in 0..count {
        let mut total = 0.0;
        for j in 0..count {
            if i == j {
                continue;
            }
            total += frame_distance(
                &stack[i * frame_len..(i + 1) * frame_len],
                &stack[j * frame_len..(j + 1) * frame_len],
                channels,
            )
            .expect("equal frame lengths");
        }
        if total < best.0 {
            best = (total, i);
        }
    }
    best.1
}

/// Blends each frame of the stacked group toward the medoid:
/// `frame <- (1 - beta) * frame + beta * pivot`.
pub fn pivot_propagate(
    stack: &mut [f64],
    frame_len: usize,
    channels: usize,
    beta: f64,
) -> Result<usize> {
    if stack.is_empty() || frame_len == 0 || !stack.len().is_multiple_of(frame_len) {
        return Err(FragError::InvalidArgument(
            "stack must hold a whole number of non-empty frames".into(),
        ));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(FragError::InvalidArgument(format!(
            "beta {beta} outside [0, 1]"
        )));
    }
    let pivot_idx = medoid_index(stack, frame_len, channels);
    let pivot = stack[pivot_idx * frame_len..(pivot_idx + 1) * frame_len].to_vec();
    for frame in stack.chunks_exact_mut(frame_len) {
        for (v, p) in frame.iter_mut().zip(&pivot) {
            *v = (1.0 - beta) * *v + beta * p;
        }
    }
    Ok(pivot_idx)
}

/// Applies `op` independently to each temporal group of `z`; frame order is
/// preserved and frames outside a group are never read or written by that
/// group's transform.
pub fn apply_groupwise(
    op: &dyn GroupwiseOperator,
    groups: &TemporalGroups,
    z: &LatentSequence,
) -> Result<LatentSequence> {
    if !groups.is_partition_of(z.frames()) {
        return Err(FragError::InvalidArgument(format!(
            "groups do not partition {} frames",
            z.frames()
        )));
    }
    let frame_len = z.width() * z.height() * z.channels();
    let mut out = z.data().to_vec();
    for group in groups.groups() {
        let mut stack = Vec::with_capacity(group.len() * frame_len);
        for &l in group {
            stack.extend_from_slice(z.frame(l));
        }
        op.apply(&mut stack, frame_len, z.channels());
        for (k, &l) in group.iter().enumerate() {
            out[l * frame_len..(l + 1) * frame_len]
                .copy_from_slice(&stack[k * frame_len..(k + 1) * frame_len]);
        }
    }
    LatentSequence::from_vec(z.frames(), z.width(), z.height(), z.channels(), out)
}

/// Consecutive disjoint windows `[0..w-1], [w..2w-1], ...`; the last window
/// may be shorter.
pub fn sliding_window_groups(frames: usize, window: usize) -> Result<TemporalGroups> {
    if window < 1 || window > frames {
        return Err(FragError::InvalidArgument(format!(
            "window {window} outside [1, {frames}]"
        )));
    }
    let groups = (0..frames)
        .step_by(window)
        .map(|start| (start..(start + window).min(frames)).collect())
        .collect();
    Ok(TemporalGroups::from_groups(groups))
}
