//! The exported schedule document: one record per denoising step with the
//! adapted radius, moment, cut rank and temporal groups as inclusive index
//! ranges. This JSON file is the integration contract consumed by external
//! denoising systems.

use frag_core::grouping::StepRecord;
use frag_core::spectral::radius_bound;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub version: u32,
    pub config: ConfigEcho,
    pub steps: Vec<ScheduleStep>,
}

/// Effective configuration of the run that produced the schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub input: String,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub t_max: usize,
    pub sigma: f64,
    pub d0: f64,
    pub min_group: usize,
    pub f_cut: f64,
    pub contiguous: bool,
    pub operator: String,
    pub beta: f64,
    pub seed: u64,
    pub steps: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub t: usize,
    pub radius: f64,
    /// `[M_x, M_y]` of the differential moment; null on the d0 fallback.
    pub moment: Option<[f64; 2]>,
    pub n_cut: usize,
    /// Inclusive `[start, end]` frame ranges, ascending.
    pub groups: Vec<[usize; 2]>,
}

impl ScheduleStep {
    /// Converts a pipeline record; the groups must be contiguous intervals.
    pub fn from_record(record: &StepRecord) -> Result<Self, String> {
        let intervals = record
            .groups
            .intervals()
            .ok_or_else(|| "groups are not contiguous intervals".to_string())?;
        Ok(ScheduleStep {
            t: record.t,
            radius: record.radius,
            moment: record.moment.map(|m| [m.mx, m.my]),
            n_cut: record.n_cut,
            groups: intervals.into_iter().map(|(s, e)| [s, e]).collect(),
        })
    }
}

/// Structural validation of a schedule document. Returns a description of
/// the first violation found.
pub fn validate_schedule(doc: &ScheduleDocument) -> Result<(), String> {
    if doc.version != 1 {
        return Err(format!("unsupported schedule version {}", doc.version));
    }
    let cfg = &doc.config;
    if doc.steps.is_empty() {
        return Err("schedule has no steps".into());
    }
    if !doc.steps.windows(2).all(|w| w[0].t > w[1].t) {
        return Err("steps are not strictly descending in t".into());
    }
    let bound = radius_bound(cfg.width, cfg.height);
    let n_root = cfg.frames.saturating_sub(1);
    for step in &doc.steps {
        if step.t >= cfg.t_max {
            return Err(format!("step t={} outside [0, {}]", step.t, cfg.t_max - 1));
        }
        if !(step.radius > 0.0 && step.radius < bound) {
            return Err(format!(
                "step t={}: radius {} outside (0, {bound})",
                step.t, step.radius
            ));
        }
        if !(1..=n_root).contains(&step.n_cut) {
            return Err(format!(
                "step t={}: n_cut {} outside [1, {n_root}]",
                step.t, step.n_cut
            ));
        }
        // groups: ascending, disjoint, contiguous cover of 0..frames-1
        let mut next = 0usize;
        for g in &step.groups {
            let [start, end] = *g;
            if start != next || end < start {
                return Err(format!(
                    "step t={}: groups do not tile the frame range at index {next}",
                    step.t
                ));
            }
            if step.groups.len() > 1 && (end - start + 1) < cfg.min_group {
                return Err(format!(
                    "step t={}: group [{start}, {end}] smaller than min_group {}",
                    step.t, cfg.min_group
                ));
            }
            next = end + 1;
        }
        if next != cfg.frames {
            return Err(format!(
                "step t={}: groups cover {} frames, expected {}",
                step.t, next, cfg.frames
            ));
        }
    }
    Ok(())
}
