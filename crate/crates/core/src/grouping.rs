//! Temporal grouping: pooled frame distances, agglomerative min-linkage
//! clustering with an optional temporal-contiguity constraint, the logistic
//! cut-rank scheduler, and the composed per-step pipeline that turns a
//! latent sequence into a set of temporal receptive fields.

use crate::apf::{build_filter, filter_spectrum};
use crate::error::{FragError, Result};
use crate::spectral::{
    adapted_radius, clamp_radius, differential_spectrum, forward_spectrum, inverse_spectrum,
    spatial_moments, MomentPoint, Spectrum,
};
use crate::tensor::LatentSequence;

/// Spatially mean-pools a flat `(y, x, c)` frame into one value per channel.
pub fn pooled_channel_means(frame: &[f64], channels: usize) -> Vec<f64> {
    let cells = frame.len() / channels;
    let mut means = vec![0.0; channels];
    for cell in frame.chunks_exact(channels) {
        for (m, v) in means.iter_mut().zip(cell) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= cells as f64;
    }
    means
}

/// Euclidean distance between the spatially mean-pooled channel vectors of
/// two frames.
pub fn frame_distance(a: &[f64], b: &[f64], channels: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FragError::DimMismatch(format!(
            "frame payloads of {} vs {} values",
            a.len(),
            b.len()
        )));
    }
    let (pa, pb) = (
        pooled_channel_means(a, channels),
        pooled_channel_means(b, channels),
    );
    Ok(pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

fn pooled_frames(z: &LatentSequence) -> Vec<Vec<f64>> {
    (0..z.frames())
        .map(|l| pooled_channel_means(z.frame(l), z.channels()))
        .collect()
}

fn vec_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One merge in the dendrogram. Ranks run 1..=L-1 in merge order; rank 1
/// joins the globally closest admissible pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub rank: usize,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub distance: f64,
}

/// Agglomerative dendrogram over the frames of one sequence, with pooled
/// frame vectors retained for cut-time linkage queries.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTree {
    leaves: usize,
    contiguous: bool,
    merges: Vec<Merge>,
    pooled: Vec<Vec<f64>>,
}

impl MergeTree {
    pub fn leaves(&self) -> usize {
        self.leaves
    }
    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }
    pub fn contiguous(&self) -> bool {
        self.contiguous
    }
    /// Rank of the final (root) merge, `L - 1`.
    pub fn root_rank(&self) -> usize {
        self.leaves - 1
    }

    /// Partition induced by applying only merges with rank < `n_cut`;
    /// groups are ordered by smallest member.
    pub fn partition_at(&self, n_cut: usize) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.leaves).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for merge in self.merges.iter().filter(|m| m.rank < n_cut) {
            let a = find(&mut parent, merge.left[0]);
            let b = find(&mut parent, merge.right[0]);
            parent[a.max(b)] = a.min(b);
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.leaves];
        for i in 0..self.leaves {
            let root = find(&mut parent, i);
            members[root].push(i);
        }
        members.retain(|g| !g.is_empty());
        members.sort_by_key(|g| g[0]);
        members
    }

    /// Min-linkage distance between two groups. Under the contiguity
    /// constraint only temporally consecutive frame pairs are measured.
    fn linkage(&self, a: &[usize], b: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for &i in a {
            for &j in b {
                if self.contiguous && i.abs_diff(j) != 1 {
                    continue;
                }
                best = best.min(vec_distance(&self.pooled[i], &self.pooled[j]));
            }
        }
        best
    }
}

/// Ordered temporal groups partitioning the frame indices of a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalGroups {
    groups: Vec<Vec<usize>>,
}

impl TemporalGroups {
    pub fn from_groups(groups: Vec<Vec<usize>>) -> Self {
        let mut groups = groups;
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.sort_by_key(|g| g[0]);
        Self { groups }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// True when groups are pairwise disjoint and cover `0..frames`.
    pub fn is_partition_of(&self, frames: usize) -> bool {
        let mut seen = vec![false; frames];
        for g in &self.groups {
            for &i in g {
                if i >= frames || seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        seen.iter().all(|&s| s)
    }

    /// True when every group is a contiguous index interval.
    pub fn is_contiguous(&self) -> bool {
        self.groups
            .iter()
            .all(|g| g.windows(2).all(|w| w[1] == w[0] + 1))
    }

    /// Inclusive `(start, end)` intervals when the groups are contiguous.
    pub fn intervals(&self) -> Option<Vec<(usize, usize)>> {
        if !self.is_contiguous() {
            return None;
        }
        Some(
            self.groups
                .iter()
                .map(|g| (g[0], *g.last().unwrap()))
                .collect(),
        )
    }

    pub fn min_size(&self) -> usize {
        self.groups.iter().map(Vec::len).min().unwrap_or(0)
    }
}

/// Configuration for the cut-rank scheduler and the per-step pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    /// Maximum denoising step `T`; steps run `T-1` down to 0.
    pub t_max: usize,
    /// Rank of the dendrogram root, `L - 1`.
    pub n_root: usize,
    /// Smallest allowed temporal group after post-merging.
    pub min_group: usize,
    /// Radius margin added to the moment distance.
    pub d0: f64,
    /// Gaussian skirt scale of the refinement filter, in grid cells.
    pub sigma: f64,
}

pub const DEFAULT_T_MAX: usize = 1000;
pub const DEFAULT_MIN_GROUP: usize = 2;
pub const DEFAULT_D0: f64 = 6.0;
pub const DEFAULT_SIGMA: f64 = 0.25;

impl SchedulerConfig {
    /// Defaults for a sequence of `frames` frames: `T = 1000`,
    /// `n_root = frames - 1`, `min_group = 2`, `d0 = 6`, `sigma = 0.25`.
    pub fn for_frames(frames: usize) -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            n_root: frames.saturating_sub(1),
            min_group: DEFAULT_MIN_GROUP,
            d0: DEFAULT_D0,
            sigma: DEFAULT_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max < 2 {
            return Err(FragError::InvalidArgument("t_max must be >= 2".into()));
        }
        if self.n_root < 1 {
            return Err(FragError::InvalidArgument("n_root must be >= 1".into()));
        }
        if self.min_group < 1 {
            return Err(FragError::InvalidArgument("min_group must be >= 1".into()));
        }
        if self.d0 < 0.0 {
            return Err(FragError::InvalidArgument("d0 must be >= 0".into()));
        }
        if self.sigma <= 0.0 {
            return Err(FragError::InvalidArgument("sigma must be > 0".into()));
        }
        Ok(())
    }
}

/// Builds the agglomerative min-linkage dendrogram over the frames of `h`.
///
/// With `contiguous` set (the default pipeline mode) only temporally
/// adjacent clusters may merge, so every cluster at every stage is an index
/// interval. Ties on linkage distance prefer the pair whose left cluster
/// starts at the smaller frame index, then the smaller right start.
pub fn build_merge_tree(h: &LatentSequence, contiguous: bool) -> Result<MergeTree> {
    let frames = h.frames();
    if frames < 2 {
        return Err(FragError::InvalidArgument(
            "clustering requires at least 2 frames".into(),
        ));
    }
    let pooled = pooled_frames(h);
    let merges = if contiguous {
        contiguous_merges(&pooled)
    } else {
        single_linkage_merges(&pooled)
    };
    Ok(MergeTree {
        leaves: frames,
        contiguous,
        merges,
        pooled,
    })
}

/// Contiguous mode: clusters are intervals and the linkage between adjacent
/// intervals is the distance across their shared boundary (the only
/// consecutive-frame pair that spans it).
fn contiguous_merges(pooled: &[Vec<f64>]) -> Vec<Merge> {
    let frames = pooled.len();
    let boundary: Vec<f64> = (0..frames - 1)
        .map(|k| vec_distance(&pooled[k], &pooled[k + 1]))
        .collect();

    // interval clusters, each (start, members); boundary k sits between the
    // cluster containing frame k and the one containing frame k + 1
    let mut clusters: Vec<Vec<usize>> = (0..frames).map(|i| vec![i]).collect();
    let mut merges = Vec::with_capacity(frames - 1);
    let mut active: Vec<usize> = (0..frames - 1).collect();

    for rank in 1..frames {
        // smaller boundary index wins ties; it is also the smaller left start
        let (pos, &k) = active
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| boundary[a].total_cmp(&boundary[b]).then(a.cmp(&b)))
            .unwrap();
        let left_idx = clusters
            .iter()
            .position(|c| *c.last().unwrap() == k)
            .unwrap();
        let left = clusters[left_idx].clone();
        let right = clusters.remove(left_idx + 1);
        merges.push(Merge {
            rank,
            left: left.clone(),
            right: right.clone(),
            distance: boundary[k],
        });
        clusters[left_idx].extend(right);
        active.remove(pos);
    }
    merges
}

/// Unconstrained single-linkage clustering over the full pooled distance
/// matrix, for ablation runs.
fn single_linkage_merges(pooled: &[Vec<f64>]) -> Vec<Merge> {
    let frames = pooled.len();
    // clusters stay sorted by smallest member; merged clusters keep the
    // left slot, so positions track linkage-matrix rows throughout
    let mut clusters: Vec<Vec<usize>> = (0..frames).map(|i| vec![i]).collect();
    let mut linkage: Vec<Vec<f64>> = (0..frames)
        .map(|i| {
            (0..frames)
                .map(|j| vec_distance(&pooled[i], &pooled[j]))
                .collect()
        })
        .collect();

    let mut merges = Vec::with_capacity(frames - 1);
    for rank in 1..frames {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let d = linkage[a][b];
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => {
                        d < bd
                            || (d == bd
                                && (clusters[a][0], clusters[b][0])
                                    < (clusters[ba][0], clusters[bb][0]))
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (distance, a, b) = best.unwrap();
        let right = clusters.remove(b);
        let left = clusters[a].clone();
        merges.push(Merge {
            rank,
            left: left.clone(),
            right: right.clone(),
            distance,
        });
        let folded: Vec<f64> = linkage[a]
            .iter()
            .zip(&linkage[b])
            .map(|(p, q)| p.min(*q))
            .collect();
        for (row, &value) in linkage.iter_mut().zip(&folded) {
            row[a] = value;
        }
        linkage[a] = folded;
        linkage.remove(b);
        for row in &mut linkage {
            row.remove(b);
        }
        let mut merged = left;
        merged.extend(right);
        merged.sort_unstable();
        clusters[a] = merged;
    }
    merges
}

/// Logistic cut schedule: `n_cut = ceil(n_root * (1 - log(T - t) /
/// log(T - 1)))`, clamped to `[1, n_root]`.
pub fn schedule_cut_rank(t: usize, cfg: &SchedulerConfig) -> Result<usize> {
    cfg.validate()?;
    if t >= cfg.t_max {
        return Err(FragError::InvalidArgument(format!(
            "step {} outside [0, {}]",
            t,
            cfg.t_max - 1
        )));
    }
    if t == cfg.t_max - 1 {
        return Ok(cfg.n_root);
    }
    let denom = ((cfg.t_max - 1) as f64).ln();
    if denom == 0.0 {
        return Ok(1);
    }
    let raw = cfg.n_root as f64 * (1.0 - ((cfg.t_max - t) as f64).ln() / denom);
    let n = raw.ceil() as i64;
    Ok(n.clamp(1, cfg.n_root as i64) as usize)
}

/// Cuts the dendrogram at a rank threshold: merges with rank >= `n_cut` are
/// discarded and the surviving clusters become the groups. Groups smaller
/// than `min_group` are then folded into whichever neighboring group is
/// closer by linkage distance (ties go left), leftmost first.
pub fn cut_tree(tree: &MergeTree, n_cut: usize, min_group: usize) -> Result<TemporalGroups> {
    if n_cut < 1 || n_cut > tree.root_rank() {
        return Err(FragError::InvalidArgument(format!(
            "n_cut {} outside [1, {}]",
            n_cut,
            tree.root_rank()
        )));
    }
    if min_group < 1 || min_group > tree.leaves() {
        return Err(FragError::InvalidArgument(format!(
            "min_group {} outside [1, {}]",
            min_group,
            tree.leaves()
        )));
    }
    let mut groups = tree.partition_at(n_cut);

    loop {
        if groups.len() < 2 {
            break;
        }
        let Some(small) = groups.iter().position(|g| g.len() < min_group) else {
            break;
        };
        let target = if tree.contiguous {
            // neighbors in temporal order
            let left = small.checked_sub(1);
            let right = if small + 1 < groups.len() {
                Some(small + 1)
            } else {
                None
            };
            match (left, right) {
                (Some(l), Some(r)) => {
                    let dl = tree.linkage(&groups[l], &groups[small]);
                    let dr = tree.linkage(&groups[small], &groups[r]);
                    if dl <= dr {
                        l
                    } else {
                        r
                    }
                }
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => break,
            }
        } else {
            // nearest group overall by min linkage; ties to the smaller start
            let mut best = None;
            for (i, g) in groups.iter().enumerate() {
                if i == small {
                    continue;
                }
                let d = min_pairwise(&tree.pooled, g, &groups[small]);
                let better = match best {
                    None => true,
                    Some((bd, bi)) => d < bd || (d == bd && groups[i][0] < groups[bi as usize][0]),
                };
                if better {
                    best = Some((d, i as isize));
                }
            }
            best.unwrap().1 as usize
        };
        let absorbed = groups.remove(small);
        let target = if target > small { target - 1 } else { target };
        groups[target].extend(absorbed);
        groups[target].sort_unstable();
        groups.sort_by_key(|g| g[0]);
    }

    Ok(TemporalGroups::from_groups(groups))
}

fn min_pairwise(pooled: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for &i in a {
        for &j in b {
            best = best.min(vec_distance(&pooled[i], &pooled[j]));
        }
    }
    best
}

/// Output of one pipeline step: the adapted radius, the moment that produced
/// it (absent on fallback), the scheduled cut rank and the temporal groups.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub radius: f64,
    pub moment: Option<MomentPoint>,
    pub n_cut: usize,
    pub groups: TemporalGroups,
}

/// Runs one full step: differential spectrum, spatial moments, radius
/// adaption, filtering, clustering, scheduling and cutting.
///
/// Without a previous-step tensor, or when the differential carries no
/// positive-quadrant mass, the radius falls back to `d0`.
pub fn frag_step(
    z_t: &LatentSequence,
    z_prev: Option<&LatentSequence>,
    t: usize,
    cfg: &SchedulerConfig,
    contiguous: bool,
) -> Result<StepRecord> {
    let prev_spectrum = match z_prev {
        None => None,
        Some(prev) => {
            if prev.shape() != z_t.shape() {
                return Err(FragError::DimMismatch(format!(
                    "previous step {:?} vs current {:?}",
                    prev.shape(),
                    z_t.shape()
                )));
            }
            Some(forward_spectrum(prev))
        }
    };
    frag_step_cached(z_t, prev_spectrum.as_ref(), t, cfg, contiguous).map(|(record, _)| record)
}

/// `frag_step` with the previous step's spectrum supplied and the current
/// step's spectrum returned, so a driver walking a trajectory transforms
/// each tensor exactly once.
pub fn frag_step_cached(
    z_t: &LatentSequence,
    prev_spectrum: Option<&Spectrum>,
    t: usize,
    cfg: &SchedulerConfig,
    contiguous: bool,
) -> Result<(StepRecord, Spectrum)> {
    cfg.validate()?;
    let frames = z_t.frames();
    if frames < 2 {
        return Err(FragError::InvalidArgument(
            "pipeline requires at least 2 frames".into(),
        ));
    }
    if cfg.n_root != frames - 1 {
        return Err(FragError::InvalidArgument(format!(
            "n_root {} does not match root rank {} for {} frames",
            cfg.n_root,
            frames - 1,
            frames
        )));
    }
    if cfg.min_group > frames {
        return Err(FragError::InvalidArgument(format!(
            "min_group {} exceeds frame count {}",
            cfg.min_group, frames
        )));
    }

    let (width, height) = (z_t.width(), z_t.height());
    let spectrum_t = forward_spectrum(z_t);
    let fallback = clamp_radius(cfg.d0, width, height);
    let (radius, moment) = match prev_spectrum {
        None => (fallback, None),
        Some(prev) => {
            let diff = differential_spectrum(&spectrum_t, prev)?;
            match spatial_moments(&diff) {
                Ok(m) => (adapted_radius(&m, cfg.d0, width, height)?, Some(m)),
                Err(FragError::DegenerateInput) => (fallback, None),
                Err(e) => return Err(e),
            }
        }
    };

    let filter = build_filter(radius, cfg.sigma, width, height)?;
    let refined = inverse_spectrum(&filter_spectrum(&filter, &spectrum_t)?)?;
    let tree = build_merge_tree(&refined, contiguous)?;
    let n_cut = schedule_cut_rank(t, cfg)?;
    let groups = cut_tree(&tree, n_cut, cfg.min_group)?;

    Ok((
        StepRecord {
            t,
            radius,
            moment,
            n_cut,
            groups,
        },
        spectrum_t,
    ))
}
