//! Subcommand definitions and handlers.

use crate::io::{atomic_write, db_json, read_config_file, to_json_bytes, CliError, CliResult};
use crate::schedule::{validate_schedule, ConfigEcho, ScheduleDocument, ScheduleStep};
use clap::{Args, Parser, Subcommand};
use frag_core::apf::{apply_filter, build_filter};
use frag_core::enhance::{apply_groupwise, GroupMean, GroupwiseOperator, PivotPropagate};
use frag_core::grouping::{
    build_merge_tree, cut_tree, frag_step_cached, schedule_cut_rank, SchedulerConfig, DEFAULT_D0,
    DEFAULT_MIN_GROUP, DEFAULT_SIGMA, DEFAULT_T_MAX,
};
use frag_core::metrics::{band_psnr, frame_consistency, masked_psnr, psnr, ssim};
use frag_core::simulate::{
    default_step_list, synth_trajectory, BaseSource, PatternId, TrajectorySpec, DEFAULT_CHANNELS,
    DEFAULT_ETA_MAX, DEFAULT_FRAMES, DEFAULT_R_MAX, DEFAULT_R_MIN, DEFAULT_SIDE,
};
use frag_core::spectral::{forward_spectrum, radial_profile, Spectrum};
use frag_core::tensor::{ingest_frames, latents_to_bytes, read_latents, FrameMask, LatentSequence};
use serde_json::json;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "frag",
    version,
    about = "Frequency-adaptive temporal receptive fields for latent video sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a trajectory and export the schedule
    Run(RunArgs),
    /// Synthesize a denoising trajectory with a planted spectral schedule
    Simulate(SimulateArgs),
    /// Radial magnitude profile of a tensor's spectrum
    Spectrum(SpectrumArgs),
    /// Build, inspect or apply a low-pass refinement filter
    Filter(FilterArgs),
    /// Cluster one tensor's frames into temporal groups
    Group(GroupArgs),
    /// Quality metrics between tensor files
    Metrics(MetricsArgs),
    /// Check a schedule document's structural invariants
    Validate(ValidateArgs),
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Filter(args) => cmd_filter(args),
        Command::Group(args) => cmd_group(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

#[derive(Args)]
struct RunArgs {
    /// Directory of z_t<step>.frag tensors (or images with --images)
    #[arg(long)]
    input: PathBuf,
    /// Treat the input directory as PGM/PPM frames of a single video
    #[arg(long)]
    images: bool,
    /// Schedule output path
    #[arg(long)]
    out: PathBuf,
    /// Optional key=value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Explicit comma-separated step list, strictly descending
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    d0: Option<f64>,
    #[arg(long)]
    min_group: Option<usize>,
    /// Band-split cut frequency in radians, recorded in the config echo
    #[arg(long)]
    f_cut: Option<f64>,
    /// Group-wise operator: none, group-mean or pivot
    #[arg(long)]
    operator: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    /// Directory for enhanced tensors (requires an operator)
    #[arg(long)]
    enhanced_out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ablation flag; the schedule contract requires contiguous groups
    #[arg(long)]
    no_contiguous: bool,
}

struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        Ok(FileConfig(match path {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        }))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))),
        }
    }
}

fn parse_step_list(raw: &str) -> CliResult<Vec<usize>> {
    let steps: Vec<usize> = raw
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("cannot parse step list {raw:?}")))?;
    if steps.is_empty() || !steps.windows(2).all(|w| w[0] > w[1]) {
        return Err(CliError::Usage(
            "step list must be non-empty and strictly descending".into(),
        ));
    }
    Ok(steps)
}

/// Scans a directory for `z_t<step>.frag` files.
fn scan_step_files(dir: &Path) -> CliResult<BTreeMap<usize, PathBuf>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(t) = name
            .strip_prefix("z_t")
            .and_then(|rest| rest.strip_suffix(".frag"))
            .and_then(|digits| digits.parse::<usize>().ok())
        {
            files.insert(t, path);
        }
    }
    Ok(files)
}

fn step_file_name(t: usize) -> String {
    format!("z_t{t}.frag")
}

type TensorLoader = Box<dyn Fn(usize) -> CliResult<LatentSequence>>;

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let file_cfg = FileConfig::load(args.config.as_deref())?;

    let t_max = args
        .t_max
        .or(file_cfg.get("t_max")?)
        .unwrap_or(DEFAULT_T_MAX);
    let sigma = args
        .sigma
        .or(file_cfg.get("sigma")?)
        .unwrap_or(DEFAULT_SIGMA);
    let d0 = args.d0.or(file_cfg.get("d0")?).unwrap_or(DEFAULT_D0);
    let min_group = args
        .min_group
        .or(file_cfg.get("min_group")?)
        .unwrap_or(DEFAULT_MIN_GROUP);
    let f_cut = args.f_cut.or(file_cfg.get("f_cut")?).unwrap_or(0.25 * PI);
    let operator = args
        .operator
        .or(file_cfg.get("operator")?)
        .unwrap_or_else(|| "none".to_string());
    let beta = args.beta.or(file_cfg.get("beta")?).unwrap_or(0.5);
    let seed = args.seed.or(file_cfg.get("seed")?).unwrap_or(0);
    let contiguous = if args.no_contiguous {
        false
    } else {
        file_cfg.get("contiguous")?.unwrap_or(true)
    };
    if !contiguous {
        return Err(CliError::Usage(
            "the schedule contract requires contiguous groups; use `frag group --no-contiguous` \
             for unconstrained clustering"
                .into(),
        ));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(CliError::Usage(format!("beta {beta} outside [0, 1]")));
    }
    let operator_obj: Option<Box<dyn GroupwiseOperator>> = match operator.as_str() {
        "none" => None,
        "group-mean" => Some(Box::new(GroupMean)),
        "pivot" => Some(Box::new(PivotPropagate { beta })),
        other => {
            return Err(CliError::Usage(format!(
                "unknown operator {other:?} (expected none, group-mean or pivot)"
            )))
        }
    };
    if args.enhanced_out.is_some() && operator_obj.is_none() {
        return Err(CliError::Usage(
            "--enhanced-out requires an operator".into(),
        ));
    }

    let explicit_steps = match args.steps.as_deref().map(parse_step_list) {
        Some(result) => Some(result?),
        None => file_cfg
            .get::<String>("steps")?
            .map(|raw| parse_step_list(&raw))
            .transpose()?,
    };

    // resolve the input source and the step list
    let (steps, load): (Vec<usize>, TensorLoader) = if args.images {
        let video = ingest_frames(&args.input)?;
        let steps = explicit_steps.unwrap_or_else(|| default_step_list(t_max));
        (steps, Box::new(move |_| Ok(video.clone())))
    } else {
        let files = scan_step_files(&args.input)?;
        if files.is_empty() {
            return Err(CliError::data(
                "invalid-argument",
                format!("no z_t<step>.frag files in {}", args.input.display()),
            ));
        }
        let steps = match explicit_steps {
            Some(steps) => {
                for t in &steps {
                    if !files.contains_key(t) {
                        return Err(CliError::data(
                            "invalid-argument",
                            format!("no tensor file for step {t}"),
                        ));
                    }
                }
                steps
            }
            None => files.keys().rev().copied().collect(),
        };
        (steps, Box::new(move |t| Ok(read_latents(&files[&t])?)))
    };
    if steps.iter().any(|&t| t >= t_max) {
        return Err(CliError::Usage(format!(
            "step list exceeds t_max - 1 = {}",
            t_max - 1
        )));
    }

    let first = load(steps[0])?;
    let (frames, width, height, channels) = first.shape();
    let cfg = SchedulerConfig {
        t_max,
        n_root: frames.saturating_sub(1),
        min_group,
        d0,
        sigma,
    };

    let mut schedule_steps = Vec::with_capacity(steps.len());
    let mut prev_spectrum: Option<Spectrum> = None;
    for (i, &t) in steps.iter().enumerate() {
        let z = if i == 0 { first.clone() } else { load(t)? };
        let (record, spectrum) = frag_step_cached(&z, prev_spectrum.as_ref(), t, &cfg, true)?;
        if let Some(op) = operator_obj.as_deref() {
            let enhanced = apply_groupwise(op, &record.groups, &z)?;
            if let Some(dir) = &args.enhanced_out {
                std::fs::create_dir_all(dir)?;
                atomic_write(&dir.join(step_file_name(t)), &latents_to_bytes(&enhanced)?)?;
            }
        }
        schedule_steps
            .push(ScheduleStep::from_record(&record).map_err(|m| CliError::data("schedule", m))?);
        prev_spectrum = Some(spectrum);
    }

    let document = ScheduleDocument {
        version: 1,
        config: ConfigEcho {
            input: args.input.display().to_string(),
            frames,
            width,
            height,
            channels,
            t_max,
            sigma,
            d0,
            min_group,
            f_cut,
            contiguous,
            operator,
            beta,
            seed,
            steps: steps.clone(),
        },
        steps: schedule_steps,
    };
    validate_schedule(&document).map_err(|m| CliError::data("schedule", m))?;
    atomic_write(&args.out, &to_json_bytes(&document)?)?;

    println!(
        "{}",
        json!({
            "version": 1,
            "out": args.out.display().to_string(),
            "steps": steps.len(),
            "frames": frames,
            "enhanced_out": args.enhanced_out.map(|d| d.display().to_string()),
        })
    );
    Ok(())
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory for z_t<step>.frag files and trajectory.json
    #[arg(long)]
    out: PathBuf,
    /// Base video pattern: moving-edge, smooth-gradient or two-scene
    #[arg(long, default_value = "moving-edge")]
    pattern: String,
    /// Use a tensor file as the base video instead of a pattern
    #[arg(long)]
    base_file: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    frames: usize,
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    width: usize,
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    height: usize,
    #[arg(long, default_value_t = DEFAULT_CHANNELS)]
    channels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit comma-separated step list, strictly descending
    #[arg(long)]
    steps: Option<String>,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    t_max: usize,
    #[arg(long, default_value_t = DEFAULT_R_MIN)]
    r_min: f64,
    #[arg(long, default_value_t = DEFAULT_R_MAX)]
    r_max: f64,
    #[arg(long, default_value_t = 1.0)]
    exponent: f64,
    #[arg(long, default_value_t = DEFAULT_ETA_MAX)]
    eta_max: f64,
    #[arg(long, default_value_t = 1.0)]
    eta_decay: f64,
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let base = match &args.base_file {
        Some(path) => BaseSource::File(path.clone()),
        None => BaseSource::Pattern {
            id: args
                .pattern
                .parse::<PatternId>()
                .map_err(|_| CliError::Usage(format!("unknown pattern {:?}", args.pattern)))?,
            frames: args.frames,
            width: args.width,
            height: args.height,
            channels: args.channels,
        },
    };
    let steps = match args.steps.as_deref() {
        Some(raw) => parse_step_list(raw)?,
        None => default_step_list(args.t_max),
    };
    let spec = TrajectorySpec {
        base,
        steps,
        t_max: args.t_max,
        r_min: args.r_min,
        r_max: args.r_max,
        exponent: args.exponent,
        eta_max: args.eta_max,
        eta_decay: args.eta_decay,
        seed: args.seed,
    };
    let trajectory = synth_trajectory(&spec)?;

    std::fs::create_dir_all(&args.out)?;
    for step in &trajectory.steps {
        atomic_write(
            &args.out.join(step_file_name(step.t)),
            &latents_to_bytes(&step.latents)?,
        )?;
    }

    let (pattern, base_file) = match &spec.base {
        BaseSource::Pattern { id, .. } => (Some(id.as_str().to_string()), None),
        BaseSource::File(p) => (None, Some(p.display().to_string())),
    };
    let manifest = json!({
        "version": 1,
        "spec": {
            "pattern": pattern,
            "base_file": base_file,
            "frames": trajectory.x0.frames(),
            "width": trajectory.x0.width(),
            "height": trajectory.x0.height(),
            "channels": trajectory.x0.channels(),
            "t_max": spec.t_max,
            "r_min": spec.r_min,
            "r_max": spec.r_max,
            "exponent": spec.exponent,
            "eta_max": spec.eta_max,
            "eta_decay": spec.eta_decay,
            "seed": spec.seed,
        },
        "steps": trajectory.steps.iter().map(|s| {
            json!({ "t": s.t, "r_star": s.planted_radius })
        }).collect::<Vec<_>>(),
    });
    atomic_write(
        &args.out.join("trajectory.json"),
        &to_json_bytes(&manifest)?,
    )?;

    println!(
        "{}",
        json!({
            "version": 1,
            "dir": args.out.display().to_string(),
            "steps": trajectory.steps.len(),
        })
    );
    Ok(())
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 16)]
    bins: usize,
    /// Emit JSON instead of CSV
    #[arg(long)]
    json: bool,
    /// Write to a file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_spectrum(args: SpectrumArgs) -> CliResult<()> {
    let z = read_latents(&args.input)?;
    let profile = radial_profile(&forward_spectrum(&z), args.bins)?;

    let output = if args.json {
        let bins: Vec<_> = (0..profile.n_bins())
            .map(|b| json!({ "f": profile.bin_center(b), "magnitude": profile.means()[b] }))
            .collect();
        let mut bytes = serde_json::to_vec_pretty(&json!({ "version": 1, "bins": bins }))
            .map_err(|e| CliError::data("json", e.to_string()))?;
        bytes.push(b'\n');
        bytes
    } else {
        let mut csv = String::from("bin_center_f,mean_magnitude\n");
        for b in 0..profile.n_bins() {
            csv.push_str(&format!(
                "{},{}\n",
                profile.bin_center(b),
                profile.means()[b]
            ));
        }
        csv.into_bytes()
    };
    match &args.out {
        Some(path) => atomic_write(path, &output)?,
        None => print!("{}", String::from_utf8_lossy(&output)),
    }
    Ok(())
}

#[derive(Args)]
struct FilterArgs {
    /// Plateau radius in grid cells
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Take grid dimensions from a tensor file
    #[arg(long)]
    like: Option<PathBuf>,
    /// Write the gain surface as a PGM image
    #[arg(long)]
    export_heatmap: Option<PathBuf>,
    /// Apply the filter to this tensor file
    #[arg(long)]
    apply: Option<PathBuf>,
    /// Output path for --apply
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_filter(args: FilterArgs) -> CliResult<()> {
    if args.export_heatmap.is_none() && args.apply.is_none() {
        return Err(CliError::Usage(
            "nothing to do: pass --export-heatmap and/or --apply".into(),
        ));
    }

    let input = args.apply.as_deref().map(read_latents).transpose()?;
    let (width, height) = if let Some(z) = &input {
        (z.width(), z.height())
    } else if let Some(like) = &args.like {
        let z = read_latents(like)?;
        (z.width(), z.height())
    } else {
        (
            args.width.unwrap_or(DEFAULT_SIDE),
            args.height.unwrap_or(DEFAULT_SIDE),
        )
    };
    let filter = build_filter(args.r, args.sigma, width, height)?;

    if let Some(path) = &args.export_heatmap {
        atomic_write(path, &filter.to_pgm())?;
    }
    let mut applied = None;
    if let Some(z) = &input {
        let out = args
            .out
            .clone()
            .ok_or_else(|| CliError::Usage("--apply requires --out".into()))?;
        let refined = apply_filter(&filter, z)?;
        atomic_write(&out, &latents_to_bytes(&refined)?)?;
        applied = Some(out.display().to_string());
    }

    println!(
        "{}",
        json!({
            "version": 1,
            "radius": args.r,
            "sigma": args.sigma,
            "width": width,
            "height": height,
            "heatmap": args.export_heatmap.map(|p| p.display().to_string()),
            "out": applied,
        })
    );
    Ok(())
}

#[derive(Args)]
struct GroupArgs {
    #[arg(long)]
    input: PathBuf,
    /// Cut rank; mutually exclusive with --t
    #[arg(long, conflicts_with = "t")]
    n_cut: Option<usize>,
    /// Denoising step fed through the cut-rank scheduler
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    t_max: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_GROUP)]
    min_group: usize,
    /// Drop the temporal-contiguity constraint (ablation)
    #[arg(long)]
    no_contiguous: bool,
}

fn cmd_group(args: GroupArgs) -> CliResult<()> {
    let z = read_latents(&args.input)?;
    let contiguous = !args.no_contiguous;
    let tree = build_merge_tree(&z, contiguous)?;

    let cfg = SchedulerConfig {
        t_max: args.t_max,
        n_root: tree.root_rank(),
        min_group: args.min_group,
        d0: DEFAULT_D0,
        sigma: DEFAULT_SIGMA,
    };
    let n_cut = match (args.n_cut, args.t) {
        (Some(n), None) => n,
        (None, Some(t)) => schedule_cut_rank(t, &cfg)?,
        (None, None) => {
            return Err(CliError::Usage("pass either --n-cut or --t".into()));
        }
        (Some(_), Some(_)) => unreachable!("clap conflict"),
    };
    let groups = cut_tree(&tree, n_cut, args.min_group)?;

    let body = if let Some(intervals) = groups.intervals() {
        json!({
            "version": 1,
            "n_cut": n_cut,
            "contiguous": contiguous,
            "groups": intervals.iter().map(|(s, e)| json!([s, e])).collect::<Vec<_>>(),
        })
    } else {
        json!({
            "version": 1,
            "n_cut": n_cut,
            "contiguous": contiguous,
            "members": groups.groups(),
        })
    };
    println!("{body}");
    Ok(())
}

#[derive(Args)]
struct MetricsArgs {
    /// psnr, ssim, band-psnr, masked-psnr or consistency
    metric: String,
    #[arg(long)]
    a: PathBuf,
    /// Second tensor; not needed for consistency
    #[arg(long)]
    b: Option<PathBuf>,
    /// Cut frequency in radians for band-psnr
    #[arg(long)]
    f_cut: Option<f64>,
    /// PGM mask for masked-psnr (nonzero = evaluated)
    #[arg(long)]
    mask: Option<PathBuf>,
}

fn cmd_metrics(args: MetricsArgs) -> CliResult<()> {
    let a = read_latents(&args.a)?;
    let need_b = || -> CliResult<LatentSequence> {
        let path = args
            .b
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("{} needs --b", args.metric)))?;
        Ok(read_latents(path)?)
    };

    let body = match args.metric.as_str() {
        "psnr" => json!({
            "version": 1, "metric": "psnr",
            "value": db_json(psnr(&a, &need_b()?)?),
            "proxy": false,
        }),
        "ssim" => json!({
            "version": 1, "metric": "ssim",
            "value": ssim(&a, &need_b()?)?,
            "proxy": false,
        }),
        "band-psnr" => {
            let f_cut = args.f_cut.unwrap_or(0.25 * PI);
            let scores = band_psnr(&a, &need_b()?, f_cut)?;
            json!({
                "version": 1, "metric": "band-psnr",
                "value": { "low": db_json(scores.low), "high": db_json(scores.high) },
                "f_cut": f_cut,
                "proxy": false,
            })
        }
        "masked-psnr" => {
            let path = args
                .mask
                .as_ref()
                .ok_or_else(|| CliError::Usage("masked-psnr needs --mask".into()))?;
            let mask = FrameMask::from_pgm(path)?;
            json!({
                "version": 1, "metric": "masked-psnr",
                "value": db_json(masked_psnr(&a, &need_b()?, &mask)?),
                "proxy": false,
            })
        }
        "consistency" => json!({
            "version": 1, "metric": "consistency",
            "value": frame_consistency(&a)?,
            "proxy": true,
        }),
        other => {
            return Err(CliError::Usage(format!(
                "unknown metric {other:?} (expected psnr, ssim, band-psnr, masked-psnr or consistency)"
            )));
        }
    };
    println!("{body}");
    Ok(())
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    schedule: PathBuf,
}

fn cmd_validate(args: ValidateArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.schedule)?;
    let document: ScheduleDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::data("invalid-schedule", format!("cannot parse: {e}")))?;
    validate_schedule(&document).map_err(|m| CliError::data("invalid-schedule", m))?;
    println!(
        "{}",
        json!({ "version": 1, "valid": true, "steps": document.steps.len() })
    );
    Ok(())
}
