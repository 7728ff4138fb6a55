use std::collections::BTreeSet;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use ccfit::evaluation::{align_events, correlation_ratio, summarize, EventOutcome};
use ccfit::geometry::JointType;
use ccfit::io::{self as codec, fmt_float};
use ccfit::sinusoid::ParamBounds;
use ccfit::stream::run_stream;
use ccfit::sweep::{self, SweepCell, SweepGrid, Trial, SWEEP_VARIABLES};
use ccfit::synth::{self, Schedule, SynthSpec};
use ccfit::{DeConfig, FloorPlane, StreamConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{digest, open, sidecar, write_atomic, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "ccfit",
    version,
    about = "Chest compression rate and depth from skeletal motion capture"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit sliding-window sinusoids to a frames file and write per-window predictions.
    Fit(FitArgs),
    /// Compare predictions with reference compression events.
    Evaluate(EvaluateArgs),
    /// Run a parameter grid over a directory of trials.
    Sweep(SweepArgs),
    /// Correlation ratio of each swept parameter against an error column.
    Sensitivity(SensitivityArgs),
    /// Generate a synthetic frames/events pair with known ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JointArg {
    Shoulders,
    Elbows,
    Wrists,
    Hands,
}

impl From<JointArg> for JointType {
    fn from(j: JointArg) -> Self {
        match j {
            JointArg::Shoulders => JointType::Shoulders,
            JointArg::Elbows => JointType::Elbows,
            JointArg::Wrists => JointType::Wrists,
            JointArg::Hands => JointType::Hands,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "shoulders")]
    pub joint: JointArg,
    /// Model update frequency in updates per second.
    #[arg(long, default_value_t = 1.0)]
    pub update_hz: f64,
    /// Window length in seconds.
    #[arg(long, default_value_t = 3.0)]
    pub window_s: f64,
    #[arg(long, default_value_t = 50)]
    pub np: usize,
    #[arg(long, default_value_t = 80)]
    pub gmax: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cr: f64,
    #[arg(long, default_value_t = 0.8)]
    pub f: f64,
    /// Early-stop threshold on a window's RMSE, in meters.
    #[arg(long, default_value_t = 1e-4)]
    pub vtr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every window's per-generation best cost to this CSV.
    #[arg(long)]
    pub cost_trace: Option<PathBuf>,
}

impl FitArgs {
    fn stream_config(&self) -> CliResult<StreamConfig> {
        let bad = |flag: &str, msg: String| Err(CliError::Config(format!("--{flag}: {msg}")));
        if self.np < 4 {
            return bad("np", format!("NP ≥ 4 required, got {}", self.np));
        }
        if self.gmax < 1 {
            return bad("gmax", "G_max ≥ 1 required".into());
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return bad("cr", format!("CR must lie in [0, 1], got {}", self.cr));
        }
        if !(self.f > 0.0 && self.f.is_finite()) {
            return bad("f", format!("F > 0 required, got {}", self.f));
        }
        if self.vtr.is_nan() {
            return bad("vtr", "must be a number".into());
        }
        if !(self.update_hz > 0.0 && self.update_hz.is_finite()) {
            return bad(
                "update-hz",
                format!("must be positive, got {}", self.update_hz),
            );
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return bad(
                "window-s",
                format!("must be positive, got {}", self.window_s),
            );
        }
        Ok(StreamConfig {
            update_hz: self.update_hz,
            window_s: self.window_s,
            joint: self.joint.into(),
            de: DeConfig {
                pop_size: self.np,
                max_generations: self.gmax,
                f: self.f,
                cr: self.cr,
                vtr: self.vtr,
                seed: self.seed,
            },
            bounds: ParamBounds::default(),
            record_cost_trace: self.cost_trace.is_some(),
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Directory of `<name>.frames.jsonl` / `<name>.events.csv` pairs.
    #[arg(long)]
    pub trials: PathBuf,
    /// JSON grid of value lists; defaults to the NP × G_max grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Target {
    #[value(name = "mae_cpm")]
    #[serde(rename = "mae_cpm")]
    MaeCpm,
    #[value(name = "mae_cm")]
    #[serde(rename = "mae_cm")]
    MaeCm,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::MaeCpm => "mae_cpm",
            Target::MaeCm => "mae_cm",
        }
    }

    fn value(self, cell: &SweepCell) -> Option<f64> {
        match self {
            Target::MaeCpm => cell.mae_cpm,
            Target::MaeCm => cell.mae_cm,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub sweep: PathBuf,
    #[arg(long, value_enum)]
    pub target: Target,
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict the analysis to rows of one joint.
    #[arg(long, value_enum)]
    pub joint: Option<JointArg>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 110.0)]
    pub cpm: f64,
    #[arg(long, default_value_t = 5.0)]
    pub depth_cm: f64,
    /// Piecewise rate/depth schedule (JSON array of segments); overrides --cpm and --depth-cm.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub noise_cm: f64,
    #[arg(long, default_value_t = 120.0)]
    pub duration_s: f64,
    #[arg(long, default_value_t = 30.0)]
    pub frame_rate: f64,
    /// Probability that a joint pair is missing from a frame.
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    /// Floor plane as `nx,ny,nz,a`.
    #[arg(long, value_parser = parse_plane, default_value = "0,1,0,0")]
    pub plane: PlaneArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_frames: PathBuf,
    #[arg(long)]
    pub out_events: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneArg {
    pub n: [f64; 3],
    pub a: f64,
}

fn parse_plane(s: &str) -> Result<PlaneArg, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z, a] => Ok(PlaneArg { n: [x, y, z], a }),
        _ => Err(format!(
            "expected 4 comma-separated numbers, got {}",
            v.len()
        )),
    }
}

/// Executes a parsed command; warnings go to `log`.
pub fn execute(cli: &Cli, log: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Fit(args) => fit(args, log),
        Command::Evaluate(args) => evaluate(args, log),
        Command::Sweep(args) => run_sweep(args, log),
        Command::Sensitivity(args) => sensitivity(args, log),
        Command::Synth(args) => synthesize(args, log),
    }
}

fn warn(log: &mut dyn Write, msg: impl std::fmt::Display) {
    let _ = writeln!(log, "warning: {msg}");
}

fn read_frames(path: &Path) -> CliResult<Vec<ccfit::JointFrame>> {
    codec::read_frames(BufReader::new(open(path)?)).map_err(|e| CliError::io(path, e))
}

fn read_events(path: &Path) -> CliResult<Vec<ccfit::CompressionEvent>> {
    codec::read_events(open(path)?).map_err(|e| CliError::io(path, e))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

pub fn fit(args: &FitArgs, log: &mut dyn Write) -> CliResult<()> {
    let cfg = args.stream_config()?;
    let frames = read_frames(&args.input)?;
    let report = run_stream(&frames, &cfg)?;
    for w in &report.warnings {
        warn(log, w);
    }
    if report.stats.missing_joint > 0 {
        warn(
            log,
            format!(
                "{} of {} frames lack {} and were skipped",
                report.stats.missing_joint, report.stats.frames, cfg.joint
            ),
        );
    }
    let gaps = report.gap_count();
    if gaps > 0 {
        warn(log, format!("{gaps} windows had too few samples to fit"));
    }

    let fits: Vec<_> = report.fits().cloned().collect();
    write_atomic(&args.out, |w| {
        codec::write_predictions(&fits, w).map_err(|e| CliError::io(&args.out, e))
    })?;
    if let Some(path) = &args.cost_trace {
        write_atomic(path, |w| {
            writeln!(w, "t_update,generation,best_cost").map_err(io_err(path))?;
            for fit in &fits {
                for (g, c) in fit.cost_trace.iter().enumerate() {
                    writeln!(w, "{},{g},{}", fmt_float(fit.t_update), fmt_float(*c))
                        .map_err(io_err(path))?;
                }
            }
            Ok(())
        })?;
    }
    RunManifest::new("fit", Some(args.seed), args, vec![digest(&args.input)?])
        .write_for(&args.out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub n_events: usize,
    pub n_aligned: usize,
    pub n_unaligned: usize,
    pub n_warmup: usize,
    pub mae_cpm: Option<f64>,
    pub mae_cm: Option<f64>,
    pub per_event_table: String,
}

pub fn evaluate(args: &EvaluateArgs, log: &mut dyn Write) -> CliResult<()> {
    let predictions =
        codec::read_predictions(open(&args.pred)?).map_err(|e| CliError::io(&args.pred, e))?;
    let events = read_events(&args.reference)?;
    let outcomes = align_events(&events, &predictions);
    let summary = summarize(&outcomes);
    if summary.n_aligned == 0 {
        warn(log, "no reference event overlaps any prediction window");
    }

    let table = sidecar(&args.out, "events.csv");
    write_atomic(&table, |w| {
        let e = io_err(&table);
        writeln!(
            w,
            "start_s,end_s,ref_cpm,ref_depth_cm,pred_cpm,pred_depth_cm,n_contributing,status"
        )
        .map_err(&e)?;
        for o in &outcomes {
            let (ev, pred, status) = match o {
                EventOutcome::Aligned(a) => (a.event, Some(a), "aligned"),
                EventOutcome::Unaligned(ev) => (*ev, None, "unaligned"),
                EventOutcome::WarmUp(ev) => (*ev, None, "warmup"),
            };
            let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{status}",
                fmt_float(ev.start),
                fmt_float(ev.end),
                fmt_float(ev.freq_cpm),
                fmt_float(ev.depth_cm),
                opt(pred.map(|a| a.p_freq)),
                opt(pred.map(|a| a.p_depth)),
                pred.map_or(0, |a| a.contributing.len()),
            )
            .map_err(&e)?;
        }
        Ok(())
    })?;

    let report = EvaluationReport {
        n_events: summary.n_events,
        n_aligned: summary.n_aligned,
        n_unaligned: summary.n_unaligned,
        n_warmup: summary.n_warmup,
        mae_cpm: summary.mae_cpm.map(round9),
        mae_cm: summary.mae_cm.map(round9),
        per_event_table: table.display().to_string(),
    };
    write_atomic(&args.out, |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(|e| CliError::io(&args.out, e))?;
        w.write_all(b"\n").map_err(io_err(&args.out))
    })?;
    RunManifest::new(
        "evaluate",
        None,
        args,
        vec![digest(&args.pred)?, digest(&args.reference)?],
    )
    .write_for(&args.out)?;
    Ok(())
}

/// Rounds to the 9 significant digits used by every text output.
fn round9(x: f64) -> f64 {
    fmt_float(x).parse().unwrap_or(x)
}

const FRAMES_SUFFIX: &str = ".frames.jsonl";
const EVENTS_SUFFIX: &str = ".events.csv";

/// Trial names found in `dir`, with the files of complete pairs.
fn discover_trials(dir: &Path, log: &mut dyn Write) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let name = entry.map_err(|e| CliError::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        for suffix in [FRAMES_SUFFIX, EVENTS_SUFFIX] {
            if let Some(stem) = name.strip_suffix(suffix) {
                names.insert(stem.to_string());
            }
        }
    }
    let mut trials = Vec::new();
    for name in names {
        let frames = dir.join(format!("{name}{FRAMES_SUFFIX}"));
        let events = dir.join(format!("{name}{EVENTS_SUFFIX}"));
        if frames.is_file() && events.is_file() {
            trials.push((name, frames, events));
        } else {
            warn(
                log,
                format!("trial '{name}' has no matching frames/events pair; skipped"),
            );
        }
    }
    Ok(trials)
}

pub fn run_sweep(args: &SweepArgs, log: &mut dyn Write) -> CliResult<()> {
    let grid: SweepGrid = match &args.grid {
        Some(path) => serde_json::from_reader(BufReader::new(open(path)?))
            .map_err(|e| CliError::Config(format!("--grid {}: {e}", path.display())))?,
        None => SweepGrid::default(),
    };
    grid.validate()
        .map_err(|e| CliError::Config(format!("--grid: {e}")))?;
    if args.jobs == Some(0) {
        return Err(CliError::Config("--jobs: must be at least 1".into()));
    }

    let found = discover_trials(&args.trials, log)?;
    if found.is_empty() {
        return Err(CliError::Io(format!(
            "{}: no <name>{FRAMES_SUFFIX} / <name>{EVENTS_SUFFIX} pairs",
            args.trials.display()
        )));
    }
    let mut trials = Vec::new();
    let mut inputs = Vec::new();
    for (name, frames, events) in &found {
        trials.push(Trial {
            name: name.clone(),
            frames: read_frames(frames)?,
            events: read_events(events)?,
        });
        inputs.push(digest(frames)?);
        inputs.push(digest(events)?);
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    let cells = pool.install(|| sweep::run_sweep(&trials, &grid))?;

    write_atomic(&args.out, |w| {
        sweep::write_sweep_csv(&cells, w).map_err(io_err(&args.out))
    })?;

    #[derive(Serialize)]
    struct SweepConfig<'a> {
        args: &'a SweepArgs,
        grid: &'a SweepGrid,
    }
    RunManifest::new(
        "sweep",
        Some(grid.seed),
        SweepConfig { args, grid: &grid },
        inputs,
    )
    .write_for(&args.out)?;
    Ok(())
}

pub fn sensitivity(args: &SensitivityArgs, log: &mut dyn Write) -> CliResult<()> {
    let cells =
        sweep::read_sweep_csv(open(&args.sweep)?).map_err(|e| CliError::io(&args.sweep, e))?;
    let joint = args.joint.map(JointType::from);
    let rows: Vec<&SweepCell> = cells
        .iter()
        .filter(|c| joint.is_none_or(|j| c.config.joint == j))
        .filter(|c| args.target.value(c).is_some())
        .collect();

    let mut results = Vec::new();
    for variable in SWEEP_VARIABLES {
        let pairs: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|c| Some((sweep::variable_level(c, variable)?, args.target.value(c)?)))
            .collect();
        let levels: BTreeSet<u64> = pairs.iter().map(|p| p.0.to_bits()).collect();
        if levels.len() < 2 {
            continue;
        }
        match correlation_ratio(&pairs) {
            Ok(cr) => results.push((variable, Some(cr))),
            Err(e) => {
                warn(log, format!("{variable}: {e}"));
                results.push((variable, None));
            }
        }
    }
    if results.is_empty() {
        warn(log, "no parameter varies across the sweep rows");
    }

    write_atomic(&args.out, |w| {
        let e = io_err(&args.out);
        writeln!(w, "variable,target,correlation_ratio").map_err(&e)?;
        for (variable, cr) in &results {
            writeln!(
                w,
                "{variable},{},{}",
                args.target.name(),
                cr.map(fmt_float).unwrap_or_default()
            )
            .map_err(&e)?;
        }
        Ok(())
    })?;
    RunManifest::new("sensitivity", None, args, vec![digest(&args.sweep)?]).write_for(&args.out)?;
    Ok(())
}

pub fn synthesize(args: &SynthArgs, _log: &mut dyn Write) -> CliResult<()> {
    let schedule = match &args.schedule {
        Some(path) => serde_json::from_reader(BufReader::new(open(path)?))
            .map_err(|e| CliError::Config(format!("--schedule {}: {e}", path.display())))?,
        None => Schedule::constant(args.cpm, args.depth_cm),
    };
    let spec = SynthSpec {
        duration_s: args.duration_s,
        frame_rate: args.frame_rate,
        schedule,
        noise_sigma_cm: args.noise_cm,
        plane: FloorPlane {
            n: args.plane.n,
            a: args.plane.a,
        },
        dropout_prob: args.dropout,
        seed: args.seed,
        ..SynthSpec::default()
    };
    let data = synth::generate(&spec)?;
    write_atomic(&args.out_frames, |w| {
        codec::write_frames(&data.frames, w).map_err(|e| CliError::io(&args.out_frames, e))
    })?;
    write_atomic(&args.out_events, |w| {
        codec::write_events(&data.events, w).map_err(|e| CliError::io(&args.out_events, e))
    })?;
    let inputs = match &args.schedule {
        Some(path) => vec![digest(path)?],
        None => Vec::new(),
    };
    let manifest = RunManifest::new("synth", Some(args.seed), &spec, inputs);
    manifest.write_for(&args.out_frames)?;
    manifest.write_for(&args.out_events)?;
    Ok(())
}
