//! Command-line front end: scene synthesis, scale optimization, method
//! comparison, trajectory evaluation and timing.
//!
//! Exit status is 0 on success, 1 for input or parse errors and 2 for
//! algorithmic failures (no convergence, too little overlap, degenerate
//! normal equations).

pub mod bench;
pub mod config;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use scale_opt::geometry::StereoExtrinsics;
use scale_opt::image::{GrayImage, ImagePyramid};
use scale_opt::io::{self, Calibration};
use scale_opt::optimizer::{optimize_scale, KeyframeBundle, ScalePoint};
use scale_opt::stereo::{self, MatchConfig};
use scale_opt::synthetic::{brute_force_scale, render_scene, sample_points};
use scale_opt::trajectory::{self, KITTI_LENGTHS};
use scale_opt::{Error, Result};

use crate::bench::{BenchConfig, DEFAULT_POINT_COUNTS};
use crate::config::ExperimentConfig;
use crate::report::{BudgetCheck, CompareRow, KeyframeSummary, RunReport, TimingStats};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ALGORITHM: i32 = 2;

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "SCALE_OPT_THREADS";

/// Grid resolution of the energy curve written by `--plot`.
const PLOT_STEPS: usize = 400;

#[derive(Debug, Parser)]
#[command(
    name = "scale-opt",
    version,
    about = "Metric scale of monocular points from a stereo pair"
)]
pub struct Cli {
    /// Worker threads for the library (falls back to SCALE_OPT_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic stereo scene and export it with sampled points.
    Synth(SynthArgs),
    /// Optimize the scale of a point cloud against a stereo pair.
    Optimize(OptimizeArgs),
    /// Compare scale optimization with block matching on an exported scene.
    Compare(CompareArgs),
    /// KITTI-style relative trajectory errors, optionally after scale correction.
    Eval(EvalArgs),
    /// Time scale optimizations on a rendered scene.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Experiment file with a [scene] table (TOML, or JSON by extension).
    pub config: PathBuf,
    /// Output directory, created if missing.
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// KITTI calib.txt or a scene.json sidecar.
    pub calib: PathBuf,
    /// Reference image (PNG or PGM).
    pub img0: PathBuf,
    /// Second stereo image.
    pub img1: PathBuf,
    /// CSV with header `u,v,inv_depth`.
    pub points: PathBuf,
    /// Experiment file supplying [optimizer] and [matching] settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, conflicts_with = "init_from_matching")]
    pub init_scale: f64,
    /// Initialize the scale from block matching instead of --init-scale.
    #[arg(long)]
    pub init_from_matching: bool,
    /// Pyramid levels, overriding the experiment file.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Relative step size below which a level counts as converged.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write a JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write an SVG of the energy over scales around the result.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory written by `synth`.
    pub scene: PathBuf,
    /// Experiment file supplying [optimizer] and [matching] settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub init_scale: f64,
    /// Pyramid levels, overriding the experiment file.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Also write the JSON table to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth poses, KITTI format.
    pub gt: PathBuf,
    /// Estimated poses, KITTI format.
    pub est: PathBuf,
    /// Segment lengths in meters.
    #[arg(long, value_delimiter = ',', default_values_t = KITTI_LENGTHS.to_vec())]
    pub lengths: Vec<f64>,
    /// Per-keyframe scales, one per line; corrects `est` before evaluation.
    #[arg(long, requires = "keyframes")]
    pub scales: Option<PathBuf>,
    /// Keyframe frame indices, one per line, matching --scales.
    #[arg(long, requires = "scales")]
    pub keyframes: Option<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write a JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment file; its [scene] defaults to the standard scene.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Points of the headline configuration.
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    /// Timed runs per configuration.
    #[arg(long, default_value_t = 20)]
    pub repeat: usize,
    /// Pyramid levels, overriding the experiment file.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub init_scale: f64,
    /// Point counts of the scaling table.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_POINT_COUNTS.to_vec())]
    pub table_points: Vec<usize>,
    /// Write a JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_algorithmic() {
        EXIT_ALGORITHM
    } else {
        EXIT_INPUT
    }
}

/// `--threads`, else `SCALE_OPT_THREADS`, else `default` (0 lets the pool
/// pick one thread per core).
fn resolve_threads(flag: Option<usize>, default: usize) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("{THREADS_ENV}='{v}' is not a thread count"))),
        Err(_) => Ok(default),
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    // Timing defaults to one core so budgets compare across machines.
    let default_threads = usize::from(matches!(cli.command, Command::Bench(_)));
    let threads = resolve_threads(cli.threads, default_threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    })
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

fn to_json_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

fn build_bundle(
    img0: &GrayImage,
    img1: &GrayImage,
    cal: &Calibration,
    points: Vec<ScalePoint>,
    levels: usize,
) -> Result<KeyframeBundle> {
    KeyframeBundle::new(
        ImagePyramid::build(img0, &cal.k0, levels)?,
        ImagePyramid::build(img1, &cal.k1, levels)?,
        cal.extrinsics,
        points,
    )
}

/// Block matching assumes horizontal epipolar lines.
fn require_rectified(ex: &StereoExtrinsics) -> Result<()> {
    if ex.is_rectified() {
        Ok(())
    } else {
        Err(Error::Config(
            "block matching needs a rectified pair (R = I, second camera along +x)".into(),
        ))
    }
}

fn block_match_scale(
    img0: &GrayImage,
    img1: &GrayImage,
    cal: &Calibration,
    points: &[ScalePoint],
    cfg: &MatchConfig,
) -> (Result<f64>, f64) {
    if let Err(e) = require_rectified(&cal.extrinsics) {
        return (Err(e), 1.0);
    }
    let matches = stereo::match_points(img0, img1, points, cfg);
    let rejected = stereo::rejection_rate(&matches);
    let scale = stereo::scale_from_matches(points, &matches, cal.k0.fx, cal.extrinsics.baseline());
    (scale, rejected)
}

fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let scene_cfg = cfg
        .scene
        .clone()
        .ok_or_else(|| Error::Config(format!("{} has no [scene] table", a.config.display())))?;
    let scene = render_scene(&scene_cfg)?;
    let s = &cfg.sampling;
    let points = sample_points(&scene, s.points, s.inv_depth_noise, s.seed)?;
    io::write_scene(&a.out, &scene, &points)?;
    println!(
        "wrote {} ({} points, s_true = {})",
        a.out.display(),
        points.len(),
        scene.s_true
    );
    Ok(EXIT_OK)
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<i32> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(l) = a.levels {
        cfg.optimizer.levels = l;
    }
    if let Some(t) = a.tol {
        cfg.optimizer.convergence_tol = t;
    }
    cfg.optimizer.validate()?;

    let img0 = GrayImage::load(&a.img0)?;
    let img1 = GrayImage::load(&a.img1)?;
    let cal = io::load_calibration(&a.calib, &img0)?;
    let cloud = io::load_point_cloud(&a.points, &img0)?;
    if !cloud.rejected_lines.is_empty() {
        eprintln!(
            "warning: {} point lines rejected (first at line {})",
            cloud.rejected_lines.len(),
            cloud.rejected_lines[0]
        );
    }
    let n_points = cloud.points.len();

    let s0 = if a.init_from_matching {
        let (s, rejected) = block_match_scale(&img0, &img1, &cal, &cloud.points, &cfg.matching);
        let s = s?;
        eprintln!(
            "block-matching init: scale {s} ({:.1}% rejected)",
            100.0 * rejected
        );
        s
    } else {
        a.init_scale
    };

    let bundle = build_bundle(&img0, &img1, &cal, cloud.points, cfg.optimizer.levels)?;
    let t = Instant::now();
    let result = optimize_scale(&bundle, s0, &cfg.optimizer)?;
    let ms = t.elapsed().as_secs_f64() * 1e3;
    println!("{}", result.scale);

    if let Some(path) = &a.report {
        let echo = serde_json::json!({
            "optimizer": cfg.optimizer,
            "matching": cfg.matching,
            "init_scale": s0,
            "init_from_matching": a.init_from_matching,
            "calib": a.calib,
            "img0": a.img0,
            "img1": a.img1,
            "points": a.points,
        });
        let mut report = RunReport::new("optimize", echo);
        report
            .keyframes
            .push(KeyframeSummary::new(0, &result, n_points, ms));
        report.timing.push(TimingStats::from_samples(
            n_points,
            cfg.optimizer.levels,
            result.total_evaluations(),
            &[ms],
        ));
        write_file(path, &report.to_json())?;
    }
    if let Some(path) = &a.plot {
        let bf = brute_force_scale(
            &bundle,
            result.scale / 4.0,
            result.scale * 4.0,
            PLOT_STEPS,
            &cfg.optimizer,
        )?;
        let svg =
            plot::energy_curve_svg(&bf.curve, &[("optimized", result.scale), ("initial", s0)]);
        write_file(path, &svg)?;
    }

    if result.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "error: scale optimization did not converge (finest level: {:?}, valid fraction {:.2})",
            result.finest().map(|t| t.status),
            result.valid_fraction
        );
        Ok(EXIT_ALGORITHM)
    }
}

fn cmd_compare(a: &CompareArgs) -> Result<i32> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(l) = a.levels {
        cfg.optimizer.levels = l;
    }
    cfg.optimizer.validate()?;
    let scene = io::load_scene(&a.scene)?;
    let s_true = scene.meta.s_true;
    let err_pct = |s: f64| 100.0 * (s / s_true - 1.0);
    let points = scene.points.points;

    let t = Instant::now();
    let opt = build_bundle(
        &scene.img0,
        &scene.img1,
        &scene.calibration,
        points.clone(),
        cfg.optimizer.levels,
    )
    .and_then(|b| optimize_scale(&b, a.init_scale, &cfg.optimizer));
    let opt_ms = t.elapsed().as_secs_f64() * 1e3;
    let (opt_row, opt_ok) = match &opt {
        Ok(r) => (
            CompareRow {
                method: "scale-opt".into(),
                scale: Some(r.scale),
                scale_error_pct: Some(err_pct(r.scale)),
                rejected_fraction: 1.0 - r.valid_fraction,
                wall_time_ms: opt_ms,
                failure: (!r.converged).then(|| "did not converge".to_string()),
            },
            r.converged,
        ),
        Err(e) => (
            CompareRow {
                method: "scale-opt".into(),
                scale: None,
                scale_error_pct: None,
                rejected_fraction: 1.0,
                wall_time_ms: opt_ms,
                failure: Some(e.to_string()),
            },
            false,
        ),
    };

    let t = Instant::now();
    let (bm, rejected) = block_match_scale(
        &scene.img0,
        &scene.img1,
        &scene.calibration,
        &points,
        &cfg.matching,
    );
    let bm_ms = t.elapsed().as_secs_f64() * 1e3;
    let bm_row = CompareRow {
        method: "block-match".into(),
        scale: bm.as_ref().ok().copied(),
        scale_error_pct: bm.as_ref().ok().map(|&s| err_pct(s)),
        rejected_fraction: rejected,
        wall_time_ms: bm_ms,
        failure: bm.as_ref().err().map(|e| e.to_string()),
    };

    let echo = serde_json::json!({
        "scene": a.scene,
        "s_true": s_true,
        "init_scale": a.init_scale,
        "optimizer": cfg.optimizer,
        "matching": cfg.matching,
    });
    let mut report = RunReport::new("compare", echo);
    if let Ok(r) = &opt {
        report
            .keyframes
            .push(KeyframeSummary::new(0, r, points.len(), opt_ms));
    }
    report.comparison = vec![opt_row, bm_row];
    let json = report.to_json();
    println!("{json}");
    if let Some(path) = &a.report {
        write_file(path, &json)?;
    }
    Ok(if opt_ok { EXIT_OK } else { EXIT_ALGORITHM })
}

pub const EVAL_CSV_HEADER: &str = "schema_version,length_m,t_rel_pct,r_rel_deg_per_100m,segments";

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let gt = io::load_trajectory(&a.gt)?;
    let mut est = io::load_trajectory(&a.est)?;
    let correction = match (&a.scales, &a.keyframes) {
        (Some(sp), Some(kp)) => {
            let scales: Vec<f64> = io::load_column(sp)?;
            let keyframes: Vec<usize> = io::load_column(kp)?;
            est = trajectory::apply_scale_correction(&est, &scales, &keyframes)?;
            Some((scales, keyframes))
        }
        _ => None,
    };
    let errors = trajectory::relative_errors(&gt, &est, &a.lengths)?;
    let v = report::SCHEMA_VERSION;
    let mut csv = format!("{EVAL_CSV_HEADER}\n");
    for e in &errors {
        csv.push_str(&format!(
            "{v},{},{},{},{}\n",
            e.length, e.translational_pct, e.rotational_deg_per_100m, e.segments
        ));
    }
    if let Some((t, r)) = trajectory::overall_average(&errors) {
        let n: usize = errors.iter().map(|e| e.segments).sum();
        csv.push_str(&format!("{v},average,{t},{r},{n}\n"));
    } else {
        eprintln!("warning: trajectory shorter than every segment length; no errors computed");
    }
    match &a.output {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &a.report {
        let echo = serde_json::json!({
            "gt": a.gt,
            "est": a.est,
            "lengths": a.lengths,
            "scale_correction": correction.map(|(s, k)| serde_json::json!({"scales": s, "keyframes": k})),
        });
        let mut report = RunReport::new("eval", echo);
        report.segment_errors = errors;
        write_file(path, &report.to_json())?;
    }
    Ok(EXIT_OK)
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let cfg = load_config(a.config.as_deref())?;
    let mut optimizer = cfg.optimizer;
    if let Some(l) = a.levels {
        optimizer.levels = l;
    }
    let bench_cfg = BenchConfig {
        scene: cfg.scene_or_standard(),
        optimizer,
        points: a.points,
        repeat: a.repeat,
        init_scale: a.init_scale,
        point_counts: a.table_points.clone(),
        inv_depth_noise: cfg.sampling.inv_depth_noise,
        seed: cfg.sampling.seed,
    };
    let out = bench::run_bench(&bench_cfg)?;
    print!("{}", bench::format_outcome(&out));
    if let Some(path) = &a.report {
        let mut report = RunReport::new("bench", to_json_value(&bench_cfg));
        report.timing = std::iter::once(out.main.clone())
            .chain(out.by_points.iter().cloned())
            .chain(out.by_levels.iter().cloned())
            .collect();
        report.budget = Some(BudgetCheck {
            median_ms: out.main.median_ms,
            budget_ms: bench::BUDGET_MS,
            pass: out.within_budget(),
        });
        write_file(path, &report.to_json())?;
    }
    Ok(EXIT_OK)
}
