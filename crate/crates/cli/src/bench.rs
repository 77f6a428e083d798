//! Timing of single scale optimizations on a rendered scene.

use std::time::Instant;

use scale_opt::optimizer::{optimize_scale, KeyframeBundle, OptimizerConfig, ScaleResult};
use scale_opt::synthetic::{render_scene, sample_points, SceneConfig, SyntheticScene};
use scale_opt::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::report::TimingStats;

/// Desk-scale budget for the median time of one optimization.
pub const BUDGET_MS: f64 = 30.0;

pub const DEFAULT_POINT_COUNTS: [usize; 4] = [500, 1000, 2000, 4000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scene: SceneConfig,
    pub optimizer: OptimizerConfig,
    pub points: usize,
    pub repeat: usize,
    pub init_scale: f64,
    pub point_counts: Vec<usize>,
    pub inv_depth_noise: f64,
    pub seed: u64,
}

impl BenchConfig {
    pub fn standard() -> Self {
        Self {
            scene: SceneConfig::standard(),
            optimizer: OptimizerConfig::default(),
            points: 2000,
            repeat: 20,
            init_scale: 1.0,
            point_counts: DEFAULT_POINT_COUNTS.to_vec(),
            inv_depth_noise: 0.0,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOutcome {
    /// Timing at the requested point count and level count.
    pub main: TimingStats,
    /// Scale of the timed runs (identical across repeats).
    pub scale: f64,
    pub converged: bool,
    /// One row per entry of `point_counts`, at the configured level count.
    pub by_points: Vec<TimingStats>,
    /// Levels 1 up to the configured count, at the requested point count.
    pub by_levels: Vec<TimingStats>,
}

impl BenchOutcome {
    pub fn within_budget(&self) -> bool {
        self.main.median_ms <= BUDGET_MS
    }
}

struct Job<'a> {
    bundle: &'a KeyframeBundle,
    cfg: OptimizerConfig,
    samples: Vec<f64>,
    result: Option<Result<ScaleResult>>,
}

/// Times every job `repeat` times after one untimed warm-up. Repeats are
/// interleaved across jobs so that slow phases of the machine spread evenly
/// over all configurations. Failed optimizations are timed too.
fn time_jobs(jobs: &mut [Job], s0: f64, repeat: usize) {
    for job in jobs.iter_mut() {
        job.result = Some(optimize_scale(job.bundle, s0, &job.cfg));
    }
    for _ in 0..repeat {
        for job in jobs.iter_mut() {
            let t = Instant::now();
            let r = optimize_scale(job.bundle, s0, &job.cfg);
            job.samples.push(t.elapsed().as_secs_f64() * 1e3);
            job.result = Some(r);
        }
    }
}

fn evaluations(r: &Result<ScaleResult>) -> usize {
    r.as_ref().map_or(0, ScaleResult::total_evaluations)
}

fn bundle_for(
    scene: &SyntheticScene,
    n: usize,
    levels: usize,
    cfg: &BenchConfig,
) -> Result<KeyframeBundle> {
    let points = sample_points(scene, n, cfg.inv_depth_noise, cfg.seed)?;
    scene.bundle(points, levels)
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutcome> {
    if cfg.repeat == 0 {
        return Err(Error::Config("repeat must be at least 1".into()));
    }
    if cfg.points < cfg.optimizer.min_valid_points {
        return Err(Error::Config(format!(
            "{} points is below min_valid_points = {}",
            cfg.points, cfg.optimizer.min_valid_points
        )));
    }
    cfg.optimizer.validate()?;
    let levels = cfg.optimizer.levels;
    let scene = render_scene(&cfg.scene)?;

    let bundle = bundle_for(&scene, cfg.points, levels, cfg)?;
    let by_points_bundles = cfg
        .point_counts
        .iter()
        .map(|&n| bundle_for(&scene, n, levels, cfg))
        .collect::<Result<Vec<_>>>()?;

    let job = |bundle, opt| Job {
        bundle,
        cfg: opt,
        samples: Vec::with_capacity(cfg.repeat),
        result: None,
    };
    let mut jobs = vec![job(&bundle, cfg.optimizer)];
    jobs.extend(by_points_bundles.iter().map(|b| job(b, cfg.optimizer)));
    jobs.extend((1..=levels).map(|l| {
        job(
            &bundle,
            OptimizerConfig {
                levels: l,
                ..cfg.optimizer
            },
        )
    }));
    time_jobs(&mut jobs, cfg.init_scale, cfg.repeat);

    let stats = |j: &Job| {
        let r = j.result.as_ref().expect("timed");
        TimingStats::from_samples(
            j.bundle.points().len(),
            j.cfg.levels,
            evaluations(r),
            &j.samples,
        )
    };
    let main = stats(&jobs[0]);
    let by_points = jobs[1..1 + cfg.point_counts.len()]
        .iter()
        .map(stats)
        .collect();
    let by_levels = jobs[1 + cfg.point_counts.len()..]
        .iter()
        .map(stats)
        .collect();
    let result = jobs.swap_remove(0).result.expect("timed")?;

    Ok(BenchOutcome {
        main,
        scale: result.scale,
        converged: result.converged,
        by_points,
        by_levels,
    })
}

const TABLE_HEADER: &str =
    "points  levels  passes  median_ms  mean_ms  p95_ms  per_point_us  per_point_pass_ns\n";

/// Plain-text report: the point-count table, a blank line, the level-count
/// table, then the scale and the budget line.
pub fn format_outcome(out: &BenchOutcome) -> String {
    let row = |t: &TimingStats| {
        let per_pass = t
            .per_point_eval_ns()
            .map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        format!(
            "{:>6}  {:>6}  {:>6}  {:>9.3}  {:>7.3}  {:>6.3}  {:>12.3}  {:>17}\n",
            t.points,
            t.levels,
            t.evaluations,
            t.median_ms,
            t.mean_ms,
            t.p95_ms,
            t.per_point_us(),
            per_pass
        )
    };
    let mut s = String::from(TABLE_HEADER);
    out.by_points.iter().for_each(|t| s.push_str(&row(t)));
    s.push('\n');
    s.push_str(TABLE_HEADER);
    out.by_levels.iter().for_each(|t| s.push_str(&row(t)));
    s.push_str(&format!(
        "scale {} (converged: {})\nbudget: median {:.3} ms at {} points, {} levels <= {BUDGET_MS} ms: {}\n",
        out.scale,
        out.converged,
        out.main.median_ms,
        out.main.points,
        out.main.levels,
        if out.within_budget() { "PASS" } else { "FAIL" }
    ));
    s
}
