//! Machine-readable run reports. The layout is documented in
//! `docs/report-schema.md`; bump [`SCHEMA_VERSION`] on incompatible changes.

use scale_opt::optimizer::{LevelStatus, ScaleResult};
use scale_opt::trajectory::SegmentError;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub final_energy: f64,
    pub valid_count: usize,
    pub scale: f64,
    pub status: LevelStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeSummary {
    pub keyframe: usize,
    pub scale: f64,
    pub initial_scale: f64,
    pub converged: bool,
    pub valid_fraction: f64,
    pub points: usize,
    pub time_ms: f64,
    /// Coarsest level first.
    pub levels: Vec<LevelSummary>,
}

impl KeyframeSummary {
    pub fn new(keyframe: usize, result: &ScaleResult, points: usize, time_ms: f64) -> Self {
        Self {
            keyframe,
            scale: result.scale,
            initial_scale: result.initial_scale,
            converged: result.converged,
            valid_fraction: result.valid_fraction,
            points,
            time_ms,
            levels: result
                .levels
                .iter()
                .map(|t| LevelSummary {
                    level: t.level,
                    iterations: t.iterations,
                    evaluations: t.evaluations,
                    final_energy: t.final_energy,
                    valid_count: t.valid_count,
                    scale: t.scale,
                    status: t.status,
                })
                .collect(),
        }
    }
}

/// Wall-time statistics over repeated runs at one point count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub points: usize,
    pub levels: usize,
    /// Passes over the points per run; 0 when the run failed.
    pub evaluations: usize,
    pub samples: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Nearest-rank 95th percentile.
    pub p95_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl TimingStats {
    /// Panics on an empty sample.
    pub fn from_samples(
        points: usize,
        levels: usize,
        evaluations: usize,
        samples_ms: &[f64],
    ) -> Self {
        assert!(!samples_ms.is_empty(), "timing needs at least one sample");
        let mut s = samples_ms.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Self {
            points,
            levels,
            evaluations,
            samples: n,
            mean_ms: s.iter().sum::<f64>() / n as f64,
            median_ms: median,
            p95_ms: s[rank - 1],
            min_ms: s[0],
            max_ms: s[n - 1],
        }
    }

    pub fn per_point_us(&self) -> f64 {
        1e3 * self.median_ms / self.points as f64
    }

    /// Median time per point and per pass over the points, in nanoseconds.
    /// Removes the dependence on how many iterations a run needed.
    pub fn per_point_eval_ns(&self) -> Option<f64> {
        (self.evaluations > 0)
            .then(|| 1e6 * self.median_ms / (self.points * self.evaluations) as f64)
    }
}

/// One method's row in a `compare` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    /// `scale-opt` or `block-match`.
    pub method: String,
    pub scale: Option<f64>,
    pub scale_error_pct: Option<f64>,
    pub rejected_fraction: f64,
    pub wall_time_ms: f64,
    /// Failure message when the method produced no scale.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub median_ms: f64,
    pub budget_ms: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    /// Effective configuration after flag overrides.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keyframes: Vec<KeyframeSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timing: Vec<TimingStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparison: Vec<CompareRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segment_errors: Vec<SegmentError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetCheck>,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            keyframes: Vec::new(),
            timing: Vec::new(),
            comparison: Vec::new(),
            segment_errors: Vec::new(),
            budget: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
