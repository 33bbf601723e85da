//! Monte Carlo sweeps over target count, interceptor count and prediction
//! method, with aggregated reports.
//!
//! Run `r` of every cell with `m` targets is seeded from `(base_seed, m, r)`.
//! Target maneuvers therefore repeat exactly across methods and interceptor
//! counts, which makes any two cells with the same `m` a paired comparison.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EngagementConfig, PredictionMethod};
use crate::engagement::{run_engagement, RunResult};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::stats::{paired_sign_test, wilson_ci, PairedComparison, Z_95};

pub const CSV_HEADER: [&str; 10] = [
    "m",
    "n",
    "method",
    "runs",
    "hits",
    "possible",
    "fraction",
    "ci_lo",
    "ci_hi",
    "mean_hit_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub m_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub methods: Vec<PredictionMethod>,
    pub n_mc: usize,
    pub base_seed: u64,
    pub base_config: EngagementConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_mc < 1 {
            return Err(Error::InvalidConfig("n_mc must be >= 1".into()));
        }
        if self.m_values.is_empty() || self.n_values.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        Ok(())
    }

    /// Seed for run `run` of every cell with `m` targets.
    pub fn run_seed(&self, m: usize, run: usize) -> u64 {
        derive_seed(self.base_seed, &[m as u64, run as u64])
    }

    /// Cells in report order: `m`, then `n`, then method.
    pub fn cells(&self) -> Vec<(usize, usize, PredictionMethod)> {
        let mut out = Vec::new();
        for &m in &self.m_values {
            for &n in &self.n_values {
                for &method in &self.methods {
                    out.push((m, n, method));
                }
            }
        }
        out
    }

    pub fn cell_config(&self, m: usize, n: usize, method: PredictionMethod) -> EngagementConfig {
        EngagementConfig {
            m_targets: m,
            n_interceptors: n,
            prediction_method: method,
            ..self.base_config.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub m: usize,
    pub n: usize,
    pub method: PredictionMethod,
    pub runs: usize,
    pub hits: u64,
    pub possible: u64,
    pub fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_hit_time_s: Option<f64>,
    /// Mean closest approach of interceptors that did not score.
    pub mean_miss_closest_approach_m: Option<f64>,
    /// Hits of each run, in run order.
    pub per_run_hits: Vec<u32>,
    pub max_command_norm: f64,
    pub max_speed_drift: f64,
    /// Set when a run failed; the cell's statistics are then empty.
    pub error: Option<String>,
}

impl CellResult {
    fn failed(m: usize, n: usize, method: PredictionMethod, message: String) -> Self {
        Self {
            m,
            n,
            method,
            runs: 0,
            hits: 0,
            possible: 0,
            fraction: 0.0,
            ci_lo: 0.0,
            ci_hi: 0.0,
            mean_hit_time_s: None,
            mean_miss_closest_approach_m: None,
            per_run_hits: Vec::new(),
            max_command_norm: 0.0,
            max_speed_drift: 0.0,
            error: Some(message),
        }
    }

    fn from_runs(m: usize, n: usize, method: PredictionMethod, runs: &[RunResult]) -> Result<Self> {
        let hits: u64 = runs.iter().map(|r| r.hits as u64).sum();
        let possible = (m * runs.len()) as u64;
        let (fraction, ci_lo, ci_hi) = if possible > 0 {
            let (lo, hi) = wilson_ci(hits, possible, Z_95)?;
            (hits as f64 / possible as f64, lo, hi)
        } else {
            (0.0, 0.0, 0.0)
        };
        let hit_times: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.hit_records.iter().map(|h| h.time_s))
            .collect();
        let miss_closest: Vec<f64> = runs
            .iter()
            .flat_map(|r| {
                r.closest_approach_m
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !r.hit_records.iter().any(|h| h.interceptor == *i))
                    .filter_map(|(_, c)| *c)
            })
            .collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Ok(Self {
            m,
            n,
            method,
            runs: runs.len(),
            hits,
            possible,
            fraction,
            ci_lo,
            ci_hi,
            mean_hit_time_s: mean(&hit_times),
            mean_miss_closest_approach_m: mean(&miss_closest),
            per_run_hits: runs.iter().map(|r| r.hits as u32).collect(),
            max_command_norm: runs.iter().map(|r| r.max_command_norm).fold(0.0, f64::max),
            max_speed_drift: runs.iter().map(|r| r.max_speed_drift).fold(0.0, f64::max),
            error: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub base_seed: u64,
    pub n_mc: usize,
    pub base_config: EngagementConfig,
    pub cells: Vec<CellResult>,
}

impl AggregateResult {
    pub fn cell(&self, m: usize, n: usize, method: PredictionMethod) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.m == m && c.n == n && c.method == method)
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

/// Paired comparison of two cells with equal `m` and run count.
pub fn compare_cells(a: &CellResult, b: &CellResult) -> Result<PairedComparison> {
    if a.m != b.m || a.per_run_hits.len() != b.per_run_hits.len() {
        return Err(Error::InvalidConfig(
            "paired comparison needs equal target counts and run counts".into(),
        ));
    }
    Ok(paired_sign_test(&a.per_run_hits, &b.per_run_hits))
}

/// Runs every cell of `spec` on a pool of `parallelism` threads.
///
/// Results do not depend on `parallelism`: every run draws from its own
/// seed-derived streams and results are reduced in (cell, run) order.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize) -> Result<AggregateResult> {
    run_sweep_with(spec, parallelism, |_, _| {})
}

/// As [`run_sweep`], calling `inspect(cell index, run)` on every finished run.
pub fn run_sweep_with<F>(spec: &SweepSpec, parallelism: usize, inspect: F) -> Result<AggregateResult>
where
    F: Fn(usize, &RunResult) + Sync,
{
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.n_mc).map(move |r| (c, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;

    let outcomes: Vec<Result<RunResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| {
                let (m, n, method) = cells[c];
                let result = run_engagement(&spec.cell_config(m, n, method), spec.run_seed(m, r))?;
                inspect(c, &result);
                Ok(result)
            })
            .collect()
    });

    let mut outcomes = outcomes.into_iter();
    let mut results = Vec::with_capacity(cells.len());
    for &(m, n, method) in &cells {
        let runs: Vec<Result<RunResult>> = outcomes.by_ref().take(spec.n_mc).collect();
        let cell = match runs.into_iter().collect::<Result<Vec<_>>>() {
            Ok(runs) => CellResult::from_runs(m, n, method, &runs)?,
            Err(e) => CellResult::failed(m, n, method, e.to_string()),
        };
        results.push(cell);
    }

    Ok(AggregateResult {
        base_seed: spec.base_seed,
        n_mc: spec.n_mc,
        base_config: spec.base_config.clone(),
        cells: results,
    })
}

pub fn write_csv<W: Write>(agg: &AggregateResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for c in &agg.cells {
        let row = if c.error.is_some() {
            vec![
                c.m.to_string(),
                c.n.to_string(),
                c.method.to_string(),
                c.runs.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]
        } else {
            vec![
                c.m.to_string(),
                c.n.to_string(),
                c.method.to_string(),
                c.runs.to_string(),
                c.hits.to_string(),
                c.possible.to_string(),
                format!("{:.6}", c.fraction),
                format!("{:.6}", c.ci_lo),
                format!("{:.6}", c.ci_hi),
                c.mean_hit_time_s.map(|t| format!("{t:.3}")).unwrap_or_default(),
            ]
        };
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_json(agg: &AggregateResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(agg)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(s: &str) -> Result<AggregateResult> {
    Ok(serde_json::from_str(s)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the CSV summary and/or the full JSON document.
pub fn emit_reports(agg: &AggregateResult, csv_path: Option<&Path>, json_path: Option<&Path>) -> Result<()> {
    if let Some(path) = csv_path {
        let mut buf = Vec::new();
        write_csv(agg, &mut buf)?;
        write_file(path, &buf)?;
    }
    if let Some(path) = json_path {
        write_file(path, to_json(agg)?.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            m_values: vec![1],
            n_values: vec![1],
            methods: vec![PredictionMethod::StraightLine],
            n_mc: 2,
            base_seed: 5,
            base_config: EngagementConfig::default(),
        }
    }

    #[test]
    fn seeds_ignore_n_and_method() {
        let spec = tiny_spec();
        assert_eq!(spec.run_seed(2, 7), spec.run_seed(2, 7));
        assert_ne!(spec.run_seed(2, 7), spec.run_seed(2, 8));
        assert_ne!(spec.run_seed(2, 7), spec.run_seed(3, 7));
    }

    #[test]
    fn empty_sweep_rejected() {
        let mut spec = tiny_spec();
        spec.n_mc = 0;
        assert!(run_sweep(&spec, 1).is_err());
        let mut spec = tiny_spec();
        spec.methods.clear();
        assert!(run_sweep(&spec, 1).is_err());
    }

    #[test]
    fn failing_cell_is_isolated() {
        let mut spec = tiny_spec();
        spec.base_config.n_t = 1;
        let agg = run_sweep(&spec, 1).unwrap();
        assert_eq!(agg.failed_cells().count(), 1);
        let mut buf = Vec::new();
        write_csv(&agg, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let agg = AggregateResult {
            base_seed: 0,
            n_mc: 1,
            base_config: EngagementConfig::default(),
            cells: vec![],
        };
        let path = Path::new("/nonexistent-dir/out.csv");
        let err = emit_reports(&agg, Some(path), None).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }
}
