//! Parallel strategy x seed sweeps and the comparison report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{run_scenario, RunError, ScenarioConfig};
use crate::metrics::{fmt_seconds, AlertSummary, MetricsError};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("no configs to run")]
    NoConfigs,
    #[error("no seeds given")]
    NoSeeds,
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One finished (or failed) cell of the sweep.
#[derive(Debug)]
pub struct CellResult {
    pub label: String,
    pub strategy: &'static str,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub result: Result<Vec<AlertSummary>, RunError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub rank: usize,
    pub label: String,
    pub strategy: String,
    pub runs: usize,
    pub alerts: usize,
    pub mean_max_origin_diff: Option<f64>,
    pub p95_max_origin_diff: Option<f64>,
}

#[derive(Debug)]
pub struct MatrixOutcome {
    pub cells: Vec<CellResult>,
    pub report: Vec<ReportRow>,
    pub report_path: PathBuf,
}

impl MatrixOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.result.is_err())
    }
}

/// Labels for `configs`, made unique by suffixing repeats with `-2`, `-3`...
pub fn unique_labels(configs: &[ScenarioConfig]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    configs
        .iter()
        .map(|c| {
            let base = c.label();
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}-{n}")
            }
        })
        .collect()
}

/// Run every config under every seed on `workers` threads. Each cell writes to
/// `out/<label>/seed-<seed>/`; the report goes to `out/report.csv`. A failing
/// cell is recorded and the rest still run.
pub fn run_matrix(
    configs: &[ScenarioConfig],
    seeds: &[u64],
    out: &Path,
    workers: usize,
) -> Result<MatrixOutcome, MatrixError> {
    if configs.is_empty() {
        return Err(MatrixError::NoConfigs);
    }
    if seeds.is_empty() {
        return Err(MatrixError::NoSeeds);
    }
    let labels = unique_labels(configs);
    let jobs: Vec<(String, ScenarioConfig, u64)> = configs
        .iter()
        .zip(&labels)
        .flat_map(|(cfg, label)| {
            seeds.iter().map(move |&seed| {
                let mut c = cfg.clone();
                c.world.seed = seed;
                (label.clone(), c, seed)
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MatrixError::Pool(e.to_string()))?;
    let cells: Vec<CellResult> = pool.install(|| {
        jobs.into_par_iter()
            .map(|(label, cfg, seed)| {
                let out_dir = out.join(&label).join(format!("seed-{seed}"));
                let result = run_scenario(&cfg, Some(&out_dir)).map(|o| o.summary.alerts);
                CellResult {
                    label,
                    strategy: cfg.strategy.label(),
                    seed,
                    out_dir,
                    result,
                }
            })
            .collect()
    });

    let ok: Vec<(&str, &str, &[AlertSummary])> = cells
        .iter()
        .filter_map(|c| {
            c.result
                .as_ref()
                .ok()
                .map(|a| (c.label.as_str(), c.strategy, a.as_slice()))
        })
        .collect();
    let report = build_report(&ok);
    let report_path = out.join("report.csv");
    write_report(&report, &report_path)?;
    Ok(MatrixOutcome {
        cells,
        report,
        report_path,
    })
}

/// Pool the per-alert worst-case latency of each label across its runs and
/// rank labels by the mean, lowest first. Labels with no deliveries rank last.
pub fn build_report(runs: &[(&str, &str, &[AlertSummary])]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<&str, (&str, usize, usize, Vec<f64>)> = BTreeMap::new();
    for &(label, strategy, alerts) in runs {
        let g = groups.entry(label).or_insert((strategy, 0, 0, Vec::new()));
        g.1 += 1;
        g.2 += alerts.len();
        g.3.extend(alerts.iter().filter_map(|a| a.max_origin_diff));
    }
    let mut rows: Vec<ReportRow> = groups
        .into_iter()
        .map(|(label, (strategy, runs, alerts, mut maxes))| {
            maxes.sort_by(f64::total_cmp);
            let mean = (!maxes.is_empty()).then(|| maxes.iter().sum::<f64>() / maxes.len() as f64);
            ReportRow {
                rank: 0,
                label: label.to_string(),
                strategy: strategy.to_string(),
                runs,
                alerts,
                mean_max_origin_diff: mean,
                p95_max_origin_diff: percentile_nearest_rank(&maxes, 0.95),
            }
        })
        .collect();
    rows.sort_by(|a, b| match (a.mean_max_origin_diff, b.mean_max_origin_diff) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.label.cmp(&b.label)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.label.cmp(&b.label),
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    rows
}

/// Nearest-rank percentile of sorted data.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

pub fn write_report(rows: &[ReportRow], path: &Path) -> Result<(), MetricsError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| MetricsError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let csv_err = |source| MetricsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "rank",
        "label",
        "strategy",
        "runs",
        "alerts",
        "mean_max_origin_diff",
        "p95_max_origin_diff",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(fmt_seconds).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.rank.to_string(),
            r.label.clone(),
            r.strategy.clone(),
            r.runs.to_string(),
            r.alerts.to_string(),
            opt(r.mean_max_origin_diff),
            opt(r.p95_max_origin_diff),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}
