//! Per-alert latency accounting and CSV export.
//!
//! The headline number per alert is the max-origin difference: the time
//! from detection to the last delivery among the alert's targets.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::model::{AircraftId, Alert, AlertId, TowerId};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("alert {alert_id} delivered twice to aircraft {target}")]
    DuplicateDelivery { alert_id: AlertId, target: AircraftId },
    #[error("delivery of alert {0} recorded for an alert that was never registered")]
    UnknownAlert(AlertId),
    #[error("alert {alert_id} delivered at {delivery_time} before its detection at {detection_time}")]
    DeliveryBeforeDetection {
        alert_id: AlertId,
        detection_time: f64,
        delivery_time: f64,
    },
    #[error("bucket width must be positive, got {0}")]
    BadBucketWidth(f64),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveryRecord {
    pub alert_id: AlertId,
    pub target: AircraftId,
    pub detection_time: f64,
    pub delivery_time: f64,
    /// Transmission legs from origin to target.
    pub hops: u32,
}

impl DeliveryRecord {
    pub fn origin_diff(&self) -> f64 {
        self.delivery_time - self.detection_time
    }
}

/// What a tower did with one alert. Waits are measured from the moment the
/// target list was ready.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TowerStage {
    pub received_at: f64,
    pub list_ready_at: Option<f64>,
    pub dispatched_at: Option<f64>,
    pub interval_wait: Option<f64>,
    pub priority_wait: Option<f64>,
    pub n_targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlertSummary {
    pub alert_id: AlertId,
    pub origin: AircraftId,
    pub detection_time: f64,
    pub n_targets: usize,
    pub n_delivered: usize,
    /// `None` when nothing was delivered.
    pub max_origin_diff: Option<f64>,
    pub min_origin_diff: Option<f64>,
    pub mean_origin_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub bucket_start: f64,
    /// Alerts detected in the bucket.
    pub n_alerts: usize,
    /// Alerts in the bucket with at least one delivery.
    pub n_with_deliveries: usize,
    pub mean_max_origin_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub alerts: Vec<AlertSummary>,
    pub series: Vec<SeriesPoint>,
    pub bucket_width: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsSink {
    alerts: BTreeMap<AlertId, Alert>,
    targets: BTreeMap<AlertId, BTreeSet<AircraftId>>,
    deliveries: Vec<DeliveryRecord>,
    delivered: BTreeSet<(AlertId, AircraftId)>,
    tower_stages: BTreeMap<(AlertId, TowerId), TowerStage>,
}

impl MetricsSink {
    pub fn register_alert(&mut self, alert: &Alert) {
        self.alerts.insert(alert.alert_id, alert.clone());
        self.targets.entry(alert.alert_id).or_default();
    }

    pub fn note_targets(&mut self, alert_id: AlertId, targets: impl IntoIterator<Item = AircraftId>) {
        self.targets.entry(alert_id).or_default().extend(targets);
    }

    pub fn record_delivery(&mut self, record: DeliveryRecord) -> Result<(), MetricsError> {
        if !self.alerts.contains_key(&record.alert_id) {
            return Err(MetricsError::UnknownAlert(record.alert_id));
        }
        if record.delivery_time < record.detection_time {
            return Err(MetricsError::DeliveryBeforeDetection {
                alert_id: record.alert_id,
                detection_time: record.detection_time,
                delivery_time: record.delivery_time,
            });
        }
        if !self.delivered.insert((record.alert_id, record.target)) {
            return Err(MetricsError::DuplicateDelivery {
                alert_id: record.alert_id,
                target: record.target,
            });
        }
        self.targets.entry(record.alert_id).or_default().insert(record.target);
        self.deliveries.push(record);
        Ok(())
    }

    pub fn tower_stage_mut(&mut self, alert_id: AlertId, tower: TowerId) -> &mut TowerStage {
        self.tower_stages.entry((alert_id, tower)).or_default()
    }

    pub fn tower_stages(&self) -> &BTreeMap<(AlertId, TowerId), TowerStage> {
        &self.tower_stages
    }

    pub fn alerts(&self) -> impl Iterator<Item = &Alert> {
        self.alerts.values()
    }

    pub fn alert(&self, id: AlertId) -> Option<&Alert> {
        self.alerts.get(&id)
    }

    pub fn deliveries(&self) -> &[DeliveryRecord] {
        &self.deliveries
    }

    pub fn targets(&self, id: AlertId) -> Option<&BTreeSet<AircraftId>> {
        self.targets.get(&id)
    }

    pub fn summarize(&self, bucket_width: f64) -> Result<Summary, MetricsError> {
        if !(bucket_width > 0.0 && bucket_width.is_finite()) {
            return Err(MetricsError::BadBucketWidth(bucket_width));
        }
        let mut diffs: BTreeMap<AlertId, Vec<f64>> = BTreeMap::new();
        for d in &self.deliveries {
            diffs.entry(d.alert_id).or_default().push(d.origin_diff());
        }

        let alerts: Vec<AlertSummary> = self
            .alerts
            .values()
            .map(|a| {
                let ds = diffs.get(&a.alert_id).map(Vec::as_slice).unwrap_or(&[]);
                let (max, min, mean) = if ds.is_empty() {
                    (None, None, None)
                } else {
                    let max = ds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let min = ds.iter().copied().fold(f64::INFINITY, f64::min);
                    // clamp guards the invariant against summation rounding
                    let mean = (ds.iter().sum::<f64>() / ds.len() as f64).clamp(min, max);
                    (Some(max), Some(min), Some(mean))
                };
                AlertSummary {
                    alert_id: a.alert_id,
                    origin: a.origin,
                    detection_time: a.detected_at,
                    n_targets: self.targets.get(&a.alert_id).map_or(0, BTreeSet::len),
                    n_delivered: ds.len(),
                    max_origin_diff: max,
                    min_origin_diff: min,
                    mean_origin_diff: mean,
                }
            })
            .collect();

        let series = bucket_series(&alerts, bucket_width);
        Ok(Summary {
            alerts,
            series,
            bucket_width,
        })
    }

    /// Write `deliveries.csv`, `summaries.csv`, `series.csv` and
    /// `run_meta.json` into `dir`.
    pub fn export(
        &self,
        summary: &Summary,
        dir: &Path,
        meta: &serde_json::Value,
    ) -> Result<Vec<PathBuf>, MetricsError> {
        fs::create_dir_all(dir).map_err(|source| MetricsError::Io {
            path: dir.to_path_buf(),
            source,
        })?;

        let deliveries = dir.join("deliveries.csv");
        write_csv(
            &deliveries,
            &[
                "alert_id",
                "origin",
                "target",
                "detection_time",
                "delivery_time",
                "origin_diff",
                "hops",
            ],
            self.deliveries.iter().map(|d| {
                let origin = self.alerts[&d.alert_id].origin;
                vec![
                    d.alert_id.to_string(),
                    origin.to_string(),
                    d.target.to_string(),
                    fmt_seconds(d.detection_time),
                    fmt_seconds(d.delivery_time),
                    fmt_seconds(d.origin_diff()),
                    d.hops.to_string(),
                ]
            }),
        )?;

        let summaries = dir.join("summaries.csv");
        write_csv(
            &summaries,
            &[
                "alert_id",
                "origin",
                "detection_time",
                "n_targets",
                "n_delivered",
                "max_origin_diff",
                "min_origin_diff",
                "mean_origin_diff",
            ],
            summary.alerts.iter().map(|a| {
                vec![
                    a.alert_id.to_string(),
                    a.origin.to_string(),
                    fmt_seconds(a.detection_time),
                    a.n_targets.to_string(),
                    a.n_delivered.to_string(),
                    fmt_opt(a.max_origin_diff),
                    fmt_opt(a.min_origin_diff),
                    fmt_opt(a.mean_origin_diff),
                ]
            }),
        )?;

        let series = dir.join("series.csv");
        write_csv(
            &series,
            &["bucket_start", "n_alerts", "n_with_deliveries", "mean_max_origin_diff"],
            summary.series.iter().map(|p| {
                vec![
                    fmt_seconds(p.bucket_start),
                    p.n_alerts.to_string(),
                    p.n_with_deliveries.to_string(),
                    fmt_opt(p.mean_max_origin_diff),
                ]
            }),
        )?;

        let meta_path = dir.join("run_meta.json");
        let mut text = serde_json::to_string_pretty(meta).map_err(|source| MetricsError::Json {
            path: meta_path.clone(),
            source,
        })?;
        text.push('\n');
        fs::write(&meta_path, text).map_err(|source| MetricsError::Io {
            path: meta_path.clone(),
            source,
        })?;

        Ok(vec![deliveries, summaries, series, meta_path])
    }
}

/// Mean max-origin difference per detection-time bucket, from bucket 0 up
/// to the last bucket holding an alert.
pub fn bucket_series(alerts: &[AlertSummary], bucket_width: f64) -> Vec<SeriesPoint> {
    let mut buckets: BTreeMap<u64, (usize, Vec<f64>)> = BTreeMap::new();
    for a in alerts {
        let b = (a.detection_time / bucket_width).floor() as u64;
        let e = buckets.entry(b).or_default();
        e.0 += 1;
        if let Some(m) = a.max_origin_diff {
            e.1.push(m);
        }
    }
    let Some(&last) = buckets.keys().next_back() else {
        return Vec::new();
    };
    (0..=last)
        .map(|b| {
            let (n, mut maxes) = buckets.remove(&b).unwrap_or_default();
            // order-independent sum
            maxes.sort_by(f64::total_cmp);
            let mean = (!maxes.is_empty()).then(|| maxes.iter().sum::<f64>() / maxes.len() as f64);
            SeriesPoint {
                bucket_start: b as f64 * bucket_width,
                n_alerts: n,
                n_with_deliveries: maxes.len(),
                mean_max_origin_diff: mean,
            }
        })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), MetricsError> {
    let wrap = |source| MetricsError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Decimal seconds with at least nine significant digits and no loss of
/// precision.
pub fn fmt_seconds(v: f64) -> String {
    let shortest = format!("{v}");
    let digits = shortest
        .trim_start_matches('-')
        .chars()
        .filter(char::is_ascii_digit)
        .collect::<String>();
    let significant = digits.trim_start_matches('0').len();
    if significant >= 9 {
        return shortest;
    }
    let magnitude = if v == 0.0 { 0 } else { v.abs().log10().floor() as i32 };
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_seconds).unwrap_or_default()
}
