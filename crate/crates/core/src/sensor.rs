//! Onboard turbulence detection: sample, compare against a running average,
//! raise an alert when the deviation reaches the threshold, then fold the
//! sample into the average.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{in_region, Aircraft, Alert, AlertId, CatRegion};

/// How `SensorState::average` tracks past readings.
#[derive(Debug, Clone, PartialEq)]
pub enum Averaging {
    Ema,
    /// Plain mean of the last `len` readings.
    Window {
        len: usize,
        history: VecDeque<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorState {
    pub current: f64,
    pub average: f64,
    pub threshold: f64,
    pub ema_alpha: f64,
    pub baseline: f64,
    pub averaging: Averaging,
}

/// Sensor parameters as they appear in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    pub baseline: f64,
    pub threshold: f64,
    pub ema_alpha: f64,
    /// Use a windowed mean of this many ticks instead of the EMA.
    pub window: Option<usize>,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            baseline: 0.0,
            threshold: 4.0,
            ema_alpha: 0.125,
            window: None,
        }
    }
}

impl SensorState {
    /// Fresh sensor whose average starts at the ambient baseline.
    pub fn new(params: &SensorParams) -> Self {
        let averaging = match params.window {
            Some(len) => Averaging::Window {
                len: len.max(1),
                history: VecDeque::new(),
            },
            None => Averaging::Ema,
        };
        Self {
            current: params.baseline,
            average: params.baseline,
            threshold: params.threshold,
            ema_alpha: params.ema_alpha,
            baseline: params.baseline,
            averaging,
        }
    }

    pub fn deviation(&self) -> f64 {
        (self.current - self.average).abs()
    }

    pub fn update_average(&mut self) {
        match &mut self.averaging {
            Averaging::Ema => {
                self.average = (1.0 - self.ema_alpha) * self.average + self.ema_alpha * self.current;
            }
            Averaging::Window { len, history } => {
                history.push_back(self.current);
                while history.len() > *len {
                    history.pop_front();
                }
                self.average = history.iter().sum::<f64>() / history.len() as f64;
            }
        }
    }
}

impl Default for SensorState {
    fn default() -> Self {
        Self::new(&SensorParams::default())
    }
}

/// Hands out run-unique alert ids in detection order.
#[derive(Debug, Default)]
pub struct AlertIdGen(u64);

impl AlertIdGen {
    pub fn next_id(&mut self) -> AlertId {
        let id = AlertId(self.0);
        self.0 += 1;
        id
    }

    pub fn issued(&self) -> u64 {
        self.0
    }
}

/// Reading at the aircraft's current position: baseline plus the intensity
/// of every region containing it.
pub fn sample_sensor<'a>(ac: &Aircraft, regions: impl IntoIterator<Item = &'a CatRegion>) -> f64 {
    ac.sensor.baseline
        + regions
            .into_iter()
            .filter(|r| in_region(ac.pos, r))
            .map(|r| r.intensity)
            .sum::<f64>()
}

/// Threshold test on the already-sampled `s.current`. Inclusive at the
/// boundary. Does not touch the average.
pub fn detect_cat(s: &SensorState, ac: &Aircraft, clock: f64, ids: &mut AlertIdGen) -> Option<Alert> {
    (s.deviation() >= s.threshold).then(|| Alert {
        alert_id: ids.next_id(),
        origin: ac.id,
        location: ac.pos,
        detected_at: clock,
    })
}

/// One full detection step for `ac`: sample, test, update the average.
pub fn sensor_tick<'a>(
    ac: &mut Aircraft,
    regions: impl IntoIterator<Item = &'a CatRegion>,
    clock: f64,
    ids: &mut AlertIdGen,
) -> Option<Alert> {
    ac.sensor.current = sample_sensor(ac, regions);
    let alert = detect_cat(&ac.sensor, ac, clock, ids);
    ac.sensor.update_average();
    alert
}
