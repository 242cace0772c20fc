//! Fleet initialization, straight-line motion and tower association.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{distance, Aircraft, AircraftId, AtcTower, TowerId, Vec3};
use crate::sensor::{SensorParams, SensorState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("fleet_size must be at least 2, got {0}")]
    FleetTooSmall(usize),
    #[error("{field} must be positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("altitude_band must satisfy 0 <= min <= max, got ({0}, {1})")]
    BadAltitudeBand(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Side of the square start area in meters.
    pub area_side: f64,
    pub fleet_size: usize,
    pub aircraft_speed: f64,
    pub altitude_band: (f64, f64),
    pub tick: f64,
    pub seed: u64,
    pub duration: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            area_side: 1e5,
            fleet_size: 20,
            aircraft_speed: 250.0,
            altitude_band: (9_000.0, 12_000.0),
            tick: 1.0,
            seed: 1,
            duration: 1_000.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.fleet_size < 2 {
            return Err(KinematicsError::FleetTooSmall(self.fleet_size));
        }
        for (field, value) in [
            ("area_side", self.area_side),
            ("tick", self.tick),
            ("duration", self.duration),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(KinematicsError::NonPositive { field, value });
            }
        }
        if !(self.aircraft_speed >= 0.0 && self.aircraft_speed.is_finite()) {
            return Err(KinematicsError::NonPositive {
                field: "aircraft_speed",
                value: self.aircraft_speed,
            });
        }
        let (lo, hi) = self.altitude_band;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(KinematicsError::BadAltitudeBand(lo, hi));
        }
        Ok(())
    }
}

/// Places `fleet_size` aircraft uniformly in the start square with uniform
/// altitudes and headings. Draw order: all horizontal positions, then all
/// altitudes, then all headings, each in aircraft-id order.
pub fn initialize_fleet<R: Rng + ?Sized>(
    cfg: &WorldConfig,
    sensor: &SensorParams,
    rng: &mut R,
) -> Result<Vec<Aircraft>, KinematicsError> {
    cfg.validate()?;
    let n = cfg.fleet_size;
    let xy: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.0..=cfg.area_side),
                rng.random_range(0.0..=cfg.area_side),
            )
        })
        .collect();
    let (lo, hi) = cfg.altitude_band;
    let alt: Vec<f64> = (0..n)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
        .collect();
    let heading: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();

    Ok((0..n)
        .map(|i| {
            let pos = Vec3::new(xy[i].0, xy[i].1, alt[i]);
            let vel = Vec3::new(
                cfg.aircraft_speed * heading[i].sin(),
                cfg.aircraft_speed * heading[i].cos(),
                0.0,
            );
            Aircraft::new(AircraftId(i as u32), pos, vel, SensorState::new(sensor))
        })
        .collect())
}

/// Advance every aircraft by `dt` seconds along its straight line.
pub fn update_positions(fleet: &mut [Aircraft], dt: f64) {
    for ac in fleet {
        let t = ac.elapsed + dt;
        set_time(ac, t);
    }
}

/// Move the whole fleet to absolute time `t`.
pub fn advance_to(fleet: &mut [Aircraft], t: f64) {
    for ac in fleet {
        set_time(ac, t);
    }
}

fn set_time(ac: &mut Aircraft, t: f64) {
    ac.elapsed = t;
    ac.pos = ac.position_at(t);
}

/// Closest tower whose coverage contains the aircraft; lower id wins ties.
pub fn nearest_tower(ac: &Aircraft, towers: &[AtcTower]) -> Option<TowerId> {
    towers
        .iter()
        .filter_map(|t| {
            let d = distance(ac.pos, t.pos);
            (d <= t.coverage_radius).then_some((d, t.id))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Handoff {
    pub aircraft: AircraftId,
    pub from: Option<TowerId>,
    pub to: Option<TowerId>,
}

/// Re-associate every aircraft with its nearest covering tower.
pub fn process_handoffs(fleet: &mut [Aircraft], towers: &[AtcTower]) -> Vec<Handoff> {
    let mut out = Vec::new();
    for ac in fleet {
        let to = nearest_tower(ac, towers);
        if to != ac.connected_tower {
            out.push(Handoff {
                aircraft: ac.id,
                from: ac.connected_tower,
                to,
            });
            ac.connected_tower = to;
        }
    }
    out
}
