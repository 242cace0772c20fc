//! Geometry, world entities and the unit conventions shared by every module.
//!
//! Coordinates are flat local-plane meters: `x` east, `y` north, `z` altitude.
//! Time is `f64` seconds on the simulation clock.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensor::SensorState;

/// Radio propagation speed in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

/// 1000 ft.
pub const VERTICAL_SEPARATION_M: f64 = 304.8;
/// 50 statute miles.
pub const LATERAL_SEPARATION_M: f64 = 80467.2;
/// Ten minutes of travel.
pub const ALONG_TRACK_SEPARATION_S: f64 = 600.0;
/// Two aircraft share a path when their headings differ by less than this.
pub const SAME_PATH_HEADING_DEG: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("signal speed must be positive and finite, got {0}")]
    NonPositiveSpeed(f64),
}

/// A point or displacement in local-plane meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub type Position3 = Vec3;
/// Meters per second along each axis.
pub type Velocity3 = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident($inner:ty)) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(
    /// Index of an aircraft in the fleet.
    AircraftId(u32)
);
id_type!(
    /// Index of a tower in the tower list.
    TowerId(u32)
);
id_type!(
    /// Run-unique alert identifier, assigned in detection order.
    AlertId(u64)
);

/// State of a point-to-point link.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ChannelState {
    #[default]
    Closed,
    /// Link setup completes at the carried simulation time.
    Establishing(f64),
    Open,
}

impl ChannelState {
    /// Time at which a message handed to this channel at `now` can depart,
    /// or `None` when the channel is closed.
    pub fn ready_at(self, now: f64) -> Option<f64> {
        match self {
            ChannelState::Closed => None,
            ChannelState::Establishing(done) => Some(done.max(now)),
            ChannelState::Open => Some(now),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: AlertId,
    pub origin: AircraftId,
    pub location: Position3,
    pub detected_at: f64,
}

#[derive(Debug, Clone)]
pub struct Aircraft {
    pub id: AircraftId,
    pub pos: Position3,
    pub vel: Velocity3,
    /// Position at simulation time zero; `pos` is always derived from it.
    pub origin: Position3,
    /// Time `pos` currently corresponds to.
    pub elapsed: f64,
    pub sensor: SensorState,
    pub received: BTreeSet<AlertId>,
    pub channels: BTreeMap<AircraftId, ChannelState>,
    pub connected_tower: Option<TowerId>,
    pub stored_alerts: Vec<Alert>,
}

impl Aircraft {
    pub fn new(id: AircraftId, pos: Position3, vel: Velocity3, sensor: SensorState) -> Self {
        Self {
            id,
            pos,
            vel,
            origin: pos,
            elapsed: 0.0,
            sensor,
            received: BTreeSet::new(),
            channels: BTreeMap::new(),
            connected_tower: None,
            stored_alerts: Vec::new(),
        }
    }

    /// Straight-line position at absolute time `t`.
    pub fn position_at(&self, t: f64) -> Position3 {
        self.origin + self.vel * t
    }

    pub fn channel(&self, peer: AircraftId) -> ChannelState {
        self.channels.get(&peer).copied().unwrap_or_default()
    }

    pub fn speed(&self) -> f64 {
        self.vel.horizontal_norm()
    }

    /// Heading in radians, clockwise from north; `None` when not moving.
    pub fn heading(&self) -> Option<f64> {
        if self.vel.horizontal_norm() == 0.0 {
            return None;
        }
        Some(self.vel.x.atan2(self.vel.y).rem_euclid(std::f64::consts::TAU))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TowerMode {
    AlwaysOpen,
    Interval,
    PriorityQueue,
}

/// An entry waiting in a tower's priority queue.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuedMessage {
    /// Lower is served first.
    pub priority: u8,
    /// Arrival sequence, the tie-break for equal priority.
    pub seq: u64,
    pub enqueued_at: f64,
    pub payload: QueuedPayload,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueuedPayload {
    Alert {
        alert_id: AlertId,
        targets: Vec<AircraftId>,
        hops: u32,
    },
    Background,
}

/// Pending tower messages ordered by `(priority, seq)`.
#[derive(Debug, Clone, Default)]
pub struct MessageQueue {
    items: BTreeMap<(u8, u64), QueuedMessage>,
    next_seq: u64,
}

impl MessageQueue {
    pub fn push(&mut self, priority: u8, enqueued_at: f64, payload: QueuedPayload) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.items.insert(
            (priority, seq),
            QueuedMessage {
                priority,
                seq,
                enqueued_at,
                payload,
            },
        );
    }

    pub fn pop(&mut self) -> Option<QueuedMessage> {
        self.items.pop_first().map(|(_, m)| m)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct AtcTower {
    pub id: TowerId,
    pub pos: Position3,
    pub coverage_radius: f64,
    pub mode: TowerMode,
    pub queue: MessageQueue,
    pub links: BTreeSet<TowerId>,
    pub list_creation_time: f64,
    pub service_time: f64,
    pub broadcast_period: f64,
    /// Aircraft-to-tower channels, keyed by aircraft.
    pub aircraft_channels: BTreeMap<AircraftId, ChannelState>,
}

impl AtcTower {
    pub fn new(id: TowerId, pos: Position3, coverage_radius: f64) -> Self {
        Self {
            id,
            pos,
            coverage_radius,
            mode: TowerMode::AlwaysOpen,
            queue: MessageQueue::default(),
            links: BTreeSet::new(),
            list_creation_time: 0.0,
            service_time: 0.0,
            broadcast_period: 0.0,
            aircraft_channels: BTreeMap::new(),
        }
    }

    pub fn covers(&self, p: Position3) -> bool {
        distance(self.pos, p) <= self.coverage_radius
    }

    pub fn channel(&self, ac: AircraftId) -> ChannelState {
        self.aircraft_channels.get(&ac).copied().unwrap_or_default()
    }
}

/// Spherical volume of clear-air turbulence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatRegion {
    pub center: Position3,
    pub radius: f64,
    /// Additive sensor perturbation inside the region.
    pub intensity: f64,
}

/// A region together with the window during which it perturbs sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveRegion {
    pub region: CatRegion,
    pub from: f64,
    pub until: Option<f64>,
}

impl ActiveRegion {
    pub fn permanent(region: CatRegion) -> Self {
        Self {
            region,
            from: 0.0,
            until: None,
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.from && self.until.is_none_or(|u| t < u)
    }
}

pub fn distance(a: Position3, b: Position3) -> f64 {
    (a - b).norm()
}

pub fn propagation_delay(a: Position3, b: Position3, signal_speed: f64) -> Result<f64, GeometryError> {
    check_speed(signal_speed)?;
    Ok(distance(a, b) / signal_speed)
}

fn check_speed(signal_speed: f64) -> Result<(), GeometryError> {
    if signal_speed > 0.0 && signal_speed.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonPositiveSpeed(signal_speed))
    }
}

/// Time for a signal emitted at `from` to reach a target that sits at
/// `target` at emission time and keeps moving at `target_vel`.
///
/// Solves `|target + v·τ − from| = c·τ` for the non-negative root. With a
/// stationary target this is exactly `distance / c`.
pub fn intercept_delay(
    from: Position3,
    target: Position3,
    target_vel: Velocity3,
    signal_speed: f64,
) -> Result<f64, GeometryError> {
    check_speed(signal_speed)?;
    let d = target - from;
    if target_vel == Vec3::ZERO {
        return Ok(d.norm() / signal_speed);
    }
    let a = target_vel.norm_sq() - signal_speed * signal_speed;
    let b = 2.0 * d.dot(target_vel);
    let c = d.norm_sq();
    if c == 0.0 {
        return Ok(0.0);
    }
    // a < 0 for any sub-luminal target, so the discriminant is >= b^2.
    let disc = (b * b - 4.0 * a * c).sqrt();
    Ok(2.0 * c / (disc - b))
}

pub fn in_region(p: Position3, r: &CatRegion) -> bool {
    distance(p, r.center) <= r.radius
}

/// Whether the forward ray from `p` along `vel` passes within `radius` of
/// `center` (a stationary point counts only if already inside).
pub fn path_intersects_sphere(p: Position3, vel: Velocity3, center: Position3, radius: f64) -> bool {
    let to_center = center - p;
    if to_center.norm_sq() <= radius * radius {
        return true;
    }
    let speed_sq = vel.norm_sq();
    if speed_sq == 0.0 {
        return false;
    }
    let t = to_center.dot(vel) / speed_sq;
    if t <= 0.0 {
        return false;
    }
    distance(p + vel * t, center) <= radius
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationViolation {
    /// Lower id of the pair.
    pub a: AircraftId,
    pub b: AircraftId,
    pub vertical_gap: f64,
    pub lateral_gap: f64,
    /// Along-track gap for path-sharing pairs, `None` otherwise.
    pub along_track_gap: Option<f64>,
}

/// Report every aircraft pair that satisfies none of the vertical, lateral
/// or (for path-sharing pairs) along-track separation minima.
pub fn check_separation(fleet: &[Aircraft]) -> Vec<SeparationViolation> {
    let mut out = Vec::new();
    for (i, p) in fleet.iter().enumerate() {
        for q in &fleet[i + 1..] {
            let (a, b) = if p.id <= q.id { (p, q) } else { (q, p) };
            let d = b.pos - a.pos;
            let vertical_gap = d.z.abs();
            let lateral_gap = d.horizontal_norm();
            if vertical_gap >= VERTICAL_SEPARATION_M || lateral_gap >= LATERAL_SEPARATION_M {
                continue;
            }
            let along_track_gap = shared_path_axis(a, b).map(|axis| (d.x * axis.0 + d.y * axis.1).abs());
            if let Some(gap) = along_track_gap {
                let slower = a.speed().min(b.speed());
                if gap >= ALONG_TRACK_SEPARATION_S * slower {
                    continue;
                }
            }
            out.push(SeparationViolation {
                a: a.id,
                b: b.id,
                vertical_gap,
                lateral_gap,
                along_track_gap,
            });
        }
    }
    out.sort_by_key(|v| (v.a, v.b));
    out
}

/// Unit horizontal axis bisecting both headings when the pair shares a path.
fn shared_path_axis(a: &Aircraft, b: &Aircraft) -> Option<(f64, f64)> {
    let (ha, hb) = (a.heading()?, b.heading()?);
    let mut diff = (ha - hb).abs() % std::f64::consts::TAU;
    if diff > std::f64::consts::PI {
        diff = std::f64::consts::TAU - diff;
    }
    if diff >= SAME_PATH_HEADING_DEG.to_radians() {
        return None;
    }
    let (ua, ub) = (a.vel * (1.0 / a.speed()), b.vel * (1.0 / b.speed()));
    let sum = (ua.x + ub.x, ua.y + ub.y);
    let n = sum.0.hypot(sum.1);
    Some((sum.0 / n, sum.1 / n))
}
