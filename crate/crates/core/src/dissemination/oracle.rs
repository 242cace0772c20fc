//! Closed-form latencies for static geometry: tower relay, tower overhead
//! and direct delivery. Used as desk-check oracles against the engine.

use serde::Serialize;

use super::DisseminationError;
use crate::model::{propagation_delay, AtcTower, Position3};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LatencyBreakdown {
    pub uplink: f64,
    pub overhead: f64,
    pub downlink: f64,
    pub channel_estd: f64,
    pub direct: f64,
    pub total: f64,
}

fn non_negative(name: &'static str, v: f64) -> Result<(), DisseminationError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(DisseminationError::NegativeParameter(name))
    }
}

/// Origin to tower, tower overhead, tower to target.
pub fn indirect_latency(
    org: Position3,
    tower: &AtcTower,
    tar: Position3,
    overhead: f64,
    speed: f64,
) -> Result<LatencyBreakdown, DisseminationError> {
    non_negative("overhead", overhead)?;
    let uplink = propagation_delay(org, tower.pos, speed)?;
    let downlink = propagation_delay(tower.pos, tar, speed)?;
    Ok(LatencyBreakdown {
        uplink,
        overhead,
        downlink,
        total: uplink + overhead + downlink,
        ..Default::default()
    })
}

/// Total tower overhead: interval wait + priority-queue wait + list creation.
pub fn atc_overhead(interval_wait: f64, priority_wait: f64, list_time: f64) -> Result<f64, DisseminationError> {
    non_negative("interval_wait", interval_wait)?;
    non_negative("priority_wait", priority_wait)?;
    non_negative("list_time", list_time)?;
    Ok(interval_wait + priority_wait + list_time)
}

/// Channel establishment followed by straight-line propagation.
pub fn direct_latency(
    org: Position3,
    tar: Position3,
    channel_estd: f64,
    speed: f64,
) -> Result<LatencyBreakdown, DisseminationError> {
    non_negative("channel_estd", channel_estd)?;
    let direct = propagation_delay(org, tar, speed)?;
    Ok(LatencyBreakdown {
        channel_estd,
        direct,
        total: channel_estd + direct,
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissemination::interval_wait;
    use crate::model::{TowerId, Vec3, SPEED_OF_LIGHT};

    const C: f64 = SPEED_OF_LIGHT;

    fn tower_at_origin() -> AtcTower {
        AtcTower::new(TowerId(0), Vec3::ZERO, 1e6)
    }

    #[test]
    fn indirect_examples() {
        let t = tower_at_origin();
        assert_eq!(indirect_latency(Vec3::ZERO, &t, Vec3::ZERO, 0.0, C).unwrap().total, 0.0);

        let org = Vec3::new(1e5, 0.0, 0.0);
        let tar = Vec3::new(0.0, 5e4, 0.0);
        let l = indirect_latency(org, &t, tar, 0.0, C).unwrap();
        // (1e5 + 5e4) / c
        assert!((l.total - 5.0034e-4).abs() < 1e-8);
        assert_eq!(l.total, l.uplink + l.downlink);

        let l = indirect_latency(org, &t, tar, 50.0, C).unwrap();
        assert!((l.total - 50.00050034).abs() < 1e-8);
        assert!(indirect_latency(org, &t, tar, -1.0, C).is_err());
    }

    #[test]
    fn overhead_examples() {
        assert_eq!(atc_overhead(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((atc_overhead(37.2, 0.0, 0.001).unwrap() - 37.201).abs() < 1e-12);
        // detection at 47 s, 100 km uplink, 50 s cycle from 0
        let arrival = 47.0 + 1e5 / C;
        let wait = interval_wait(arrival, 50.0);
        assert!((wait - 2.99966644).abs() < 1e-8, "{wait}");
    }

    #[test]
    fn direct_examples() {
        assert_eq!(direct_latency(Vec3::ZERO, Vec3::ZERO, 0.0, C).unwrap().total, 0.0);
        let tar = Vec3::new(1e5, 0.0, 0.0);
        assert!((direct_latency(Vec3::ZERO, tar, 0.0, C).unwrap().total - 3.3356e-4).abs() < 1e-8);
        let l = direct_latency(Vec3::ZERO, tar, 0.05, C).unwrap();
        assert!((l.total - 0.05033356).abs() < 1e-8);
        assert_eq!(l.total, l.channel_estd + l.direct);
    }
}
