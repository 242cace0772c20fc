//! Alerts relayed through a single ATC tower.

use super::{DisseminationError, Effect, Plan, Strategy, World};
use crate::engine::{ChannelLink, EventKind};
use crate::model::{path_intersects_sphere, AircraftId, Alert, ChannelState, TowerId};

/// Which aircraft a tower considers its own when building a target list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListMembership {
    /// Every aircraft inside the coverage disk.
    Coverage,
    /// Aircraft whose connected tower is this one.
    Connected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetFilter {
    pub membership: ListMembership,
    /// Keep only aircraft whose forward path passes within this radius of
    /// the alert location.
    pub hazard_radius: Option<f64>,
}

/// The tower's target list for `alert` at time `now`, origin excluded,
/// ascending by aircraft id.
pub fn create_list_atc(
    world: &World,
    tower: TowerId,
    alert: &Alert,
    filter: TargetFilter,
    now: f64,
) -> Vec<AircraftId> {
    let t = world.tower(tower);
    world
        .fleet
        .iter()
        .filter(|ac| ac.id != alert.origin)
        .filter(|ac| match filter.membership {
            ListMembership::Coverage => t.covers(ac.position_at(now)),
            ListMembership::Connected => ac.connected_tower == Some(tower),
        })
        .filter(|ac| {
            filter
                .hazard_radius
                .is_none_or(|r| path_intersects_sphere(ac.position_at(now), ac.vel, alert.location, r))
        })
        .map(|ac| ac.id)
        .collect()
}

/// Wait from `arrival` to the next broadcast tick of a cycle starting at 0.
/// An arrival exactly on a tick waits a whole period.
pub fn interval_wait(arrival: f64, period: f64) -> f64 {
    period - arrival.rem_euclid(period)
}

/// Origin side of the single-tower relay: buffer when out of coverage,
/// otherwise (after opening the tower channel if needed) send the location up.
pub fn handle_detection_indirect(
    alert: &Alert,
    world: &World,
    strategy: &Strategy,
    now: f64,
) -> Result<Plan, DisseminationError> {
    if !strategy.is_single_tower() {
        return Err(DisseminationError::WrongStrategy {
            strategy: strategy.label(),
            expected: "single-tower",
        });
    }
    if world.towers.is_empty() {
        return Err(DisseminationError::NoTowers(strategy.label()));
    }
    let origin = world.aircraft(alert.origin);
    let mut plan = Plan::default();
    let Some(tower) = origin.connected_tower else {
        plan.effect(Effect::StoreAlert {
            aircraft: origin.id,
            alert: alert.clone(),
        });
        return Ok(plan);
    };

    let state = if world.comm.atc_channels_open {
        ChannelState::Open
    } else {
        world.tower(tower).channel(origin.id)
    };
    let depart = match state.ready_at(now) {
        Some(t) => t,
        None => {
            let done = now + world.comm.atc_channel_estd;
            plan.effect(Effect::SetTowerChannel {
                aircraft: origin.id,
                tower,
                state: ChannelState::Establishing(done),
            });
            plan.schedule(
                done,
                EventKind::ChannelEstablished {
                    link: ChannelLink::Tower {
                        aircraft: origin.id,
                        tower,
                    },
                },
            );
            done
        }
    };
    plan.schedule(
        depart,
        EventKind::Uplink {
            alert_id: alert.alert_id,
            aircraft: origin.id,
            tower,
        },
    );
    Ok(plan)
}
