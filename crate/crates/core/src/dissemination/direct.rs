//! Aircraft-to-aircraft alerts: broadcast, pre-opened connections, or
//! channels established on demand.

use super::{DisseminationError, Effect, Plan, Strategy, World};
use crate::engine::{ChannelLink, EventKind};
use crate::model::{distance, Aircraft, AircraftId, Alert, AlertId, ChannelState};

/// A direct alert still looking for aircraft that come into range.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectTracking {
    pub alert_id: AlertId,
    pub origin: AircraftId,
    pub sent: Vec<AircraftId>,
}

/// Aircraft within `comm_range` of `origin` at `now` (everyone when the
/// range is unlimited), ascending by id.
pub fn nearby_aircraft(world: &World, origin: AircraftId, now: f64) -> Vec<AircraftId> {
    let here = world.aircraft(origin).position_at(now);
    world
        .fleet
        .iter()
        .filter(|ac| ac.id != origin)
        .filter(|ac| {
            world
                .comm
                .comm_range
                .is_none_or(|r| distance(here, ac.position_at(now)) <= r)
        })
        .map(|ac| ac.id)
        .collect()
}

fn plan_sends(
    plan: &mut Plan,
    alert_id: AlertId,
    origin: &Aircraft,
    targets: &[AircraftId],
    strategy: &Strategy,
    now: f64,
) -> Result<(), DisseminationError> {
    for &target in targets {
        let depart = match *strategy {
            Strategy::DirectBroadcast => now,
            Strategy::DirectOpenConnections { per_target_overhead } => now + per_target_overhead,
            Strategy::DirectOnDemand { channel_estd_time } => match origin.channel(target).ready_at(now) {
                Some(t) => t,
                None => {
                    let done = now + channel_estd_time;
                    plan.effect(Effect::SetAircraftChannel {
                        a: origin.id,
                        b: target,
                        state: ChannelState::Establishing(done),
                    });
                    plan.schedule(
                        done,
                        EventKind::ChannelEstablished {
                            link: ChannelLink::Aircraft(origin.id, target),
                        },
                    );
                    done
                }
            },
            _ => {
                return Err(DisseminationError::WrongStrategy {
                    strategy: strategy.label(),
                    expected: "direct",
                })
            }
        };
        plan.schedule(
            depart,
            EventKind::DirectSend {
                alert_id,
                from: origin.id,
                target,
            },
        );
    }
    Ok(())
}

/// Send the alert to every nearby aircraft. With a finite range the alert
/// stays tracked so late arrivals are served, and an alert with nobody in
/// range is buffered on the device.
pub fn handle_detection_direct(
    alert: &Alert,
    world: &World,
    strategy: &Strategy,
    now: f64,
) -> Result<Plan, DisseminationError> {
    if !strategy.is_direct() {
        return Err(DisseminationError::WrongStrategy {
            strategy: strategy.label(),
            expected: "direct",
        });
    }
    let origin = world.aircraft(alert.origin);
    let targets = nearby_aircraft(world, origin.id, now);
    let mut plan = Plan::default();
    plan_sends(&mut plan, alert.alert_id, origin, &targets, strategy, now)?;
    if world.comm.comm_range.is_some() {
        if targets.is_empty() {
            plan.effect(Effect::StoreAlert {
                aircraft: origin.id,
                alert: alert.clone(),
            });
        }
        plan.effect(Effect::TrackDirect {
            alert_id: alert.alert_id,
            origin: origin.id,
            sent: targets.clone(),
        });
    }
    if !targets.is_empty() {
        plan.effect(Effect::NoteTargets {
            alert_id: alert.alert_id,
            targets,
        });
    }
    Ok(plan)
}

/// Serve aircraft that entered range since the alert was last sent.
pub fn check_new_aircraft(
    tracking: &DirectTracking,
    world: &World,
    strategy: &Strategy,
    now: f64,
) -> Result<Plan, DisseminationError> {
    let fresh: Vec<_> = nearby_aircraft(world, tracking.origin, now)
        .into_iter()
        .filter(|id| !tracking.sent.contains(id))
        .collect();
    let mut plan = Plan::default();
    if fresh.is_empty() {
        return Ok(plan);
    }
    let origin = world.aircraft(tracking.origin);
    plan_sends(&mut plan, tracking.alert_id, origin, &fresh, strategy, now)?;
    if tracking.sent.is_empty() {
        plan.effect(Effect::ReleaseStored {
            aircraft: origin.id,
            alert_id: tracking.alert_id,
        });
    }
    plan.effect(Effect::TrackDirect {
        alert_id: tracking.alert_id,
        origin: origin.id,
        sent: fresh.clone(),
    });
    plan.effect(Effect::NoteTargets {
        alert_id: tracking.alert_id,
        targets: fresh,
    });
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissemination::testutil::{alert_from, static_world};
    use crate::model::Vec3;

    fn pair() -> World {
        static_world(
            &[
                Vec3::new(0.0, 0.0, 1e4),
                Vec3::new(1e5, 0.0, 1e4),
                Vec3::new(3e5, 0.0, 1e4),
            ],
            &[],
        )
    }

    fn send_times(plan: &Plan) -> Vec<(f64, AircraftId)> {
        plan.events
            .iter()
            .filter_map(|(t, k)| match k {
                EventKind::DirectSend { target, .. } => Some((*t, *target)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn broadcast_departs_immediately_to_everyone() {
        let w = pair();
        let plan = handle_detection_direct(&alert_from(&w, 0, 2.0), &w, &Strategy::DirectBroadcast, 2.0).unwrap();
        assert_eq!(send_times(&plan), vec![(2.0, AircraftId(1)), (2.0, AircraftId(2))]);
    }

    #[test]
    fn open_connections_add_constant_overhead() {
        let w = pair();
        let s = Strategy::DirectOpenConnections {
            per_target_overhead: 0.25,
        };
        let plan = handle_detection_direct(&alert_from(&w, 0, 2.0), &w, &s, 2.0).unwrap();
        assert!(send_times(&plan).iter().all(|(t, _)| *t == 2.25));
    }

    #[test]
    fn on_demand_establishes_then_reuses() {
        let mut w = pair();
        let s = Strategy::DirectOnDemand {
            channel_estd_time: 0.05,
        };
        let plan = handle_detection_direct(&alert_from(&w, 0, 2.0), &w, &s, 2.0).unwrap();
        assert_eq!(send_times(&plan), vec![(2.05, AircraftId(1)), (2.05, AircraftId(2))]);
        assert_eq!(
            plan.effects
                .iter()
                .filter(|e| matches!(e, Effect::SetAircraftChannel { .. }))
                .count(),
            2
        );

        w.fleet[0].channels.insert(AircraftId(1), ChannelState::Open);
        w.fleet[0]
            .channels
            .insert(AircraftId(2), ChannelState::Establishing(2.5));
        let plan = handle_detection_direct(&alert_from(&w, 0, 2.1), &w, &s, 2.1).unwrap();
        assert_eq!(send_times(&plan), vec![(2.1, AircraftId(1)), (2.5, AircraftId(2))]);
        assert!(plan
            .effects
            .iter()
            .all(|e| !matches!(e, Effect::SetAircraftChannel { .. })));
    }

    #[test]
    fn finite_range_limits_list_and_tracks() {
        let mut w = pair();
        w.comm.comm_range = Some(1.5e5);
        let plan = handle_detection_direct(&alert_from(&w, 0, 0.0), &w, &Strategy::DirectBroadcast, 0.0).unwrap();
        assert_eq!(send_times(&plan), vec![(0.0, AircraftId(1))]);
        assert!(plan.effects.contains(&Effect::TrackDirect {
            alert_id: AlertId(0),
            origin: AircraftId(0),
            sent: vec![AircraftId(1)]
        }));
    }

    #[test]
    fn nobody_in_range_stores_on_device() {
        let mut w = pair();
        w.comm.comm_range = Some(1e3);
        let plan = handle_detection_direct(&alert_from(&w, 0, 0.0), &w, &Strategy::DirectBroadcast, 0.0).unwrap();
        assert!(plan.events.is_empty());
        assert!(matches!(plan.effects[0], Effect::StoreAlert { .. }));
    }

    #[test]
    fn newcomer_in_range_is_served() {
        let mut w = pair();
        w.comm.comm_range = Some(1.5e5);
        let tracking = DirectTracking {
            alert_id: AlertId(4),
            origin: AircraftId(0),
            sent: vec![AircraftId(1)],
        };
        let plan = check_new_aircraft(&tracking, &w, &Strategy::DirectBroadcast, 5.0).unwrap();
        assert!(plan.events.is_empty());

        // aircraft 2 moves in
        w.fleet[2].origin = Vec3::new(1.2e5, 0.0, 1e4);
        let plan = check_new_aircraft(&tracking, &w, &Strategy::DirectBroadcast, 5.0).unwrap();
        assert_eq!(send_times(&plan), vec![(5.0, AircraftId(2))]);
    }
}
