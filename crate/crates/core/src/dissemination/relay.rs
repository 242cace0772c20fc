//! Alerts relayed across a network of linked ATC towers.
//!
//! The origin only talks to its connected tower; forwarding between towers
//! and per-tower target lists are driven by the engine on `TowerReceive`.

use super::{DisseminationError, Effect, Plan, Strategy, World};
use crate::engine::EventKind;
use crate::model::Alert;

pub fn handle_detection_multi_atc(
    alert: &Alert,
    world: &World,
    strategy: &Strategy,
    now: f64,
) -> Result<Plan, DisseminationError> {
    if !matches!(strategy, Strategy::MultiAtcRelay { .. }) {
        return Err(DisseminationError::WrongStrategy {
            strategy: strategy.label(),
            expected: "multi-tower",
        });
    }
    if world.towers.is_empty() {
        return Err(DisseminationError::NoTowers(strategy.label()));
    }
    let origin = world.aircraft(alert.origin);
    let mut plan = Plan::default();
    match origin.connected_tower {
        None => plan.effect(Effect::StoreAlert {
            aircraft: origin.id,
            alert: alert.clone(),
        }),
        Some(tower) => plan.schedule(
            now,
            EventKind::Uplink {
                alert_id: alert.alert_id,
                aircraft: origin.id,
                tower,
            },
        ),
    }
    Ok(plan)
}
