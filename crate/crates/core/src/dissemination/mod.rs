//! Alert dissemination strategies.
//!
//! Each strategy is a pure planner: given an alert, an immutable view of the
//! world and the current time it returns a [`Plan`] of events to schedule
//! and state changes to apply. The engine owns all mutation.

mod direct;
mod indirect;
mod oracle;
mod relay;

pub use direct::{check_new_aircraft, handle_detection_direct, nearby_aircraft, DirectTracking};
pub use indirect::{create_list_atc, handle_detection_indirect, interval_wait, ListMembership, TargetFilter};
pub use oracle::{atc_overhead, direct_latency, indirect_latency, LatencyBreakdown};
pub use relay::handle_detection_multi_atc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EventKind;
use crate::model::{
    ActiveRegion, Aircraft, AircraftId, Alert, AlertId, AtcTower, ChannelState, GeometryError, TowerId, TowerMode,
    SPEED_OF_LIGHT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisseminationError {
    #[error("strategy {0} needs at least one ATC tower")]
    NoTowers(&'static str),
    #[error("strategy {strategy} cannot handle a {expected} detection")]
    WrongStrategy {
        strategy: &'static str,
        expected: &'static str,
    },
    #[error("{0} must be non-negative and finite")]
    NegativeParameter(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn default_period() -> f64 {
    50.0
}
fn default_service_time() -> f64 {
    1.0
}
fn default_per_target_overhead() -> f64 {
    0.001
}
fn default_channel_estd() -> f64 {
    0.05
}
fn default_inter_tower_processing() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrategyRepr", into = "StrategyRepr")]
pub enum Strategy {
    IndirectAlwaysOpen,
    IndirectInterval { period: f64 },
    IndirectPriority { service_time: f64 },
    DirectBroadcast,
    DirectOpenConnections { per_target_overhead: f64 },
    DirectOnDemand { channel_estd_time: f64 },
    MultiAtcRelay { inter_tower_processing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StrategyKind {
    IndirectAlwaysOpen,
    IndirectInterval,
    IndirectPriority,
    DirectBroadcast,
    DirectOpenConnections,
    DirectOnDemand,
    MultiAtcRelay,
}

/// Wire form: `{"kind": ..., <that kind's parameters>}`. Parameters that
/// belong to another kind are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyRepr {
    kind: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_target_overhead: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel_estd_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inter_tower_processing: Option<f64>,
}

impl TryFrom<StrategyRepr> for Strategy {
    type Error = String;

    fn try_from(r: StrategyRepr) -> Result<Self, String> {
        let given = [
            ("period", r.period),
            ("service_time", r.service_time),
            ("per_target_overhead", r.per_target_overhead),
            ("channel_estd_time", r.channel_estd_time),
            ("inter_tower_processing", r.inter_tower_processing),
        ];
        let (strategy, own) = match r.kind {
            StrategyKind::IndirectAlwaysOpen => (Strategy::IndirectAlwaysOpen, None),
            StrategyKind::IndirectInterval => (
                Strategy::IndirectInterval {
                    period: r.period.unwrap_or_else(default_period),
                },
                Some("period"),
            ),
            StrategyKind::IndirectPriority => (
                Strategy::IndirectPriority {
                    service_time: r.service_time.unwrap_or_else(default_service_time),
                },
                Some("service_time"),
            ),
            StrategyKind::DirectBroadcast => (Strategy::DirectBroadcast, None),
            StrategyKind::DirectOpenConnections => (
                Strategy::DirectOpenConnections {
                    per_target_overhead: r.per_target_overhead.unwrap_or_else(default_per_target_overhead),
                },
                Some("per_target_overhead"),
            ),
            StrategyKind::DirectOnDemand => (
                Strategy::DirectOnDemand {
                    channel_estd_time: r.channel_estd_time.unwrap_or_else(default_channel_estd),
                },
                Some("channel_estd_time"),
            ),
            StrategyKind::MultiAtcRelay => (
                Strategy::MultiAtcRelay {
                    inter_tower_processing: r.inter_tower_processing.unwrap_or_else(default_inter_tower_processing),
                },
                Some("inter_tower_processing"),
            ),
        };
        if let Some((name, _)) = given.iter().find(|(name, v)| v.is_some() && Some(*name) != own) {
            return Err(format!(
                "`{name}` is not a parameter of strategy `{}`",
                strategy.label()
            ));
        }
        Ok(strategy)
    }
}

impl From<Strategy> for StrategyRepr {
    fn from(s: Strategy) -> Self {
        let mut r = StrategyRepr {
            kind: StrategyKind::DirectBroadcast,
            period: None,
            service_time: None,
            per_target_overhead: None,
            channel_estd_time: None,
            inter_tower_processing: None,
        };
        r.kind = match s {
            Strategy::IndirectAlwaysOpen => StrategyKind::IndirectAlwaysOpen,
            Strategy::IndirectInterval { period } => {
                r.period = Some(period);
                StrategyKind::IndirectInterval
            }
            Strategy::IndirectPriority { service_time } => {
                r.service_time = Some(service_time);
                StrategyKind::IndirectPriority
            }
            Strategy::DirectBroadcast => StrategyKind::DirectBroadcast,
            Strategy::DirectOpenConnections { per_target_overhead } => {
                r.per_target_overhead = Some(per_target_overhead);
                StrategyKind::DirectOpenConnections
            }
            Strategy::DirectOnDemand { channel_estd_time } => {
                r.channel_estd_time = Some(channel_estd_time);
                StrategyKind::DirectOnDemand
            }
            Strategy::MultiAtcRelay { inter_tower_processing } => {
                r.inter_tower_processing = Some(inter_tower_processing);
                StrategyKind::MultiAtcRelay
            }
        };
        r
    }
}

impl Strategy {
    /// Every strategy with its default parameters, in presentation order.
    pub fn all_defaults() -> [Strategy; 7] {
        [
            Strategy::IndirectAlwaysOpen,
            Strategy::IndirectInterval {
                period: default_period(),
            },
            Strategy::IndirectPriority {
                service_time: default_service_time(),
            },
            Strategy::DirectBroadcast,
            Strategy::DirectOpenConnections {
                per_target_overhead: default_per_target_overhead(),
            },
            Strategy::DirectOnDemand {
                channel_estd_time: default_channel_estd(),
            },
            Strategy::MultiAtcRelay {
                inter_tower_processing: default_inter_tower_processing(),
            },
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::IndirectAlwaysOpen => "indirect_always_open",
            Strategy::IndirectInterval { .. } => "indirect_interval",
            Strategy::IndirectPriority { .. } => "indirect_priority",
            Strategy::DirectBroadcast => "direct_broadcast",
            Strategy::DirectOpenConnections { .. } => "direct_open_connections",
            Strategy::DirectOnDemand { .. } => "direct_on_demand",
            Strategy::MultiAtcRelay { .. } => "multi_atc_relay",
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(
            self,
            Strategy::DirectBroadcast | Strategy::DirectOpenConnections { .. } | Strategy::DirectOnDemand { .. }
        )
    }

    pub fn is_single_tower(&self) -> bool {
        matches!(
            self,
            Strategy::IndirectAlwaysOpen | Strategy::IndirectInterval { .. } | Strategy::IndirectPriority { .. }
        )
    }

    pub fn needs_towers(&self) -> bool {
        !self.is_direct()
    }

    /// Operating mode every tower runs under this strategy.
    pub fn tower_mode(&self) -> TowerMode {
        match self {
            Strategy::IndirectInterval { .. } => TowerMode::Interval,
            Strategy::IndirectPriority { .. } => TowerMode::PriorityQueue,
            _ => TowerMode::AlwaysOpen,
        }
    }

    pub fn validate(&self) -> Result<(), DisseminationError> {
        let (name, v) = match *self {
            Strategy::IndirectInterval { period } => {
                if !(period > 0.0 && period.is_finite()) {
                    return Err(DisseminationError::NegativeParameter("period"));
                }
                return Ok(());
            }
            Strategy::IndirectPriority { service_time } => ("service_time", service_time),
            Strategy::DirectOpenConnections { per_target_overhead } => ("per_target_overhead", per_target_overhead),
            Strategy::DirectOnDemand { channel_estd_time } => ("channel_estd_time", channel_estd_time),
            Strategy::MultiAtcRelay { inter_tower_processing } => ("inter_tower_processing", inter_tower_processing),
            Strategy::IndirectAlwaysOpen | Strategy::DirectBroadcast => return Ok(()),
        };
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(DisseminationError::NegativeParameter(name))
        }
    }
}

/// Communication parameters shared by all strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommParams {
    pub signal_speed: f64,
    /// Direct-link range in meters; `None` reaches the whole airspace.
    pub comm_range: Option<f64>,
    /// Target-list creation time at a tower.
    pub list_creation_time: f64,
    /// One-off aircraft-to-tower channel setup delay.
    pub atc_channel_estd: f64,
    /// Start every aircraft-to-tower channel open.
    pub atc_channels_open: bool,
    /// Apply the heading-toward-hazard filter to single-tower target lists.
    pub indirect_path_filter: bool,
    /// Radius around an alert location used by the path filter.
    pub hazard_radius: f64,
    /// Poisson rate of low-priority background messages per tower, in the
    /// priority-queue mode.
    pub background_rate: f64,
}

impl Default for CommParams {
    fn default() -> Self {
        Self {
            signal_speed: SPEED_OF_LIGHT,
            comm_range: None,
            list_creation_time: 0.001,
            atc_channel_estd: 0.05,
            atc_channels_open: false,
            indirect_path_filter: false,
            hazard_radius: crate::model::LATERAL_SEPARATION_M,
            background_rate: 0.0,
        }
    }
}

/// Immutable snapshot consulted by the planners.
#[derive(Debug, Clone)]
pub struct World {
    pub fleet: Vec<Aircraft>,
    pub towers: Vec<AtcTower>,
    pub regions: Vec<ActiveRegion>,
    pub comm: CommParams,
}

impl World {
    pub fn aircraft(&self, id: AircraftId) -> &Aircraft {
        &self.fleet[id.index()]
    }

    pub fn tower(&self, id: TowerId) -> &AtcTower {
        &self.towers[id.index()]
    }
}

/// State change requested by a planner.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    /// Buffer on the aircraft until communication is possible.
    StoreAlert { aircraft: AircraftId, alert: Alert },
    /// Drop a buffered alert once it has left the device.
    ReleaseStored { aircraft: AircraftId, alert_id: AlertId },
    /// Symmetric aircraft-to-aircraft channel state.
    SetAircraftChannel {
        a: AircraftId,
        b: AircraftId,
        state: ChannelState,
    },
    SetTowerChannel {
        aircraft: AircraftId,
        tower: TowerId,
        state: ChannelState,
    },
    /// Aircraft added to the alert's target list.
    NoteTargets {
        alert_id: AlertId,
        targets: Vec<AircraftId>,
    },
    /// Keep watching for aircraft entering direct range of the origin.
    TrackDirect {
        alert_id: AlertId,
        origin: AircraftId,
        sent: Vec<AircraftId>,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Plan {
    pub events: Vec<(f64, EventKind)>,
    pub effects: Vec<Effect>,
}

impl Plan {
    pub fn schedule(&mut self, time: f64, kind: EventKind) {
        self.events.push((time, kind));
    }

    pub fn effect(&mut self, e: Effect) {
        self.effects.push(e);
    }
}

/// Route a fresh detection to the planner for `strategy`.
pub fn handle_detection(
    alert: &Alert,
    world: &World,
    strategy: &Strategy,
    now: f64,
) -> Result<Plan, DisseminationError> {
    if strategy.is_direct() {
        handle_detection_direct(alert, world, strategy, now)
    } else if strategy.is_single_tower() {
        handle_detection_indirect(alert, world, strategy, now)
    } else {
        handle_detection_multi_atc(alert, world, strategy, now)
    }
}
