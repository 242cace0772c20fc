//! Deterministic discrete-event core.
//!
//! Events are dispatched in `(time, seq)` order, where `seq` is the
//! insertion counter. A kinematics tick moves the fleet, re-associates
//! aircraft with towers and samples every sensor; detections are handed to
//! the configured strategy, whose plan is applied here. Message legs are
//! timed against exact straight-line positions, not tick snapshots.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dissemination::{
    check_new_aircraft, create_list_atc, handle_detection, interval_wait, DirectTracking, DisseminationError, Effect,
    ListMembership, Plan, Strategy, TargetFilter, World,
};
use crate::kinematics::{advance_to, process_handoffs};
use crate::metrics::{DeliveryRecord, MetricsError, MetricsSink};
use crate::model::{
    intercept_delay, propagation_delay, ActiveRegion, AircraftId, Alert, AlertId, CatRegion, ChannelState,
    GeometryError, QueuedMessage, QueuedPayload, TowerId, TowerMode, Vec3,
};
use crate::sensor::{sensor_tick, AlertIdGen};

/// RNG stream numbers derived from the run seed.
pub const STREAM_FLEET: u64 = 0;
pub const STREAM_SPAWN: u64 = 1;
pub const STREAM_BACKGROUND: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("engine bug: {kind} scheduled at t={time} while the clock reads {clock}")]
    ScheduleInPast { time: f64, clock: f64, kind: &'static str },
    #[error("strategy {0} needs at least one ATC tower")]
    NoTowers(&'static str),
    #[error("tick must be positive and finite, got {0}")]
    BadTick(f64),
    #[error(transparent)]
    Dissemination(#[from] DisseminationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelLink {
    Aircraft(AircraftId, AircraftId),
    Tower { aircraft: AircraftId, tower: TowerId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    KinematicsTick {
        index: u64,
    },
    SensorSample {
        aircraft: AircraftId,
    },
    Handoff {
        aircraft: AircraftId,
        from: Option<TowerId>,
        to: Option<TowerId>,
    },
    /// Replay alerts buffered while out of coverage.
    StoreRetry {
        aircraft: AircraftId,
    },
    /// Aircraft-to-tower departure.
    Uplink {
        alert_id: AlertId,
        aircraft: AircraftId,
        tower: TowerId,
    },
    TowerReceive {
        alert_id: AlertId,
        tower: TowerId,
        from: Option<TowerId>,
        hops: u32,
    },
    /// Target list creation finished.
    ListReady {
        alert_id: AlertId,
        tower: TowerId,
        hops: u32,
    },
    BroadcastTick {
        tower: TowerId,
    },
    QueueService {
        tower: TowerId,
    },
    /// Tower-to-tower departure.
    TowerForward {
        alert_id: AlertId,
        from: TowerId,
        to: TowerId,
        hops: u32,
    },
    /// Tower-to-aircraft departure.
    Downlink {
        alert_id: AlertId,
        tower: TowerId,
        target: AircraftId,
        hops: u32,
    },
    /// Aircraft-to-aircraft departure.
    DirectSend {
        alert_id: AlertId,
        from: AircraftId,
        target: AircraftId,
    },
    ChannelEstablished {
        link: ChannelLink,
    },
    Delivery {
        alert_id: AlertId,
        target: AircraftId,
        hops: u32,
    },
    RegionSpawn,
    BackgroundArrival {
        tower: TowerId,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::KinematicsTick { .. } => "kinematics_tick",
            EventKind::SensorSample { .. } => "sensor_sample",
            EventKind::Handoff { .. } => "handoff",
            EventKind::StoreRetry { .. } => "store_retry",
            EventKind::Uplink { .. } => "uplink",
            EventKind::TowerReceive { .. } => "tower_receive",
            EventKind::ListReady { .. } => "list_ready",
            EventKind::BroadcastTick { .. } => "broadcast_tick",
            EventKind::QueueService { .. } => "queue_service",
            EventKind::TowerForward { .. } => "tower_forward",
            EventKind::Downlink { .. } => "downlink",
            EventKind::DirectSend { .. } => "direct_send",
            EventKind::ChannelEstablished { .. } => "channel_established",
            EventKind::Delivery { .. } => "delivery",
            EventKind::RegionSpawn => "region_spawn",
            EventKind::BackgroundArrival { .. } => "background_arrival",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    /// Seq of the event whose dispatch scheduled this one.
    pub cause: Option<u64>,
    pub kind: EventKind,
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

/// Min-queue on `(time, seq)` plus the simulation clock.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    clock: f64,
    next_seq: u64,
    dispatching: Option<u64>,
}

impl EventQueue {
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) -> Result<u64, EngineError> {
        if time.is_nan() || time < self.clock {
            return Err(EngineError::ScheduleInPast {
                time,
                clock: self.clock,
                kind: kind.name(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event {
            time,
            seq,
            cause: self.dispatching,
            kind,
        }));
        Ok(seq)
    }

    /// Remove the earliest event and advance the clock to it.
    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(ev) = self.heap.pop()?;
        self.clock = ev.time;
        self.dispatching = Some(ev.seq);
        Some(ev)
    }
}

/// Poisson-spawned turbulence regions, centered near a random aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpawnParams {
    /// Regions per second.
    pub rate: f64,
    pub radius: f64,
    pub intensity: f64,
    /// Seconds a region stays active; `None` keeps it forever.
    pub lifetime: Option<f64>,
    /// Horizontal offset of the center from the chosen aircraft, drawn
    /// uniformly from `[-scatter, scatter]` on each axis.
    pub scatter: f64,
}

impl Default for SpawnParams {
    fn default() -> Self {
        Self {
            rate: 0.02,
            radius: 15_000.0,
            intensity: 10.0,
            lifetime: Some(120.0),
            scatter: 10_000.0,
        }
    }
}

pub struct SimSetup {
    pub world: World,
    pub strategy: Strategy,
    pub tick: f64,
    /// Keep dispatching in-flight messages after the horizon.
    pub drain: bool,
    pub spawn: Option<SpawnParams>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TowerCounters {
    /// Copies of alerts that reached the tower, duplicates included.
    pub receipts: u64,
    pub duplicates: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events_dispatched: u64,
    pub ticks: u64,
    pub handoffs: u64,
    pub alerts: u64,
    pub deliveries: u64,
    /// Deliveries dropped because the target already had the alert.
    pub suppressed_deliveries: u64,
    pub towers: Vec<TowerCounters>,
}

#[derive(Debug, Clone, PartialEq)]
struct PendingBroadcast {
    alert_id: AlertId,
    targets: Vec<AircraftId>,
    hops: u32,
    ready_at: f64,
}

#[derive(Debug, Default)]
struct TowerRuntime {
    seen: BTreeSet<AlertId>,
    pending: Vec<PendingBroadcast>,
    tick_scheduled: bool,
    in_service: Option<QueuedMessage>,
}

pub struct Simulation {
    queue: EventQueue,
    world: World,
    strategy: Strategy,
    tick: f64,
    drain: bool,
    horizon: f64,
    spawn: Option<SpawnParams>,
    spawn_rng: ChaCha8Rng,
    background_rng: ChaCha8Rng,
    alerts: Vec<Alert>,
    ids: AlertIdGen,
    metrics: MetricsSink,
    tracking: Vec<DirectTracking>,
    towers_rt: Vec<TowerRuntime>,
    stats: RunStats,
    trace: Option<Vec<Event>>,
}

impl Simulation {
    pub fn new(setup: SimSetup) -> Result<Self, EngineError> {
        let SimSetup {
            mut world,
            strategy,
            tick,
            drain,
            spawn,
            seed,
        } = setup;
        strategy.validate()?;
        if !(tick > 0.0 && tick.is_finite()) {
            return Err(EngineError::BadTick(tick));
        }
        if strategy.needs_towers() && world.towers.is_empty() {
            return Err(EngineError::NoTowers(strategy.label()));
        }
        for t in &mut world.towers {
            t.mode = strategy.tower_mode();
            t.list_creation_time = world.comm.list_creation_time;
            match strategy {
                Strategy::IndirectInterval { period } => t.broadcast_period = period,
                Strategy::IndirectPriority { service_time } => t.service_time = service_time,
                _ => {}
            }
        }
        // links are bidirectional
        let pairs: Vec<_> = world
            .towers
            .iter()
            .flat_map(|t| t.links.iter().map(move |l| (t.id, *l)))
            .collect();
        for (a, b) in pairs {
            world.towers[b.index()].links.insert(a);
        }
        process_handoffs(&mut world.fleet, &world.towers);

        let n_towers = world.towers.len();
        Ok(Self {
            queue: EventQueue::default(),
            world,
            strategy,
            tick,
            drain,
            horizon: 0.0,
            spawn,
            spawn_rng: stream_rng(seed, STREAM_SPAWN),
            background_rng: stream_rng(seed, STREAM_BACKGROUND),
            alerts: Vec::new(),
            ids: AlertIdGen::default(),
            metrics: MetricsSink::default(),
            tracking: Vec::new(),
            towers_rt: (0..n_towers).map(|_| TowerRuntime::default()).collect(),
            stats: RunStats {
                towers: vec![TowerCounters::default(); n_towers],
                ..RunStats::default()
            },
            trace: None,
        })
    }

    /// Record every dispatched event.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn metrics(&self) -> &MetricsSink {
        &self.metrics
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    pub fn trace(&self) -> Option<&[Event]> {
        self.trace.as_deref()
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn clock(&self) -> f64 {
        self.queue.clock()
    }

    /// Run ticks over `[0, duration]`, then (with drain) let in-flight
    /// messages land.
    pub fn run(&mut self, duration: f64) -> Result<&MetricsSink, EngineError> {
        self.horizon = duration;
        self.queue.schedule(0.0, EventKind::KinematicsTick { index: 0 })?;
        if let Some(rate) = self.spawn.map(|s| s.rate).filter(|r| *r > 0.0) {
            let first = Exp::new(rate).expect("positive rate").sample(&mut self.spawn_rng);
            if first <= duration {
                self.queue.schedule(first, EventKind::RegionSpawn)?;
            }
        }
        let bg = self.world.comm.background_rate;
        if bg > 0.0 && self.strategy.tower_mode() == TowerMode::PriorityQueue {
            let exp = Exp::new(bg).expect("positive rate");
            for t in 0..self.world.towers.len() {
                let first = exp.sample(&mut self.background_rng);
                if first <= duration {
                    self.queue.schedule(
                        first,
                        EventKind::BackgroundArrival {
                            tower: TowerId(t as u32),
                        },
                    )?;
                }
            }
        }

        while let Some(ev) = self.queue.pop() {
            if ev.time > self.horizon && !self.drain {
                break;
            }
            self.stats.events_dispatched += 1;
            if let Some(trace) = &mut self.trace {
                trace.push(ev.clone());
            }
            self.dispatch(ev.time, ev.kind)?;
        }
        Ok(&self.metrics)
    }

    fn schedule(&mut self, time: f64, kind: EventKind) -> Result<(), EngineError> {
        self.queue.schedule(time, kind).map(|_| ())
    }

    fn dispatch(&mut self, now: f64, kind: EventKind) -> Result<(), EngineError> {
        match kind {
            EventKind::KinematicsTick { index } => self.on_tick(index, now),
            EventKind::SensorSample { aircraft } => self.on_sensor(aircraft, now),
            EventKind::Handoff { aircraft, to, .. } => {
                self.stats.handoffs += 1;
                let buffered = !self.world.aircraft(aircraft).stored_alerts.is_empty();
                if to.is_some() && buffered && !self.strategy.is_direct() {
                    self.schedule(now, EventKind::StoreRetry { aircraft })?;
                }
                Ok(())
            }
            EventKind::StoreRetry { aircraft } => {
                let stored = std::mem::take(&mut self.world.fleet[aircraft.index()].stored_alerts);
                for alert in stored {
                    let plan = handle_detection(&alert, &self.world, &self.strategy, now)?;
                    self.apply(plan)?;
                }
                Ok(())
            }
            EventKind::Uplink {
                alert_id,
                aircraft,
                tower,
            } => {
                let from = self.world.aircraft(aircraft).position_at(now);
                let delay = propagation_delay(from, self.world.tower(tower).pos, self.world.comm.signal_speed)?;
                self.schedule(
                    now + delay,
                    EventKind::TowerReceive {
                        alert_id,
                        tower,
                        from: None,
                        hops: 1,
                    },
                )
            }
            EventKind::TowerReceive {
                alert_id,
                tower,
                from,
                hops,
            } => self.on_tower_receive(alert_id, tower, from, hops, now),
            EventKind::TowerForward {
                alert_id,
                from,
                to,
                hops,
            } => {
                let (a, b) = (self.world.tower(from).pos, self.world.tower(to).pos);
                let delay = propagation_delay(a, b, self.world.comm.signal_speed)?;
                self.schedule(
                    now + delay,
                    EventKind::TowerReceive {
                        alert_id,
                        tower: to,
                        from: Some(from),
                        hops: hops + 1,
                    },
                )
            }
            EventKind::ListReady { alert_id, tower, hops } => self.on_list_ready(alert_id, tower, hops, now),
            EventKind::BroadcastTick { tower } => {
                let rt = &mut self.towers_rt[tower.index()];
                rt.tick_scheduled = false;
                for p in std::mem::take(&mut rt.pending) {
                    self.metrics.tower_stage_mut(p.alert_id, tower).interval_wait = Some(now - p.ready_at);
                    self.dispatch_downlinks(p.alert_id, tower, &p.targets, p.hops, now)?;
                }
                Ok(())
            }
            EventKind::QueueService { tower } => {
                if let Some(msg) = self.towers_rt[tower.index()].in_service.take() {
                    if let QueuedPayload::Alert {
                        alert_id,
                        targets,
                        hops,
                    } = msg.payload
                    {
                        self.metrics.tower_stage_mut(alert_id, tower).priority_wait = Some(now - msg.enqueued_at);
                        self.dispatch_downlinks(alert_id, tower, &targets, hops, now)?;
                    }
                }
                self.start_service(tower, now)
            }
            EventKind::BackgroundArrival { tower } => {
                self.world.towers[tower.index()]
                    .queue
                    .push(1, now, QueuedPayload::Background);
                self.start_service(tower, now)?;
                let next = now
                    + Exp::new(self.world.comm.background_rate)
                        .expect("positive rate")
                        .sample(&mut self.background_rng);
                if next <= self.horizon {
                    self.schedule(next, EventKind::BackgroundArrival { tower })?;
                }
                Ok(())
            }
            EventKind::Downlink {
                alert_id,
                tower,
                target,
                hops,
            } => {
                let ac = self.world.aircraft(target);
                let delay = intercept_delay(
                    self.world.tower(tower).pos,
                    ac.position_at(now),
                    ac.vel,
                    self.world.comm.signal_speed,
                )?;
                self.schedule(
                    now + delay,
                    EventKind::Delivery {
                        alert_id,
                        target,
                        hops: hops + 1,
                    },
                )
            }
            EventKind::DirectSend { alert_id, from, target } => {
                let emit = self.world.aircraft(from).position_at(now);
                let ac = self.world.aircraft(target);
                let delay = intercept_delay(emit, ac.position_at(now), ac.vel, self.world.comm.signal_speed)?;
                self.schedule(
                    now + delay,
                    EventKind::Delivery {
                        alert_id,
                        target,
                        hops: 1,
                    },
                )
            }
            EventKind::ChannelEstablished { link } => {
                match link {
                    ChannelLink::Aircraft(a, b) => self.set_aircraft_channel(a, b, ChannelState::Open),
                    ChannelLink::Tower { aircraft, tower } => {
                        self.world.towers[tower.index()]
                            .aircraft_channels
                            .insert(aircraft, ChannelState::Open);
                    }
                }
                Ok(())
            }
            EventKind::Delivery { alert_id, target, hops } => self.on_delivery(alert_id, target, hops, now),
            EventKind::RegionSpawn => self.on_spawn(now),
        }
    }

    fn on_tick(&mut self, index: u64, now: f64) -> Result<(), EngineError> {
        self.stats.ticks += 1;
        advance_to(&mut self.world.fleet, now);
        for h in process_handoffs(&mut self.world.fleet, &self.world.towers) {
            self.schedule(
                now,
                EventKind::Handoff {
                    aircraft: h.aircraft,
                    from: h.from,
                    to: h.to,
                },
            )?;
        }
        if self.strategy.is_direct() && self.world.comm.comm_range.is_some() {
            for i in 0..self.tracking.len() {
                let plan = check_new_aircraft(&self.tracking[i], &self.world, &self.strategy, now)?;
                self.apply(plan)?;
            }
        }
        for i in 0..self.world.fleet.len() {
            self.schedule(
                now,
                EventKind::SensorSample {
                    aircraft: AircraftId(i as u32),
                },
            )?;
        }
        let next = (index + 1) as f64 * self.tick;
        if next <= self.horizon {
            self.schedule(next, EventKind::KinematicsTick { index: index + 1 })?;
        }
        Ok(())
    }

    fn on_sensor(&mut self, aircraft: AircraftId, now: f64) -> Result<(), EngineError> {
        let World { fleet, regions, .. } = &mut self.world;
        let active = regions.iter().filter(|r| r.is_active(now)).map(|r| &r.region);
        let Some(alert) = sensor_tick(&mut fleet[aircraft.index()], active, now, &mut self.ids) else {
            return Ok(());
        };
        self.stats.alerts += 1;
        self.metrics.register_alert(&alert);
        let plan = handle_detection(&alert, &self.world, &self.strategy, now)?;
        self.alerts.push(alert);
        self.apply(plan)
    }

    fn on_tower_receive(
        &mut self,
        alert_id: AlertId,
        tower: TowerId,
        from: Option<TowerId>,
        hops: u32,
        now: f64,
    ) -> Result<(), EngineError> {
        let counters = &mut self.stats.towers[tower.index()];
        counters.receipts += 1;
        if !self.towers_rt[tower.index()].seen.insert(alert_id) {
            counters.duplicates += 1;
            return Ok(());
        }
        self.metrics.tower_stage_mut(alert_id, tower).received_at = now;
        if let Strategy::MultiAtcRelay { inter_tower_processing } = self.strategy {
            let links: Vec<_> = self
                .world
                .tower(tower)
                .links
                .iter()
                .copied()
                .filter(|l| Some(*l) != from)
                .collect();
            for to in links {
                self.schedule(
                    now + inter_tower_processing,
                    EventKind::TowerForward {
                        alert_id,
                        from: tower,
                        to,
                        hops,
                    },
                )?;
            }
        }
        let list_time = self.world.tower(tower).list_creation_time;
        self.schedule(now + list_time, EventKind::ListReady { alert_id, tower, hops })
    }

    fn on_list_ready(&mut self, alert_id: AlertId, tower: TowerId, hops: u32, now: f64) -> Result<(), EngineError> {
        let alert = &self.alerts[alert_id.0 as usize];
        let comm = &self.world.comm;
        let filter = if self.strategy.is_single_tower() {
            TargetFilter {
                membership: ListMembership::Coverage,
                hazard_radius: comm.indirect_path_filter.then_some(comm.hazard_radius),
            }
        } else {
            TargetFilter {
                membership: ListMembership::Connected,
                hazard_radius: Some(comm.hazard_radius),
            }
        };
        let targets = create_list_atc(&self.world, tower, alert, filter, now);
        self.metrics.note_targets(alert_id, targets.iter().copied());
        let stage = self.metrics.tower_stage_mut(alert_id, tower);
        stage.list_ready_at = Some(now);
        stage.n_targets = targets.len();

        let t = self.world.tower(tower);
        match t.mode {
            TowerMode::AlwaysOpen => self.dispatch_downlinks(alert_id, tower, &targets, hops, now),
            TowerMode::Interval => {
                let tick_at = now + interval_wait(now, t.broadcast_period);
                let rt = &mut self.towers_rt[tower.index()];
                rt.pending.push(PendingBroadcast {
                    alert_id,
                    targets,
                    hops,
                    ready_at: now,
                });
                if !rt.tick_scheduled {
                    rt.tick_scheduled = true;
                    self.schedule(tick_at, EventKind::BroadcastTick { tower })?;
                }
                Ok(())
            }
            TowerMode::PriorityQueue => {
                self.world.towers[tower.index()].queue.push(
                    0,
                    now,
                    QueuedPayload::Alert {
                        alert_id,
                        targets,
                        hops,
                    },
                );
                self.start_service(tower, now)
            }
        }
    }

    /// Begin serving the head of the tower queue if the server is idle.
    fn start_service(&mut self, tower: TowerId, now: f64) -> Result<(), EngineError> {
        if self.towers_rt[tower.index()].in_service.is_some() {
            return Ok(());
        }
        let t = &mut self.world.towers[tower.index()];
        let Some(msg) = t.queue.pop() else {
            return Ok(());
        };
        let done = now + t.service_time;
        self.towers_rt[tower.index()].in_service = Some(msg);
        self.schedule(done, EventKind::QueueService { tower })
    }

    fn dispatch_downlinks(
        &mut self,
        alert_id: AlertId,
        tower: TowerId,
        targets: &[AircraftId],
        hops: u32,
        now: f64,
    ) -> Result<(), EngineError> {
        self.metrics.tower_stage_mut(alert_id, tower).dispatched_at = Some(now);
        for &target in targets {
            self.schedule(
                now,
                EventKind::Downlink {
                    alert_id,
                    tower,
                    target,
                    hops,
                },
            )?;
        }
        Ok(())
    }

    fn on_delivery(&mut self, alert_id: AlertId, target: AircraftId, hops: u32, now: f64) -> Result<(), EngineError> {
        let alert = &self.alerts[alert_id.0 as usize];
        if target == alert.origin {
            return Ok(());
        }
        let record = DeliveryRecord {
            alert_id,
            target,
            detection_time: alert.detected_at,
            delivery_time: now,
            hops,
        };
        if !self.world.fleet[target.index()].received.insert(alert_id) {
            self.stats.suppressed_deliveries += 1;
            return Ok(());
        }
        self.stats.deliveries += 1;
        self.metrics.record_delivery(record)?;
        Ok(())
    }

    fn on_spawn(&mut self, now: f64) -> Result<(), EngineError> {
        let Some(spawn) = self.spawn else {
            return Ok(());
        };
        let rng = &mut self.spawn_rng;
        let pick = rng.random_range(0..self.world.fleet.len());
        let (dx, dy) = if spawn.scatter > 0.0 {
            (
                rng.random_range(-spawn.scatter..=spawn.scatter),
                rng.random_range(-spawn.scatter..=spawn.scatter),
            )
        } else {
            (0.0, 0.0)
        };
        let center = self.world.fleet[pick].position_at(now) + Vec3::new(dx, dy, 0.0);
        self.world.regions.push(ActiveRegion {
            region: CatRegion {
                center,
                radius: spawn.radius,
                intensity: spawn.intensity,
            },
            from: now,
            until: spawn.lifetime.map(|l| now + l),
        });
        let next = now + Exp::new(spawn.rate).expect("positive rate").sample(rng);
        if next <= self.horizon {
            self.schedule(next, EventKind::RegionSpawn)?;
        }
        Ok(())
    }

    fn set_aircraft_channel(&mut self, a: AircraftId, b: AircraftId, state: ChannelState) {
        self.world.fleet[a.index()].channels.insert(b, state);
        self.world.fleet[b.index()].channels.insert(a, state);
    }

    fn apply(&mut self, plan: Plan) -> Result<(), EngineError> {
        for effect in plan.effects {
            match effect {
                Effect::StoreAlert { aircraft, alert } => {
                    let buf = &mut self.world.fleet[aircraft.index()].stored_alerts;
                    if !buf.iter().any(|a| a.alert_id == alert.alert_id) {
                        buf.push(alert);
                    }
                }
                Effect::ReleaseStored { aircraft, alert_id } => {
                    self.world.fleet[aircraft.index()]
                        .stored_alerts
                        .retain(|a| a.alert_id != alert_id);
                }
                Effect::SetAircraftChannel { a, b, state } => self.set_aircraft_channel(a, b, state),
                Effect::SetTowerChannel { aircraft, tower, state } => {
                    self.world.towers[tower.index()]
                        .aircraft_channels
                        .insert(aircraft, state);
                }
                Effect::NoteTargets { alert_id, targets } => self.metrics.note_targets(alert_id, targets),
                Effect::TrackDirect { alert_id, origin, sent } => {
                    match self.tracking.iter_mut().find(|t| t.alert_id == alert_id) {
                        Some(t) => t.sent.extend(sent),
                        None => self.tracking.push(DirectTracking { alert_id, origin, sent }),
                    }
                }
            }
        }
        for (time, kind) in plan.events {
            self.schedule(time, kind)?;
        }
        Ok(())
    }
}
