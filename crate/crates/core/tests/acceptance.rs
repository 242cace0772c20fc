//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic;
use std::path::Path;
use std::time::{Duration, Instant};

use catsim::config::{run_scenario, ScenarioConfig};
use catsim::dissemination::{atc_overhead, direct_latency, indirect_latency, Strategy};
use catsim::engine::EventKind;
use catsim::matrix::run_matrix;
use catsim::model::{distance, AircraftId, AlertId, CatRegion, Vec3};
use catsim::sensor::{sensor_tick, AlertIdGen, SensorParams, SensorState};

use common::*;

type Outcome = Result<String, String>;

/// Number, name, check, optional runtime limit.
type Criterion = (u8, &'static str, fn() -> Outcome, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

const TOL: f64 = 1e-12;

// 1 tower + 3 stationary aircraft; aircraft 0 loiters in turbulence and
// raises alerts at t = 0..6.
fn oracle_fixture() -> (Vec<Vec3>, Vec3) {
    (
        vec![
            Vec3::new(1e4, 0.0, 1e4),
            Vec3::new(-2e4, 3e4, 1.1e4),
            Vec3::new(4e4, -5e3, 9.5e3),
        ],
        Vec3::ZERO,
    )
}

fn criterion_1() -> Outcome {
    let (pos, tower_pos) = oracle_fixture();
    let list = 0.001;
    let estd_atc = 0.05;
    let mut checked = 0;
    for strategy in Strategy::all_defaults() {
        let world = static_world(
            &pos,
            vec![tower(0, tower_pos, 1e6, &[])],
            vec![region(pos[0], 1e3, 0.0, None)],
        );
        let sim = run(world, strategy, 10.0);
        let tw = &sim.world().towers[0];
        let got = latencies(&sim);
        ensure!(
            sim.alerts().len() == 7,
            "{}: expected 7 alerts, got {}",
            strategy.label(),
            sim.alerts().len()
        );

        let mut want: BTreeMap<(AlertId, AircraftId), f64> = BTreeMap::new();
        let mut queue_free = f64::NEG_INFINITY;
        for (k, alert) in sim.alerts().iter().enumerate() {
            let t = alert.detected_at;
            let first = k == 0;
            let up = distance(pos[0], tower_pos) / C;
            for target in [1usize, 2] {
                let (org, tar) = (pos[0], pos[target]);
                let l = match strategy {
                    Strategy::DirectBroadcast => direct_latency(org, tar, 0.0, C),
                    Strategy::DirectOpenConnections { per_target_overhead } => {
                        direct_latency(org, tar, per_target_overhead, C)
                    }
                    Strategy::DirectOnDemand { channel_estd_time } => {
                        direct_latency(org, tar, if first { channel_estd_time } else { 0.0 }, C)
                    }
                    Strategy::IndirectAlwaysOpen => {
                        indirect_latency(org, tw, tar, atc_overhead(0.0, 0.0, list).unwrap(), C).map(|mut b| {
                            b.total += if first { estd_atc } else { 0.0 };
                            b
                        })
                    }
                    Strategy::IndirectInterval { period } => {
                        let estd = if first { estd_atc } else { 0.0 };
                        let ready = t + estd + up + list;
                        let wait = period - ready % period;
                        indirect_latency(org, tw, tar, atc_overhead(wait, 0.0, list).unwrap(), C).map(|mut b| {
                            b.total += estd;
                            b
                        })
                    }
                    Strategy::IndirectPriority { service_time } => {
                        let estd = if first { estd_atc } else { 0.0 };
                        let ready = t + estd + up + list;
                        if target == 1 {
                            queue_free = queue_free.max(ready) + service_time;
                        }
                        let wait = queue_free - ready;
                        indirect_latency(org, tw, tar, atc_overhead(0.0, wait, list).unwrap(), C).map(|mut b| {
                            b.total += estd;
                            b
                        })
                    }
                    Strategy::MultiAtcRelay { .. } => {
                        indirect_latency(org, tw, tar, atc_overhead(0.0, 0.0, list).unwrap(), C)
                    }
                }
                .map_err(|e| e.to_string())?;
                want.insert((alert.alert_id, AircraftId(target as u32)), l.total);
            }
        }
        ensure!(
            got.keys().collect::<Vec<_>>() == want.keys().collect::<Vec<_>>(),
            "{}: delivered pairs differ from the oracle",
            strategy.label()
        );
        for (key, w) in &want {
            let g = got[key];
            ensure!(
                (g - w).abs() <= TOL,
                "{} {key:?}: engine {g:.15} vs oracle {w:.15}",
                strategy.label()
            );
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} per-target latencies across 7 strategies within {TOL:e} s"
    ))
}

fn criterion_2() -> Outcome {
    let period = 50.0;
    let mut alerts = 0;
    let mut deliveries = 0;
    for seed in 1..=3 {
        let mut cfg = ScenarioConfig::new(Strategy::IndirectInterval { period });
        cfg.world.fleet_size = 20;
        cfg.world.duration = 1000.0;
        cfg.world.seed = seed;
        let mut sim = cfg.build().map_err(|e| e.to_string())?.with_trace();
        sim.run(cfg.world.duration).map_err(|e| e.to_string())?;
        ensure!(
            sim.alerts().len() >= 20,
            "seed {seed}: only {} alerts",
            sim.alerts().len()
        );
        alerts += sim.alerts().len();

        let trace = sim.trace().unwrap();
        let mut uplink_sent = BTreeMap::new();
        let mut uplink = BTreeMap::new();
        let mut downlink_sent = BTreeMap::new();
        for e in trace {
            match e.kind {
                EventKind::Uplink { alert_id, .. } => {
                    uplink_sent.insert(alert_id, e.time);
                }
                EventKind::TowerReceive {
                    alert_id, from: None, ..
                } => {
                    uplink.insert(alert_id, e.time - uplink_sent[&alert_id]);
                }
                EventKind::Downlink { alert_id, target, .. } => {
                    downlink_sent.insert((alert_id, target), e.time);
                }
                _ => {}
            }
        }
        let list = cfg.comm.list_creation_time;
        for d in sim.metrics().deliveries() {
            let down = d.delivery_time - downlink_sent[&(d.alert_id, d.target)];
            let bound = period + uplink[&d.alert_id] + down + list;
            ensure!(
                d.origin_diff() <= bound + TOL,
                "seed {seed} {d:?}: {} > bound {bound}",
                d.origin_diff()
            );
            deliveries += 1;
        }
        for ((alert, _), stage) in sim.metrics().tower_stages() {
            let arrival = stage.list_ready_at.unwrap();
            let want = period - arrival % period;
            let got = stage
                .interval_wait
                .ok_or_else(|| format!("alert {alert:?} never broadcast"))?;
            ensure!((got - want).abs() <= TOL, "alert {alert:?}: wait {got} vs {want}");
        }
    }
    Ok(format!(
        "{alerts} alerts, {deliveries} deliveries within bound; phase law exact"
    ))
}

/// Populated buckets of a run: start time, mean max-origin diff, alert count.
#[derive(Default)]
struct Series {
    t: Vec<f64>,
    y: Vec<f64>,
    n: Vec<f64>,
}

fn series_points(cfg: &ScenarioConfig) -> Result<Series, String> {
    let out = run_scenario(cfg, None).map_err(|e| e.to_string())?;
    let mut s = Series::default();
    for p in &out.summary.series {
        if let Some(m) = p.mean_max_origin_diff {
            s.t.push(p.bucket_start);
            s.y.push(m);
            s.n.push(p.n_alerts as f64);
        }
    }
    Ok(s)
}

fn criterion_3() -> Outcome {
    let seeds = 30;
    let (mut all_t, mut all_y) = (Vec::new(), Vec::new());
    let mut positive = 0;
    for seed in 1..=seeds {
        let mut cfg = ScenarioConfig::new(Strategy::DirectBroadcast);
        cfg.world.seed = seed;
        let Series { t, y, .. } = series_points(&cfg)?;
        ensure!(t.len() >= 3, "seed {seed}: only {} populated buckets", t.len());
        if ols_slope(&t, &y) > 0.0 {
            positive += 1;
        }
        all_t.extend(t);
        all_y.extend(y);
    }
    let pooled = ols_slope(&all_t, &all_y);
    let frac = positive as f64 / seeds as f64;
    ensure!(pooled > 0.0, "pooled slope {pooled:e} not positive");
    ensure!(frac >= 0.9, "only {positive}/{seeds} seeds have positive slope");
    Ok(format!(
        "pooled slope {pooled:.3e} s/s, positive in {positive}/{seeds} seeds"
    ))
}

fn criterion_4() -> Outcome {
    let pos = [
        Vec3::new(0.0, 0.0, 1e4),
        Vec3::new(1e4, 0.0, 1e4),
        Vec3::new(0.0, 3e5, 1.1e4),
        Vec3::new(-7e5, 7e5, 1e4),
        Vec3::new(1e6, 0.0, 9e3),
    ];
    let world = static_world(&pos, vec![], vec![region(pos[0], 1e3, 0.0, None)]);
    let sim = run(
        world,
        Strategy::DirectOnDemand {
            channel_estd_time: 0.05,
        },
        10.0,
    );
    let d: Vec<f64> = pos[1..].iter().map(|p| distance(pos[0], *p)).collect();
    let (dmin, dmax) = (
        d.iter().copied().fold(f64::INFINITY, f64::min),
        d.iter().copied().fold(0.0, f64::max),
    );
    let want = (dmax - dmin) / C;
    let mut per_alert: BTreeMap<AlertId, Vec<f64>> = BTreeMap::new();
    for r in sim.metrics().deliveries() {
        per_alert.entry(r.alert_id).or_default().push(r.origin_diff());
    }
    ensure!(per_alert.len() == 7, "expected 7 alerts, got {}", per_alert.len());
    for (id, v) in &per_alert {
        ensure!(v.len() == 4, "alert {id:?}: {} deliveries", v.len());
        let spread = v.iter().copied().fold(0.0, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min);
        ensure!(
            (spread - want).abs() <= TOL,
            "alert {id:?}: spread {spread:.15} vs {want:.15}"
        );
    }
    ensure!((1e-3..1e-2).contains(&want), "spread {want} s is not low-millisecond");
    Ok(format!(
        "spread {want:.6} s for a {:.0} km gap, exact for all alerts",
        (dmax - dmin) / 1e3
    ))
}

// Short service time: queues build only while several aircraft report at
// once. Longer services keep a backlog across buckets and blur the signal.
fn criterion_5() -> Outcome {
    let seeds = 30;
    let mut rhos = Vec::new();
    for seed in 1..=seeds {
        let mut cfg = ScenarioConfig::new(Strategy::IndirectPriority {
            service_time: PRIORITY_SERVICE_TIME,
        });
        cfg.world.seed = seed;
        cfg.world.duration = 1000.0;
        let Series { y, n, .. } = series_points(&cfg)?;
        if let Some(r) = spearman(&n, &y) {
            rhos.push(r);
        }
    }
    ensure!(
        rhos.len() * 10 >= seeds as usize * 9,
        "spearman defined for only {}/{seeds} seeds",
        rhos.len()
    );
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    ensure!(mean > 0.5, "mean spearman {mean:.3} over {} seeds", rhos.len());
    Ok(format!(
        "mean spearman {mean:.3} over {} seeds (service time {PRIORITY_SERVICE_TIME} s)",
        rhos.len()
    ))
}

const PRIORITY_SERVICE_TIME: f64 = 0.4;

fn criterion_6() -> Outcome {
    let configs: Vec<ScenarioConfig> = Strategy::all_defaults().into_iter().map(ScenarioConfig::new).collect();
    let seeds: Vec<u64> = (1..=10).collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let outcome = run_matrix(&configs, &seeds, dir.path(), 4).map_err(|e| e.to_string())?;
    ensure!(outcome.failures().count() == 0, "matrix had failing runs");
    let first = &outcome.report[0];
    ensure!(first.strategy == "direct_broadcast", "rank 1 is {}", first.strategy);

    let mut compared = 0;
    for seed in 1..=5 {
        let base = {
            let mut c = ScenarioConfig::new(Strategy::DirectBroadcast);
            c.world.seed = seed;
            let mut sim = c.build().map_err(|e| e.to_string())?;
            sim.run(c.world.duration).map_err(|e| e.to_string())?;
            latencies(&sim)
        };
        for s in Strategy::all_defaults().into_iter().filter(|s| !s.is_direct()) {
            let mut c = ScenarioConfig::new(s);
            c.world.seed = seed;
            let mut sim = c.build().map_err(|e| e.to_string())?;
            sim.run(c.world.duration).map_err(|e| e.to_string())?;
            for (key, l) in latencies(&sim) {
                if let Some(b) = base.get(&key) {
                    ensure!(l >= b - TOL, "{} seed {seed} {key:?}: {l} < direct {b}", s.label());
                    compared += 1;
                }
            }
        }
    }
    ensure!(compared > 0, "no overlapping deliveries to compare");
    let order: Vec<&str> = outcome.report.iter().map(|r| r.strategy.as_str()).collect();
    Ok(format!(
        "ranking {}; {compared} per-target pairs dominated",
        order.join(" < ")
    ))
}

fn read_outputs(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        files.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).map_err(|e| e.to_string())?,
        );
    }
    Ok(files)
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for s in Strategy::all_defaults() {
        let mut cfg = ScenarioConfig::new(s);
        cfg.world.seed = 77;
        let (a, b) = (
            dir.path().join(format!("{}-a", s.label())),
            dir.path().join(format!("{}-b", s.label())),
        );
        run_scenario(&cfg, Some(&a)).map_err(|e| e.to_string())?;
        run_scenario(&cfg, Some(&b)).map_err(|e| e.to_string())?;
        let (fa, fb) = (read_outputs(&a)?, read_outputs(&b)?);
        ensure!(fa.len() >= 4, "{}: missing outputs", s.label());
        ensure!(fa == fb, "{}: outputs differ between identical runs", s.label());
        compared += fa.len();
    }

    let towers = vec![
        tower(0, Vec3::new(0.0, 0.0, 0.0), 1.1e5, &[1, 2]),
        tower(1, Vec3::new(2e5, 0.0, 0.0), 1.1e5, &[0, 2]),
        tower(2, Vec3::new(1e5, 1.7e5, 0.0), 1.1e5, &[0, 1]),
    ];
    let pos = [
        Vec3::new(1e4, 0.0, 1e4),
        Vec3::new(-2e4, 2e4, 1e4),
        Vec3::new(2.1e5, 1e4, 1e4),
        Vec3::new(1e5, 1.8e5, 1e4),
    ];
    let mut world = static_world(&pos, towers, vec![region(pos[0], 1e3, 0.0, None)]);
    world.comm.hazard_radius = 1e6;
    let sim = run(
        world,
        Strategy::MultiAtcRelay {
            inter_tower_processing: 0.01,
        },
        10.0,
    );
    let mut seen = BTreeSet::new();
    for d in sim.metrics().deliveries() {
        ensure!(
            seen.insert((d.alert_id, d.target)),
            "duplicate delivery of {:?} to {:?}",
            d.alert_id,
            d.target
        );
    }
    let dups: u64 = sim.stats().towers.iter().map(|t| t.duplicates).sum();
    ensure!(
        seen.len() == sim.alerts().len() * 3,
        "{} deliveries for {} alerts",
        seen.len(),
        sim.alerts().len()
    );
    ensure!(dups > 0, "triangle flood produced no duplicate receipts");
    Ok(format!(
        "{compared} output files byte-identical; triangle: {} unique deliveries, {dups} tower duplicates dropped",
        seen.len()
    ))
}

fn criterion_8() -> Outcome {
    let params = SensorParams::default();
    let run_sensor = |intensity: f64, inside: bool, ticks: usize| {
        let mut ac = aircraft(0, Vec3::new(0.0, 0.0, 1e4), Vec3::ZERO);
        ac.sensor = SensorState::new(&params);
        let center = if inside { ac.pos } else { Vec3::new(1e6, 0.0, 1e4) };
        let r = CatRegion {
            center,
            radius: 1e3,
            intensity,
        };
        let mut ids = AlertIdGen::default();
        (0..ticks)
            .filter_map(|t| sensor_tick(&mut ac, [&r], t as f64, &mut ids))
            .map(|a| a.detected_at)
            .collect::<Vec<_>>()
    };
    let boundary = run_sensor(params.threshold, true, 1);
    ensure!(boundary == [0.0], "delta == threshold did not alert");
    let below = run_sensor(params.threshold - 1e-9, true, 1);
    ensure!(below.is_empty(), "delta below threshold alerted");
    let outside = run_sensor(10.0, false, 1000);
    ensure!(
        outside.is_empty(),
        "never-in-region aircraft alerted {} times",
        outside.len()
    );
    let loiter = run_sensor(10.0, true, 1000);
    ensure!(
        !loiter.is_empty() && loiter.len() < 20,
        "loiter raised {} alerts",
        loiter.len()
    );
    let last = *loiter.last().unwrap();
    ensure!(
        loiter.iter().enumerate().all(|(i, t)| *t == i as f64),
        "loiter alerts not consecutive: {loiter:?}"
    );
    Ok(format!(
        "boundary alerts; outside silent; loiter quenched after {} alerts (last at t={last})",
        loiter.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (
            1,
            "closed-form oracle equivalence",
            criterion_1,
            Some(Duration::from_secs(1)),
        ),
        (
            2,
            "interval bound and phase law",
            criterion_2,
            Some(Duration::from_secs(10)),
        ),
        (3, "max-origin growth trend", criterion_3, Some(Duration::from_secs(60))),
        (4, "on-demand spread", criterion_4, None),
        (5, "priority density correlation", criterion_5, None),
        (6, "strategy ranking and dominance", criterion_6, None),
        (7, "determinism and flood dedup", criterion_7, None),
        (8, "detection semantics", criterion_8, None),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, f, limit) in criteria {
        let start = Instant::now();
        let mut result = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        if let (Ok(_), Some(limit)) = (&result, limit) {
            if took > limit {
                result = Err(format!("took {took:.2?}, limit {limit:?}"));
            }
        }
        match result {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail} [{took:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {detail} [{took:.2?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
