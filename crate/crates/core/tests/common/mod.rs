#![allow(dead_code)]

use std::collections::BTreeMap;

use catsim::dissemination::{CommParams, Strategy, World};
use catsim::engine::{Event, EventKind, SimSetup, Simulation};
use catsim::metrics::DeliveryRecord;
use catsim::model::{ActiveRegion, Aircraft, AircraftId, AlertId, AtcTower, CatRegion, TowerId, Vec3};
use catsim::sensor::{SensorParams, SensorState};

pub const C: f64 = catsim::model::SPEED_OF_LIGHT;

pub fn aircraft(id: u32, pos: Vec3, vel: Vec3) -> Aircraft {
    Aircraft::new(AircraftId(id), pos, vel, SensorState::new(&SensorParams::default()))
}

pub fn tower(id: u32, pos: Vec3, radius: f64, links: &[u32]) -> AtcTower {
    let mut t = AtcTower::new(TowerId(id), pos, radius);
    t.links = links.iter().map(|&l| TowerId(l)).collect();
    t
}

/// Region around `center` active during `[from, until)`.
pub fn region(center: Vec3, radius: f64, from: f64, until: Option<f64>) -> ActiveRegion {
    ActiveRegion {
        region: CatRegion {
            center,
            radius,
            intensity: 10.0,
        },
        from,
        until,
    }
}

/// Stationary fleet at `positions`.
pub fn static_world(positions: &[Vec3], towers: Vec<AtcTower>, regions: Vec<ActiveRegion>) -> World {
    World {
        fleet: positions
            .iter()
            .enumerate()
            .map(|(i, &p)| aircraft(i as u32, p, Vec3::ZERO))
            .collect(),
        towers,
        regions,
        comm: CommParams::default(),
    }
}

pub fn simulation(world: World, strategy: Strategy) -> Simulation {
    Simulation::new(SimSetup {
        world,
        strategy,
        tick: 1.0,
        drain: true,
        spawn: None,
        seed: 0,
    })
    .expect("valid setup")
    .with_trace()
}

pub fn run(world: World, strategy: Strategy, duration: f64) -> Simulation {
    let mut sim = simulation(world, strategy);
    sim.run(duration).expect("run succeeds");
    sim
}

/// Delivery latency keyed by (alert, target).
pub fn latencies(sim: &Simulation) -> BTreeMap<(AlertId, AircraftId), f64> {
    sim.metrics()
        .deliveries()
        .iter()
        .map(|d: &DeliveryRecord| ((d.alert_id, d.target), d.origin_diff()))
        .collect()
}

pub fn events<'a>(sim: &'a Simulation, pred: impl Fn(&EventKind) -> bool + 'a) -> impl Iterator<Item = &'a Event> + 'a {
    sim.trace()
        .expect("trace enabled")
        .iter()
        .filter(move |e| pred(&e.kind))
}

pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: got {actual:.15}, expected {expected:.15}"
    );
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either side is constant or there are fewer than three points.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 3 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Ordinary least-squares slope.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}
