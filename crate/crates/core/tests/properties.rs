mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use catsim::config::ScenarioConfig;
use catsim::dissemination::Strategy;
use catsim::model::distance;

use common::C;

fn strategy() -> impl proptest::strategy::Strategy<Value = Strategy> {
    prop::sample::select(Strategy::all_defaults().to_vec())
}

fn indirect() -> impl proptest::strategy::Strategy<Value = Strategy> {
    prop::sample::select(
        Strategy::all_defaults()
            .into_iter()
            .filter(|s| !s.is_direct())
            .collect::<Vec<_>>(),
    )
}

fn small(strategy: Strategy, seed: u64, fleet: usize, towers: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(strategy);
    cfg.world.seed = seed;
    cfg.world.fleet_size = fleet;
    cfg.world.duration = 120.0;
    cfg.regions.spawn.as_mut().unwrap().rate = 0.1;
    if towers > 1 {
        let side = cfg.world.area_side;
        cfg.towers = Some(
            (0..towers)
                .map(|i| catsim::config::TowerConfig {
                    pos: catsim::model::Vec3::new(side * i as f64 / (towers - 1) as f64, side / 2.0, 0.0),
                    coverage_radius: side * 0.6,
                    links: if i + 1 < towers { vec![i as u32 + 1] } else { vec![] },
                })
                .collect(),
        );
    }
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_respect_causality_light_and_uniqueness(
        s in strategy(), seed in 0u64..1000, fleet in 2usize..12, towers in 1usize..4,
    ) {
        let cfg = small(s, seed, fleet, towers);
        let mut sim = cfg.build().unwrap().with_trace();
        sim.run(cfg.world.duration).unwrap();

        let mut time_of = BTreeMap::new();
        for e in sim.trace().unwrap() {
            if let Some(c) = e.cause {
                prop_assert!(time_of[&c] <= e.time);
            }
            time_of.insert(e.seq, e.time);
        }

        let fleet = &sim.world().fleet;
        let mut seen = BTreeSet::new();
        for d in sim.metrics().deliveries() {
            prop_assert!(seen.insert((d.alert_id, d.target)));
            let a = sim.metrics().alert(d.alert_id).unwrap();
            prop_assert_ne!(a.origin, d.target);
            let gap = distance(fleet[a.origin.index()].position_at(a.detected_at), fleet[d.target.index()].position_at(d.delivery_time));
            prop_assert!(d.origin_diff() >= gap / C - 1e-12);
        }
        prop_assert_eq!(sim.stats().deliveries as usize, seen.len());
    }

    #[test]
    fn indirect_never_beats_broadcast(seed in 0u64..1000, fleet in 2usize..10, s in indirect()) {
        let lat = |s: Strategy| {
            let cfg = small(s, seed, fleet, 1);
            let mut sim = cfg.build().unwrap();
            sim.run(cfg.world.duration).unwrap();
            common::latencies(&sim)
        };
        let base = lat(Strategy::DirectBroadcast);
        for (key, l) in lat(s) {
            if let Some(b) = base.get(&key) {
                prop_assert!(l >= b - 1e-12, "{key:?}: {l} < {b}");
            }
        }
    }
}
