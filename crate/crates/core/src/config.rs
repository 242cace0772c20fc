//! Scenario files: parsing, validation, defaults, and single-run execution.
//!
//! A scenario is a JSON object. Only `strategy` is required:
//!
//! ```json
//! { "strategy": { "kind": "indirect_interval", "period": 50 } }
//! ```
//!
//! Unknown keys are errors. A `run_meta.json` written by a previous run is
//! also accepted; its `resolved_config` is loaded.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dissemination::{CommParams, Strategy, World};
use crate::engine::{stream_rng, EngineError, RunStats, SimSetup, Simulation, SpawnParams, STREAM_FLEET};
use crate::kinematics::{initialize_fleet, KinematicsError, WorldConfig};
use crate::metrics::{MetricsError, Summary};
use crate::model::{ActiveRegion, AtcTower, CatRegion, Position3, TowerId, Vec3};
use crate::sensor::SensorParams;

pub const ARTIFACT: &str = "catsim";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}:{line}:{column}: {key}: {msg}")]
    Parse {
        origin: String,
        key: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{origin}{}: {key}: {msg}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Invalid {
        origin: String,
        key: String,
        line: Option<usize>,
        msg: String,
    },
    #[error("bad override `{arg}`: {msg}")]
    Override { arg: String, msg: String },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerConfig {
    pub pos: Position3,
    pub coverage_radius: f64,
    /// Ids (list indices) of towers this one exchanges alerts with.
    #[serde(default)]
    pub links: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(rename = "static", default)]
    pub static_regions: Vec<CatRegion>,
    #[serde(default)]
    pub spawn: Option<SpawnParams>,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            static_regions: Vec::new(),
            spawn: Some(SpawnParams::default()),
        }
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn non_negative(v: f64) -> bool {
    v >= 0.0 && v.is_finite()
}

fn default_bucket_width() -> f64 {
    10.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub world: WorldConfig,
    /// Defaults to one tower at the center of the start area whose coverage
    /// spans the whole horizon.
    #[serde(default)]
    pub towers: Option<Vec<TowerConfig>>,
    #[serde(default)]
    pub regions: RegionConfig,
    pub strategy: Strategy,
    #[serde(default)]
    pub sensor: SensorParams,
    #[serde(default)]
    pub comm: CommParams,
    #[serde(default = "default_bucket_width")]
    pub bucket_width: f64,
    /// Let in-flight messages land after the horizon.
    #[serde(default = "default_true")]
    pub drain: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(strategy: Strategy) -> Self {
        let mut cfg: ScenarioConfig =
            serde_json::from_value(json!({ "strategy": strategy })).expect("defaults deserialize");
        cfg.resolve();
        cfg
    }

    /// Label used in reports and output paths.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.strategy.label().to_string())
    }

    /// Fill every defaulted optional so the config echoes in full.
    pub fn resolve(&mut self) {
        if self.towers.is_none() {
            let c = self.world.area_side / 2.0;
            let reach = self.world.area_side + self.world.aircraft_speed * self.world.duration;
            self.towers = Some(vec![TowerConfig {
                pos: Vec3::new(c, c, 0.0),
                coverage_radius: reach * 1.5,
                links: vec![],
            }]);
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(PathBuf::from("out"));
        }
    }

    pub fn towers(&self) -> &[TowerConfig] {
        self.towers.as_deref().unwrap_or(&[])
    }

    /// Constraint checks beyond what the schema enforces; errors carry the
    /// offending key path.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let bad = |key: &str, msg: String| Err((key.to_string(), msg));
        if let Err(e) = self.world.validate() {
            let key = match &e {
                KinematicsError::FleetTooSmall(_) => "world.fleet_size".to_string(),
                KinematicsError::NonPositive { field, .. } => format!("world.{field}"),
                KinematicsError::BadAltitudeBand(..) => "world.altitude_band".to_string(),
            };
            return bad(&key, e.to_string());
        }
        if let Err(e) = self.strategy.validate() {
            return bad("strategy", e.to_string());
        }
        let towers = self.towers();
        if self.strategy.needs_towers() && towers.is_empty() {
            return bad(
                "towers",
                format!("strategy {} needs at least one tower", self.strategy.label()),
            );
        }
        for (i, t) in towers.iter().enumerate() {
            if !t.pos.is_finite() || t.pos.z != 0.0 {
                return bad(
                    &format!("towers[{i}].pos"),
                    "tower position must be finite with z = 0".into(),
                );
            }
            if !positive(t.coverage_radius) {
                return bad(&format!("towers[{i}].coverage_radius"), "must be positive".into());
            }
            for &l in &t.links {
                if l as usize >= towers.len() || l as usize == i {
                    return bad(&format!("towers[{i}].links"), format!("link {l} is not another tower"));
                }
            }
        }
        for (i, r) in self.regions.static_regions.iter().enumerate() {
            if !positive(r.radius) || !non_negative(r.intensity) || !r.center.is_finite() || r.center.z < 0.0 {
                return bad(
                    &format!("regions.static[{i}]"),
                    "need radius > 0, intensity >= 0, finite center with z >= 0".into(),
                );
            }
        }
        if let Some(s) = &self.regions.spawn {
            if !non_negative(s.rate) {
                return bad("regions.spawn.rate", "must be non-negative".into());
            }
            if !positive(s.radius) || !non_negative(s.intensity) || !non_negative(s.scatter) {
                return bad("regions.spawn", "need radius > 0, intensity >= 0, scatter >= 0".into());
            }
            if s.lifetime.is_some_and(|l| !positive(l)) {
                return bad("regions.spawn.lifetime", "must be positive".into());
            }
        }
        let sp = &self.sensor;
        if !positive(sp.threshold) {
            return bad("sensor.threshold", "must be positive".into());
        }
        if !(positive(sp.ema_alpha) && sp.ema_alpha <= 1.0) {
            return bad("sensor.ema_alpha", "must lie in (0, 1]".into());
        }
        if sp.window == Some(0) {
            return bad("sensor.window", "must be at least 1".into());
        }
        let c = &self.comm;
        if !positive(c.signal_speed) {
            return bad("comm.signal_speed", "must be positive".into());
        }
        if c.comm_range.is_some_and(|r| !positive(r)) {
            return bad("comm.comm_range", "must be positive".into());
        }
        for (key, v) in [
            ("comm.list_creation_time", c.list_creation_time),
            ("comm.atc_channel_estd", c.atc_channel_estd),
            ("comm.hazard_radius", c.hazard_radius),
            ("comm.background_rate", c.background_rate),
        ] {
            if !non_negative(v) {
                return bad(key, "must be non-negative".into());
            }
        }
        if !positive(self.bucket_width) {
            return bad("bucket_width", "must be positive".into());
        }
        Ok(())
    }

    /// Fresh simulation for this scenario.
    pub fn build(&self) -> Result<Simulation, RunError> {
        let seed = self.world.seed;
        let fleet = initialize_fleet(&self.world, &self.sensor, &mut stream_rng(seed, STREAM_FLEET))?;
        let towers = self
            .towers()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut tower = AtcTower::new(TowerId(i as u32), t.pos, t.coverage_radius);
                tower.links = t.links.iter().map(|&l| TowerId(l)).collect();
                tower
            })
            .collect();
        let world = World {
            fleet,
            towers,
            regions: self
                .regions
                .static_regions
                .iter()
                .copied()
                .map(ActiveRegion::permanent)
                .collect(),
            comm: self.comm,
        };
        Ok(Simulation::new(SimSetup {
            world,
            strategy: self.strategy,
            tick: self.world.tick,
            drain: self.drain,
            spawn: self.regions.spawn,
            seed,
        })?)
    }
}

/// Result of one scenario run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub stats: RunStats,
    pub meta: Value,
}

/// Run `cfg` to its horizon; write the output files when `out` is given.
pub fn run_scenario(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<RunOutcome, RunError> {
    let mut sim = cfg.build()?;
    sim.run(cfg.world.duration)?;
    let summary = sim.metrics().summarize(cfg.bucket_width)?;
    let stats = sim.stats().clone();
    let meta = run_meta(cfg, &stats);
    if let Some(dir) = out {
        sim.metrics().export(&summary, dir, &meta)?;
    }
    Ok(RunOutcome { summary, stats, meta })
}

pub fn run_meta(cfg: &ScenarioConfig, stats: &RunStats) -> Value {
    json!({
        "artifact": ARTIFACT,
        "version": env!("CARGO_PKG_VERSION"),
        "label": cfg.label(),
        "strategy": cfg.strategy.label(),
        "seed": cfg.world.seed,
        "counts": {
            "alerts": stats.alerts,
            "deliveries": stats.deliveries,
            "suppressed_deliveries": stats.suppressed_deliveries,
            "handoffs": stats.handoffs,
            "events_dispatched": stats.events_dispatched,
        },
        "resolved_config": cfg,
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    load_config_with(path, &[])
}

/// Load, apply `key.path=value` overrides, resolve defaults and validate.
pub fn load_config_with(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string(), overrides)
}

pub fn parse_config(text: &str, origin: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let echoed;
    let mut text = text;
    if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(text) {
        if map.get("artifact").and_then(Value::as_str) == Some(ARTIFACT) {
            if let Some(inner) = map.get("resolved_config") {
                echoed = serde_json::to_string_pretty(inner).expect("value serializes");
                text = &echoed;
            }
        }
    }

    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        ConfigError::Parse {
            origin: origin.to_string(),
            key: path_or_root(e.path().to_string()),
            line: inner.line(),
            column: inner.column(),
            msg: inner.to_string(),
        }
    })?;

    if !overrides.is_empty() {
        let mut value = serde_json::to_value(&cfg).expect("config serializes");
        for arg in overrides {
            apply_override(&mut value, arg)?;
        }
        cfg = serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Invalid {
            origin: "override".to_string(),
            key: path_or_root(e.path().to_string()),
            line: None,
            msg: e.inner().to_string(),
        })?;
    }

    cfg.resolve();
    cfg.validate().map_err(|(key, msg)| ConfigError::Invalid {
        origin: origin.to_string(),
        line: key_line(text, &key),
        key,
        msg,
    })?;
    Ok(cfg)
}

fn path_or_root(p: String) -> String {
    if p == "." {
        "<root>".to_string()
    } else {
        p
    }
}

/// Set `a.b[2].c=value` in a JSON tree. The value is parsed as JSON, falling
/// back to a plain string.
pub fn apply_override(root: &mut Value, arg: &str) -> Result<(), ConfigError> {
    let err = |msg: &str| ConfigError::Override {
        arg: arg.to_string(),
        msg: msg.to_string(),
    };
    let (path, raw) = arg.split_once('=').ok_or_else(|| err("expected key.path=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let (name, index) = match seg.split_once('[') {
            Some((n, rest)) => {
                let idx = rest
                    .strip_suffix(']')
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| err("bad index"))?;
                (n, Some(idx))
            }
            None => (*seg, None),
        };
        if name.is_empty() {
            return Err(err("empty key"));
        }
        let last = i + 1 == segments.len();
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        match index {
            None if last => {
                map.insert(name.to_string(), value);
                return Ok(());
            }
            None => node = map.entry(name).or_insert(Value::Null),
            Some(idx) => {
                let arr = map
                    .get_mut(name)
                    .and_then(Value::as_array_mut)
                    .ok_or_else(|| err("not an array"))?;
                let slot = arr.get_mut(idx).ok_or_else(|| err("index out of range"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                node = slot;
            }
        }
    }
    Ok(())
}

/// Best-effort line of `key` (a dotted path) in the source text.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let mut offset = 0;
    let mut found = None;
    for seg in key.split('.') {
        let name = seg.split('[').next().unwrap_or(seg);
        let needle = format!("\"{name}\"");
        let at = text[offset..].find(&needle)? + offset;
        found = Some(at);
        offset = at + needle.len();
    }
    found.map(|at| text[..at].lines().count().max(1))
}
