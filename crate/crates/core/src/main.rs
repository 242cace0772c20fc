use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use catsim::config::{load_config_with, run_scenario};
use catsim::dissemination::{direct_latency, indirect_latency};
use catsim::matrix::run_matrix;
use catsim::metrics::fmt_seconds;
use catsim::model::{AtcTower, TowerId, Vec3, SPEED_OF_LIGHT};

#[derive(Parser)]
#[command(name = "catsim", version, about = "Turbulence alert dissemination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV/JSON outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a config value, e.g. `--set world.fleet_size=40`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run every matching config under every seed and rank the strategies.
    Matrix {
        /// Glob for scenario files, e.g. `scenarios/*.json`.
        #[arg(long)]
        configs: String,
        /// Comma list and/or inclusive ranges: `1,2,5..9`.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value = "out/matrix")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Closed-form latency for a static origin/target pair.
    Oracle {
        /// Origin position `x,y,z` in meters.
        #[arg(long, value_parser = parse_vec3)]
        org: Vec3,
        #[arg(long, value_parser = parse_vec3)]
        tar: Vec3,
        /// Relay through a tower at `x,y,z`; omit for a direct link.
        #[arg(long, value_parser = parse_vec3)]
        tower: Option<Vec3>,
        /// Tower overhead in seconds.
        #[arg(long, default_value_t = 0.0)]
        overhead: f64,
        /// Channel establishment time for a direct link.
        #[arg(long, default_value_t = 0.0)]
        channel_estd: f64,
        #[arg(long, default_value_t = SPEED_OF_LIGHT)]
        speed: f64,
    },
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
                if a > b {
                    bail!("empty seed range {part}");
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed {part:?}"))?),
        }
    }
    if seeds.is_empty() {
        bail!("no seeds in {s:?}");
    }
    Ok(seeds)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            mut overrides,
        } => {
            if let Some(seed) = seed {
                overrides.push(format!("world.seed={seed}"));
            }
            let cfg = load_config_with(&config, &overrides)?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let outcome = run_scenario(&cfg, Some(&dir))?;
            let s = &outcome.stats;
            println!(
                "{}: seed {} alerts {} deliveries {} suppressed {} -> {}",
                cfg.label(),
                cfg.world.seed,
                s.alerts,
                s.deliveries,
                s.suppressed_deliveries,
                dir.display()
            );
        }
        Command::Matrix {
            configs,
            seeds,
            out,
            workers,
            overrides,
        } => {
            let seeds = parse_seeds(&seeds)?;
            let mut paths: Vec<PathBuf> = glob::glob(&configs)
                .with_context(|| format!("bad glob {configs:?}"))?
                .collect::<Result<_, _>>()?;
            paths.sort();
            if paths.is_empty() {
                bail!("no config files match {configs:?}");
            }
            let cfgs = paths
                .iter()
                .map(|p| load_config_with(p, &overrides))
                .collect::<Result<Vec<_>, _>>()?;
            let workers = workers
                .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
                .unwrap_or(1);
            let outcome = run_matrix(&cfgs, &seeds, &out, workers)?;
            println!(
                "{:>4}  {:<28} {:>5} {:>7} {:>16} {:>16}",
                "rank", "label", "runs", "alerts", "mean_max", "p95_max"
            );
            for r in &outcome.report {
                let f = |v: Option<f64>| v.map(fmt_seconds).unwrap_or_else(|| "-".into());
                println!(
                    "{:>4}  {:<28} {:>5} {:>7} {:>16} {:>16}",
                    r.rank,
                    r.label,
                    r.runs,
                    r.alerts,
                    f(r.mean_max_origin_diff),
                    f(r.p95_max_origin_diff)
                );
            }
            println!("report: {}", outcome.report_path.display());
            let failures: Vec<_> = outcome.failures().collect();
            for f in &failures {
                if let Err(e) = &f.result {
                    eprintln!("failed: {} seed {}: {e}", f.label, f.seed);
                }
            }
            if !failures.is_empty() {
                bail!("{} of {} runs failed", failures.len(), outcome.cells.len());
            }
        }
        Command::Validate { config, overrides } => {
            let cfg = load_config_with(&config, &overrides)?;
            println!("ok: {} ({})", config.display(), cfg.strategy.label());
        }
        Command::Oracle {
            org,
            tar,
            tower,
            overhead,
            channel_estd,
            speed,
        } => {
            let breakdown = match tower {
                Some(pos) => {
                    let t = AtcTower::new(TowerId(0), pos, f64::INFINITY);
                    indirect_latency(org, &t, tar, overhead, speed)?
                }
                None => direct_latency(org, tar, channel_estd, speed)?,
            };
            println!("{}", serde_json::to_string_pretty(&breakdown)?);
        }
    }
    Ok(())
}
