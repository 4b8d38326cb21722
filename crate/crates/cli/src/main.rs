use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use log::info;
use taskmap::harness::{run_experiment, run_grid, ExperimentConfig, MAPPER_NAMES};
use taskmap::metrics::reports_to_csv;

/// Run a task-mapper + PSP-BD continual-learning experiment and write
/// CSV/JSON reports (and gnuplot data) under the output directory.
#[derive(Debug, Parser)]
#[command(name = "taskmap", version)]
struct Args {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// permuted | eight_dsets | cifar100_super | synthetic
    #[arg(long)]
    benchmark: Option<String>,

    /// Mapper name (see --list-mappers).
    #[arg(long)]
    mapper: Option<String>,

    /// Single seed (replaces the default seed list).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Parameter sweep, e.g. `rho=0.3,0.5,0.7`.
    #[arg(long)]
    grid: Option<String>,

    /// Five permuted tasks on small splits with few epochs.
    #[arg(long)]
    smoke: bool,

    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Print mapper names and exit.
    #[arg(long)]
    list_mappers: bool,

    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
}

fn resolve(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if args.smoke {
        cfg.make_smoke();
    }
    let flags = [
        ("benchmark", args.benchmark.clone()),
        ("mapper", args.mapper.clone()),
        ("seed", args.seed.map(|s| s.to_string())),
        ("out_dir", args.out.as_ref().map(|p| p.display().to_string())),
        ("grid", args.grid.clone()),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for kv in &args.overrides {
        cfg.apply_override(kv)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    if args.list_mappers {
        println!("{}", MAPPER_NAMES.join("\n"));
        return Ok(());
    }
    let cfg = resolve(&args)?;
    if args.dry_run {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    info!(
        "{} / {}: {} tasks, seeds {:?}",
        cfg.benchmark,
        cfg.mapper,
        cfg.num_tasks(),
        cfg.seeds
    );
    if cfg.grid.is_some() {
        let out = run_grid(&cfg)?;
        for (i, r) in out.rows.iter().enumerate() {
            println!(
                "{}={}\ttask {:.2}%\tmain {:.2}%\t{:.1} KB{}",
                r.key,
                r.value,
                r.task_pct,
                r.main_pct,
                r.memory_bytes as f64 / 1024.0,
                if i == out.best { "\t<- best" } else { "" }
            );
        }
        for f in &out.files {
            info!("wrote {}", f.display());
        }
    } else {
        let out = run_experiment(&cfg)?;
        print!("{}", reports_to_csv(std::slice::from_ref(&out.report)));
        for f in &out.files {
            info!("wrote {}", f.display());
        }
    }
    Ok(())
}
