//! Parameter sweeps scored by the memory/accuracy trade-off.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use log::info;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiment::{evaluate_config, run_dir};
use super::plot::emit_plots;
use crate::error::{Error, Result};
use crate::metrics::{select_best_config, tradeoff_score, GridPoint, BYTES_PER_KB};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub key: String,
    pub value: String,
    pub task_pct: f64,
    pub main_pct: f64,
    pub memory_bytes: u64,
}

impl GridRow {
    pub fn score(&self, alpha_mem: f64) -> f64 {
        tradeoff_score(self.task_pct, self.memory_bytes, alpha_mem)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridOutput {
    pub rows: Vec<GridRow>,
    pub best: usize,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

pub fn best_row(rows: &[GridRow], alpha_mem: f64) -> Option<usize> {
    let points: Vec<GridPoint<()>> = rows
        .iter()
        .map(|r| GridPoint {
            config: (),
            task_pct: r.task_pct,
            memory_bytes: r.memory_bytes,
        })
        .collect();
    select_best_config(&points, alpha_mem)
}

pub const GRID_HEADER: &str = "param,value,memory_kb,task_pct,main_pct,memory_bytes,score,best";

pub fn grid_csv(rows: &[GridRow], best: usize, alpha_mem: f64) -> String {
    let mut out = format!("{GRID_HEADER}\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{:.3},{:.4},{:.4},{},{:.6},{}",
            r.key,
            r.value,
            r.memory_bytes as f64 / BYTES_PER_KB,
            r.task_pct,
            r.main_pct,
            r.memory_bytes,
            r.score(alpha_mem),
            u8::from(i == best)
        );
    }
    out
}

/// Rows of a grid CSV written by [`grid_csv`].
pub fn parse_grid_csv(text: &str) -> Result<Vec<GridRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(GRID_HEADER) {
        return Err(Error::arg("grid CSV header mismatch"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::arg(format!("bad grid row {l:?}"));
            if f.len() != 8 {
                return Err(bad());
            }
            Ok(GridRow {
                key: f[0].to_string(),
                value: f[1].to_string(),
                task_pct: f[3].parse().map_err(|_| bad())?,
                main_pct: f[4].parse().map_err(|_| bad())?,
                memory_bytes: f[5].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Evaluate every grid value and pick the best by trade-off score. Writes
/// `grid.csv`, `grid.json` and `best_config.txt` next to the run.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridOutput> {
    let spec = cfg
        .grid
        .clone()
        .ok_or_else(|| Error::config("run_grid needs a grid (key=v1,v2,...)"))?;
    let mut rows = Vec::with_capacity(spec.values.len());
    let mut configs = Vec::with_capacity(spec.values.len());
    for v in &spec.values {
        let mut point = cfg.clone();
        point.grid = None;
        point.set(&spec.key, v)?;
        let out = evaluate_config(&point)?;
        let row = GridRow {
            key: spec.key.clone(),
            value: v.clone(),
            task_pct: out.report.task_pct.unwrap_or(0.0),
            main_pct: out.report.main_pct,
            memory_bytes: out.report.memory_bytes,
        };
        info!(
            "{}={}: task {:.2}% memory {:.1} KB",
            row.key,
            row.value,
            row.task_pct,
            row.memory_bytes as f64 / BYTES_PER_KB
        );
        rows.push(row);
        configs.push(point);
    }
    let best = best_row(&rows, cfg.alpha_mem).expect("grid has values");
    let dir = run_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let csv = dir.join("grid.csv");
    let mut out = GridOutput {
        rows,
        best,
        files: Vec::new(),
    };
    fs::write(&csv, grid_csv(&out.rows, best, cfg.alpha_mem)).map_err(|e| Error::io(&csv, e))?;
    let json = dir.join("grid.json");
    fs::write(&json, serde_json::to_string_pretty(&out)?).map_err(|e| Error::io(&json, e))?;
    let best_cfg = dir.join("best_config.txt");
    fs::write(&best_cfg, configs[best].to_text()).map_err(|e| Error::io(&best_cfg, e))?;
    out.files = vec![csv.clone(), json, best_cfg];
    if cfg.plots {
        out.files.extend(emit_plots(&csv, &dir)?);
    }
    Ok(out)
}
