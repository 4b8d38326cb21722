//! One configured experiment over all its seeds, plus report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::factory::{build_mapper, build_stream, classifier_config, vanilla_config};
use super::plot::emit_plots;
use super::suite::{run_suite, CurvePoint, SuiteMember, SuiteOptions};
use crate::error::{Error, Result};
use crate::features::{MnistSource, Split, TaskStream};
use crate::metrics::{accuracy_report, reports_to_csv, MemoryLedger, MethodReport, TaskCounts};
use crate::pspbd::{PipelineSummary, VanillaReplay};

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub report: MethodReport,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    /// Counts summed over seeds; memory averaged over seeds.
    pub report: MethodReport,
    pub seeds: Vec<SeedRun>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

fn sum_counts(runs: &[SeedRun]) -> Vec<TaskCounts> {
    let mut total: Vec<TaskCounts> = runs[0].report.per_task.iter().map(|c| TaskCounts {
        task: c.task,
        predicted: vec![0; c.predicted.len()],
        ..TaskCounts::default()
    }).collect();
    for run in runs {
        for (acc, c) in total.iter_mut().zip(&run.report.per_task) {
            acc.samples += c.samples;
            acc.task_hits += c.task_hits;
            acc.main_hits += c.main_hits;
            acc.class_hits += c.class_hits;
            if acc.predicted.len() < c.predicted.len() {
                acc.predicted.resize(c.predicted.len(), 0);
            }
            for (a, p) in acc.predicted.iter_mut().zip(&c.predicted) {
                *a += p;
            }
        }
    }
    total
}

/// Component-wise mean (rounded) of ledgers that share one layout.
fn mean_ledger(ledgers: &[&MemoryLedger]) -> MemoryLedger {
    let n = ledgers.len() as u64;
    let mut out = MemoryLedger::new();
    for (i, e) in ledgers[0].entries().iter().enumerate() {
        let sum: u64 = ledgers.iter().map(|l| l.entries().get(i).map_or(0, |x| x.bytes)).sum();
        out.add(e.component.clone(), (sum + n / 2) / n);
    }
    out
}

fn load_mnist(cfg: &ExperimentConfig) -> Result<Option<Arc<MnistSource>>> {
    Ok(match cfg.benchmark {
        super::Benchmark::Permuted => Some(Arc::new(MnistSource::load(&cfg.mnist_dir)?)),
        _ => None,
    })
}

fn run_vanilla(cfg: &ExperimentConfig, stream: &TaskStream, seed: u64) -> Result<(Vec<TaskCounts>, MemoryLedger, Vec<CurvePoint>)> {
    let mut net = VanillaReplay::new(vanilla_config(cfg, stream, seed))?;
    let n = stream.num_tasks();
    let mut curve = Vec::new();
    let mut last = Vec::new();
    for t in 0..n {
        net.train_task(&*stream.classifier_task(t, Split::Train)?, t)?;
        if cfg.curves || t + 1 == n {
            let counts = (0..=t)
                .map(|s| net.evaluate(&*stream.classifier_task(s, Split::Test)?, s))
                .collect::<Result<Vec<_>>>()?;
            let s = PipelineSummary::from_counts(&counts);
            curve.push(CurvePoint {
                after_task: t,
                task_pct: s.task_pct,
                main_pct: s.main_pct,
            });
            last = counts;
        }
    }
    Ok((last, net.memory(), curve))
}

/// Run every seed without writing files.
pub fn evaluate_config(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mnist = load_mnist(cfg)?;
    let bench = cfg.benchmark.as_str();
    let task_dependent = cfg.mapper != "vanilla_replay";
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        info!("{bench}/{}: seed {seed}", cfg.mapper);
        let stream = build_stream(cfg, seed, mnist.clone())?;
        let (counts, ledger, curve) = if task_dependent {
            let mapper = build_mapper(&cfg.mapper, cfg, &stream, seed)?;
            let out = run_suite(
                &stream,
                classifier_config(cfg, &stream, seed),
                vec![SuiteMember::new(cfg.mapper.clone(), mapper)],
                SuiteOptions { curves: cfg.curves },
            )?;
            let m = out.members.into_iter().next().expect("one member");
            (m.counts, m.ledger, m.curve)
        } else {
            run_vanilla(cfg, &stream, seed)?
        };
        let report = accuracy_report(&cfg.mapper, bench, counts, ledger, task_dependent, cfg.alpha_mem);
        info!(
            "seed {seed}: task {} main {:.2}% memory {:.1} KB",
            report.task_pct.map_or_else(|| "-".into(), |v| format!("{v:.2}%")),
            report.main_pct,
            report.memory_kb
        );
        runs.push(SeedRun { seed, report, curve });
    }
    let ledger = mean_ledger(&runs.iter().map(|r| &r.report.ledger).collect::<Vec<_>>());
    let report = accuracy_report(&cfg.mapper, bench, sum_counts(&runs), ledger, task_dependent, cfg.alpha_mem);
    Ok(ExperimentOutput {
        report,
        seeds: runs,
        files: Vec::new(),
    })
}

pub fn curve_csv(runs: &[SeedRun]) -> String {
    let mut out = String::from("seed,after_task,task_pct,main_pct\n");
    for r in runs {
        for p in &r.curve {
            let _ = writeln!(out, "{},{},{:.4},{:.4}", r.seed, p.after_task, p.task_pct, p.main_pct);
        }
    }
    out
}

fn write(path: &Path, body: &str) -> Result<PathBuf> {
    fs::write(path, body).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Directory for one benchmark/mapper pair under `out_dir`.
pub fn run_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join(format!("{}_{}", cfg.benchmark, cfg.mapper))
}

/// Run the experiment and write `report.csv`, `report.json`,
/// `seeds.csv`, `curve.csv`, `config.txt` and optional plot data.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = evaluate_config(cfg)?;
    let dir = run_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = vec![
        write(&dir.join("config.txt"), &cfg.to_text())?,
        write(&dir.join("report.csv"), &reports_to_csv(std::slice::from_ref(&out.report)))?,
        write(&dir.join("report.json"), &serde_json::to_string_pretty(&out)?)?,
    ];
    let per_seed: Vec<MethodReport> = out
        .seeds
        .iter()
        .map(|r| MethodReport {
            method: format!("{}/seed{}", r.report.method, r.seed),
            ..r.report.clone()
        })
        .collect();
    files.push(write(&dir.join("seeds.csv"), &reports_to_csv(&per_seed))?);
    let curve = write(&dir.join("curve.csv"), &curve_csv(&out.seeds))?;
    files.push(curve.clone());
    if cfg.plots {
        files.extend(emit_plots(&curve, &dir)?);
    }
    out.files = files;
    Ok(out)
}
