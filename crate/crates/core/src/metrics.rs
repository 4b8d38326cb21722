//! Permanent-memory accounting, the memory/accuracy trade-off score and
//! Table-style accuracy reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BYTES_PER_KB: f64 = 1024.0;

/// Memory weight in the trade-off score, per percentage point and byte.
pub const DEFAULT_ALPHA_MEM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub component: String,
    pub bytes: u64,
}

/// Byte counts of everything a pipeline must keep permanently, excluding
/// the backbone's own weights and transient training state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLedger {
    entries: Vec<LedgerEntry>,
}

impl MemoryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, component: impl Into<String>, bytes: u64) -> Self {
        self.add(component, bytes);
        self
    }

    pub fn add(&mut self, component: impl Into<String>, bytes: u64) {
        self.entries.push(LedgerEntry {
            component: component.into(),
            bytes,
        });
    }

    pub fn extend(&mut self, other: &MemoryLedger) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.bytes).sum()
    }

    pub fn bytes_of(&self, component: &str) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.component == component)
            .map(|e| e.bytes)
            .sum()
    }

    pub fn total_kb(&self) -> f64 {
        self.total() as f64 / BYTES_PER_KB
    }
}

/// `A − α·M` with `A` in percent and `M` in bytes.
pub fn tradeoff_score(task_pct: f64, memory_bytes: u64, alpha_mem: f64) -> f64 {
    task_pct - alpha_mem * memory_bytes as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint<C> {
    pub config: C,
    pub task_pct: f64,
    pub memory_bytes: u64,
}

impl<C> GridPoint<C> {
    pub fn score(&self, alpha_mem: f64) -> f64 {
        tradeoff_score(self.task_pct, self.memory_bytes, alpha_mem)
    }
}

/// Index of the point with the highest score; ties go to the smaller
/// memory, then to the earlier point.
pub fn select_best_config<C>(points: &[GridPoint<C>], alpha_mem: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (sb, si) = (points[b].score(alpha_mem), p.score(alpha_mem));
                if si > sb || (si == sb && p.memory_bytes < points[b].memory_bytes) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Per-test-task counts for one pipeline.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounts {
    pub task: usize,
    pub samples: u64,
    /// Samples whose predicted task was right.
    pub task_hits: u64,
    /// Samples with the right task and the right class.
    pub main_hits: u64,
    /// Samples whose class was right under the predicted task, right task or not.
    pub class_hits: u64,
    /// `predicted[t]`: samples of this task mapped to task `t`.
    pub predicted: Vec<u64>,
}

impl TaskCounts {
    pub fn task_pct(&self) -> f64 {
        pct(self.task_hits, self.samples)
    }

    pub fn main_pct(&self) -> f64 {
        pct(self.main_hits, self.samples)
    }
}

fn pct(hits: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * hits as f64 / n as f64
    }
}

/// One row of an accuracy report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub benchmark: String,
    pub memory_bytes: u64,
    pub memory_kb: f64,
    /// Mean over test tasks; `None` for task-independent methods.
    pub task_pct: Option<f64>,
    pub main_pct: f64,
    /// Main accuracy counting a correct class under a wrong task as a hit
    /// (shared heads only; equals `main_pct` for per-task heads).
    pub main_class_only_pct: f64,
    pub score: Option<f64>,
    pub ledger: MemoryLedger,
    pub per_task: Vec<TaskCounts>,
}

/// Build a report row from per-task counts. Accuracies are averaged over
/// test tasks.
pub fn accuracy_report(
    method: &str,
    benchmark: &str,
    counts: Vec<TaskCounts>,
    ledger: MemoryLedger,
    task_dependent: bool,
    alpha_mem: f64,
) -> MethodReport {
    let mean = |f: &dyn Fn(&TaskCounts) -> f64| {
        if counts.is_empty() {
            0.0
        } else {
            counts.iter().map(f).sum::<f64>() / counts.len() as f64
        }
    };
    let task_pct = task_dependent.then(|| mean(&TaskCounts::task_pct));
    let main_pct = mean(&TaskCounts::main_pct);
    let main_class_only_pct = mean(&|c: &TaskCounts| pct(c.class_hits, c.samples));
    let memory_bytes = ledger.total();
    MethodReport {
        method: method.to_string(),
        benchmark: benchmark.to_string(),
        memory_bytes,
        memory_kb: memory_bytes as f64 / BYTES_PER_KB,
        task_pct,
        main_pct,
        main_class_only_pct,
        score: task_pct.map(|a| tradeoff_score(a, memory_bytes, alpha_mem)),
        ledger,
        per_task: counts,
    }
}

pub const CSV_HEADER: &str = "method,benchmark,memory_kb,task_pct,main_pct,score";

pub fn reports_to_csv(reports: &[MethodReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>, digits: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"));
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{:.1},{},{:.2},{}",
            r.method,
            r.benchmark,
            r.memory_kb,
            opt(r.task_pct, 2),
            r.main_pct,
            opt(r.score, 4)
        );
    }
    out
}

/// Parse rows written by [`reports_to_csv`] back into
/// `(method, benchmark, memory_kb, task_pct, main_pct, score)`.
#[allow(clippy::type_complexity)]
pub fn parse_report_csv(text: &str) -> Result<Vec<(String, String, f64, Option<f64>, f64, Option<f64>)>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::arg("report CSV header mismatch"));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s == "-" {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::arg(format!("bad number {s:?}")))
        }
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(Error::arg(format!("bad report row {l:?}")));
            }
            Ok((
                f[0].to_string(),
                f[1].to_string(),
                num(f[2])?.unwrap_or(0.0),
                num(f[3])?,
                num(f[4])?.unwrap_or(0.0),
                num(f[5])?,
            ))
        })
        .collect()
}

pub fn write_reports(reports: &[MethodReport], csv_path: &Path, json_path: &Path) -> Result<()> {
    for p in [csv_path, json_path] {
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(csv_path, reports_to_csv(reports)).map_err(|e| Error::io(csv_path, e))?;
    fs::write(json_path, serde_json::to_string_pretty(reports)?).map_err(|e| Error::io(json_path, e))?;
    Ok(())
}
