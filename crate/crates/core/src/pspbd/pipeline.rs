//! Mapper + classifier evaluation: the mapper picks a task, the classifier
//! classifies under that task's keys and biases.

use std::sync::Arc;

use super::PspBdClassifier;
use crate::error::{Error, Result};
use crate::features::TaskDataset;
use crate::mappers::{Query, TaskMapper};
use crate::metrics::TaskCounts;
use crate::nn::argmax;

/// Classifier logits of every sample of one test set under tasks `0..tasks`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitCache {
    /// `rows[i][t]`: logits of sample `i` under task `t`.
    rows: Vec<Vec<Vec<f32>>>,
}

impl LogitCache {
    pub fn compute(clf: &PspBdClassifier, data: &TaskDataset, tasks: usize) -> Result<Self> {
        let mut rows = vec![Vec::with_capacity(tasks); data.len()];
        for t in 0..tasks {
            let l = clf.forward_batch(data.view(), t)?;
            for (row, out) in l.outer_iter().zip(rows.iter_mut()) {
                out.push(row.to_vec());
            }
        }
        Ok(LogitCache { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[Vec<f32>] {
        &self.rows[i]
    }
}

/// One test task as seen by the mapper and by the classifier.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub task: usize,
    pub mapper_view: Arc<TaskDataset>,
    pub classifier_view: Arc<TaskDataset>,
    pub logits: Option<Arc<LogitCache>>,
}

impl EvalSet {
    pub fn new(task: usize, mapper_view: Arc<TaskDataset>, classifier_view: Arc<TaskDataset>) -> Result<Self> {
        if mapper_view.len() != classifier_view.len() {
            return Err(Error::arg("mapper and classifier views differ in length"));
        }
        Ok(EvalSet {
            task,
            mapper_view,
            classifier_view,
            logits: None,
        })
    }

    pub fn with_logits(mut self, cache: Arc<LogitCache>) -> Self {
        self.logits = Some(cache);
        self
    }
}

/// Aggregate accuracies in percent, averaged over test tasks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSummary {
    pub task_pct: f64,
    pub main_pct: f64,
}

impl PipelineSummary {
    pub fn from_counts(counts: &[TaskCounts]) -> Self {
        let n = counts.len().max(1) as f64;
        PipelineSummary {
            task_pct: counts.iter().map(TaskCounts::task_pct).sum::<f64>() / n,
            main_pct: counts.iter().map(TaskCounts::main_pct).sum::<f64>() / n,
        }
    }
}

/// Map every test sample to a task, classify it under that task and count
/// hits per test task. A main hit needs the right task and the right class;
/// `class_hits` also counts a right class under a wrong task when heads are
/// shared.
pub fn run_pipeline(mapper: &dyn TaskMapper, clf: &PspBdClassifier, sets: &[EvalSet]) -> Result<Vec<TaskCounts>> {
    let tasks = mapper.num_tasks();
    let fine = mapper.fine_classifier();
    let net = fine.unwrap_or(clf);
    let shared = net.head_layout().is_shared();
    let mut out = Vec::with_capacity(sets.len());
    for set in sets {
        let mut c = TaskCounts {
            task: set.task,
            samples: set.mapper_view.len() as u64,
            predicted: vec![0; tasks],
            ..TaskCounts::default()
        };
        let cache = set.logits.as_deref();
        if let Some(cache) = cache {
            if cache.len() != set.mapper_view.len() {
                return Err(Error::arg("logit cache does not match the test set"));
            }
        }
        for i in 0..set.mapper_view.len() {
            let cls_x = set.classifier_view.sample(i);
            let mut q = Query::new(set.mapper_view.sample(i))
                .with_classifier(clf, cls_x)
                .with_true_task(set.task);
            if let Some(cache) = cache {
                q = q.with_logits(cache.sample(i));
            }
            let t_hat = mapper.predict(&q)?;
            if t_hat >= tasks || t_hat >= net.num_tasks() {
                return Err(Error::state(format!("mapper predicted unknown task {t_hat}")));
            }
            let y_hat = match (cache, fine) {
                (Some(cache), None) if t_hat < cache.sample(i).len() => argmax(&cache.sample(i)[t_hat]),
                _ => argmax(&net.forward(cls_x, t_hat)?),
            };
            let y = set.classifier_view.label(i) as usize;
            c.predicted[t_hat] += 1;
            let task_ok = t_hat == set.task;
            let class_ok = y_hat == y;
            c.task_hits += u64::from(task_ok);
            c.main_hits += u64::from(task_ok && class_ok);
            c.class_hits += u64::from(if shared { class_ok } else { task_ok && class_ok });
        }
        out.push(c);
    }
    Ok(out)
}
