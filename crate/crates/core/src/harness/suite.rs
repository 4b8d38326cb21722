//! Sequential task loop shared by one classifier and any number of mappers.
//!
//! The classifier learns task `t` with oracle labels; every mapper then
//! learns task `t` while seeing the classifier as it is at that moment.
//! Evaluation covers all tasks seen so far.

use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};
use serde::Serialize;

use crate::error::Result;
use crate::features::{Split, TaskDataset, TaskStream};
use crate::mappers::{TaskContext, TaskMapper};
use crate::metrics::{MemoryLedger, TaskCounts};
use crate::pspbd::{run_pipeline, EvalSet, LogitCache, PipelineSummary, PspBdClassifier, PspBdConfig};

pub struct SuiteMember {
    pub label: String,
    pub mapper: Box<dyn TaskMapper>,
}

impl SuiteMember {
    pub fn new(label: impl Into<String>, mapper: Box<dyn TaskMapper>) -> Self {
        SuiteMember {
            label: label.into(),
            mapper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Last task learned before this evaluation.
    pub after_task: usize,
    pub task_pct: f64,
    pub main_pct: f64,
}

pub struct MemberResult {
    pub label: String,
    pub mapper: Box<dyn TaskMapper>,
    /// Final per-task counts over every test task.
    pub counts: Vec<TaskCounts>,
    pub ledger: MemoryLedger,
    pub curve: Vec<CurvePoint>,
    pub learn_seconds: f64,
}

impl MemberResult {
    pub fn summary(&self) -> PipelineSummary {
        PipelineSummary::from_counts(&self.counts)
    }
}

pub struct SuiteOutput {
    pub classifier: PspBdClassifier,
    pub members: Vec<MemberResult>,
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    /// Evaluate after every task rather than only after the last.
    pub curves: bool,
}

/// Storage of a full pipeline: the mapper plus the classifier's per-task
/// parts, unless the mapper brings its own network.
pub fn pipeline_ledger(mapper: &dyn TaskMapper, clf: &PspBdClassifier) -> MemoryLedger {
    let mut ledger = mapper.memory();
    if mapper.fine_classifier().is_none() {
        ledger.add("psp_keys", clf.key_bytes());
        ledger.add("bd_biases", clf.bd_bytes());
        ledger.add("extra_heads", clf.extra_head_bytes());
    }
    ledger
}

struct TestSets {
    mapper: Vec<Arc<TaskDataset>>,
    classifier: Vec<Arc<TaskDataset>>,
}

fn eval_sets(
    tests: &TestSets,
    seen: usize,
    clf: &PspBdClassifier,
    with_logits: bool,
) -> Result<Vec<EvalSet>> {
    (0..seen)
        .map(|s| {
            let set = EvalSet::new(s, Arc::clone(&tests.mapper[s]), Arc::clone(&tests.classifier[s]))?;
            Ok(if with_logits {
                set.with_logits(Arc::new(LogitCache::compute(clf, &tests.classifier[s], seen)?))
            } else {
                set
            })
        })
        .collect()
}

fn evaluate(members: &[SuiteMember], sets: &[EvalSet], clf: &PspBdClassifier) -> Result<Vec<Vec<TaskCounts>>> {
    members
        .iter()
        .map(|m| run_pipeline(m.mapper.as_ref(), clf, sets))
        .collect()
}

pub fn run_suite(
    stream: &TaskStream,
    clf_cfg: PspBdConfig,
    mut members: Vec<SuiteMember>,
    opts: SuiteOptions,
) -> Result<SuiteOutput> {
    let n = stream.num_tasks();
    let mut clf = PspBdClassifier::new(clf_cfg)?;
    let tests = TestSets {
        mapper: (0..n).map(|t| stream.task(t, Split::Test)).collect::<Result<_>>()?,
        classifier: (0..n).map(|t| stream.classifier_task(t, Split::Test)).collect::<Result<_>>()?,
    };
    let with_logits = members.iter().any(|m| m.mapper.uses_classifier_logits());
    let mut curves: Vec<Vec<CurvePoint>> = vec![Vec::new(); members.len()];
    let mut learn_seconds = vec![0.0; members.len()];
    let mut finals = Vec::new();

    for t in 0..n {
        let train = stream.task(t, Split::Train)?;
        let clf_train = stream.classifier_task(t, Split::Train)?;
        let start = Instant::now();
        let stats = clf.train_task(&clf_train, t)?;
        info!(
            "task {t}: classifier trained in {:.1}s (train acc {:.2}%)",
            start.elapsed().as_secs_f64(),
            100.0 * stats.train_accuracy
        );
        let ctx = TaskContext::new(t, &train).with_classifier(&clf, &clf_train);
        for (m, secs) in members.iter_mut().zip(learn_seconds.iter_mut()) {
            let start = Instant::now();
            m.mapper.learn_task(&ctx)?;
            let dt = start.elapsed().as_secs_f64();
            *secs += dt;
            debug!("task {t}: {} learned in {dt:.2}s", m.label);
        }
        let last = t + 1 == n;
        if opts.curves || last {
            let sets = eval_sets(&tests, t + 1, &clf, with_logits)?;
            let counts = evaluate(&members, &sets, &clf)?;
            for (i, c) in counts.iter().enumerate() {
                let s = PipelineSummary::from_counts(c);
                curves[i].push(CurvePoint {
                    after_task: t,
                    task_pct: s.task_pct,
                    main_pct: s.main_pct,
                });
                debug!("after task {t}: {} task {:.2}% main {:.2}%", members[i].label, s.task_pct, s.main_pct);
            }
            if last {
                finals = counts;
            }
        }
    }

    let members = members
        .into_iter()
        .zip(finals)
        .zip(curves.into_iter().zip(learn_seconds))
        .map(|((m, counts), (curve, learn_seconds))| {
            let ledger = pipeline_ledger(m.mapper.as_ref(), &clf);
            MemberResult {
                label: m.label,
                mapper: m.mapper,
                counts,
                ledger,
                curve,
                learn_seconds,
            }
        })
        .collect();
    Ok(SuiteOutput { classifier: clf, members })
}
