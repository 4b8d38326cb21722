//! Picks the task whose classifier head is most confident (lowest softmax
//! entropy).

use super::{expect_next_task, Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;
use crate::nn::{argmin_f64, softmax_entropy};

#[derive(Debug, Clone, Default)]
pub struct EntropyMapper {
    num_tasks: usize,
}

impl EntropyMapper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of the lowest-entropy logit vector; ties go to the lowest index.
    pub fn select(logits: &[Vec<f32>]) -> Result<usize> {
        if logits.is_empty() {
            return Err(Error::state("no task logits to compare"));
        }
        let h: Vec<f64> = logits.iter().map(|l| softmax_entropy(l)).collect();
        Ok(argmin_f64(&h))
    }
}

impl TaskMapper for EntropyMapper {
    fn name(&self) -> String {
        "entropy".into()
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.num_tasks)?;
        self.num_tasks += 1;
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        let logits = query.task_logits()?;
        let n = self.num_tasks.min(logits.len());
        Self::select(&logits[..n])
    }

    fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    fn uses_classifier_logits(&self) -> bool {
        true
    }

    /// Stores nothing beyond the classifier's own task parameters.
    fn memory(&self) -> MemoryLedger {
        MemoryLedger::new().with("mapper", 0)
    }

    fn to_blob(&self) -> Blob {
        let mut b = Blob::new("entropy");
        b.header = vec![self.num_tasks as u64];
        b
    }
}
