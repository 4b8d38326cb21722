//! Bounds of the task-mapping problem: ground truth and uniform guessing.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;
use crate::seed;

/// Returns each query's true task.
#[derive(Debug, Clone, Default)]
pub struct OracleMapper {
    num_tasks: usize,
}

impl OracleMapper {
    pub fn new() -> Self {
        Self::default()
    }
}

impl TaskMapper for OracleMapper {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        if ctx.task_id != self.num_tasks {
            return Err(Error::arg(format!("expected task {} next, got {}", self.num_tasks, ctx.task_id)));
        }
        self.num_tasks += 1;
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        query.true_task.ok_or_else(|| Error::state("the oracle needs the query's true task"))
    }

    fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    fn memory(&self) -> MemoryLedger {
        MemoryLedger::new().with("mapper", 0)
    }

    fn to_blob(&self) -> Blob {
        Blob::new("oracle")
    }
}

/// Uniform task guesses from a seeded stream; the i-th call draws from its
/// own derived seed, so results depend only on call order.
#[derive(Debug)]
pub struct RandomTaskProvider {
    num_tasks: usize,
    seed: u64,
    calls: AtomicU64,
}

impl RandomTaskProvider {
    pub fn new(seed: u64) -> Self {
        RandomTaskProvider {
            num_tasks: 0,
            seed,
            calls: AtomicU64::new(0),
        }
    }

    /// A provider over a fixed number of tasks.
    pub fn with_tasks(num_tasks: usize, seed: u64) -> Self {
        RandomTaskProvider {
            num_tasks,
            ..Self::new(seed)
        }
    }

    pub fn draw(&self) -> Result<usize> {
        if self.num_tasks == 0 {
            return Err(Error::state("no tasks to choose from"));
        }
        let i = self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(seed::rng(self.seed, "random-task", i).gen_range(0..self.num_tasks))
    }
}

impl Clone for RandomTaskProvider {
    fn clone(&self) -> Self {
        RandomTaskProvider {
            num_tasks: self.num_tasks,
            seed: self.seed,
            calls: AtomicU64::new(self.calls.load(Ordering::Relaxed)),
        }
    }
}

impl TaskMapper for RandomTaskProvider {
    fn name(&self) -> String {
        "random".into()
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        if ctx.task_id != self.num_tasks {
            return Err(Error::arg(format!("expected task {} next, got {}", self.num_tasks, ctx.task_id)));
        }
        self.num_tasks += 1;
        Ok(())
    }

    fn predict(&self, _query: &Query<'_>) -> Result<usize> {
        self.draw()
    }

    fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    fn memory(&self) -> MemoryLedger {
        MemoryLedger::new().with("mapper", 0)
    }

    fn to_blob(&self) -> Blob {
        Blob::new("random")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_echoes_truth() {
        let m = OracleMapper::new();
        assert_eq!(m.predict(&Query::new(&[0.0]).with_true_task(7)).unwrap(), 7);
        assert!(m.predict(&Query::new(&[0.0])).is_err());
    }

    #[test]
    fn random_frequencies_and_degenerate_case() {
        let one = RandomTaskProvider::with_tasks(1, 3);
        assert!((0..100).all(|_| one.draw().unwrap() == 0));
        for t in [4usize, 25] {
            let p = RandomTaskProvider::with_tasks(t, 11);
            let mut counts = vec![0usize; t];
            for _ in 0..10_000 {
                counts[p.draw().unwrap()] += 1;
            }
            for c in counts {
                assert!((c as f64 / 1e4 - 1.0 / t as f64).abs() < 0.02);
            }
        }
        assert!(RandomTaskProvider::new(0).draw().is_err());
    }

    #[test]
    fn random_is_reproducible() {
        let a = RandomTaskProvider::with_tasks(25, 5);
        let b = RandomTaskProvider::with_tasks(25, 5);
        let xa: Vec<usize> = (0..50).map(|_| a.draw().unwrap()).collect();
        let xb: Vec<usize> = (0..50).map(|_| b.draw().unwrap()).collect();
        assert_eq!(xa, xb);
    }
}
