//! Nearest-means task mapper: K k-means centroids per task, each labeled
//! with its task; a query takes the label of the closest centroid.

use super::{expect_next_task, rows, PrototypeDictionary, Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::cluster::{kmeans, sq_dist, KMeansOptions};
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;

#[derive(Debug, Clone, PartialEq)]
pub struct NmcMapper {
    k: usize,
    seed: u64,
    max_iter: usize,
    dict: PrototypeDictionary<Vec<f32>>,
}

impl NmcMapper {
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::arg("NMC needs at least one prototype per task"));
        }
        Ok(NmcMapper {
            k,
            seed,
            max_iter: 100,
            dict: PrototypeDictionary::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dictionary(&self) -> &PrototypeDictionary<Vec<f32>> {
        &self.dict
    }

    /// Label of the prototype nearest to `x` (lowest index on ties).
    pub fn nearest(&self, x: &[f32]) -> Result<usize> {
        let mut best = None::<(usize, f64)>;
        for (i, p) in self.dict.entries().iter().enumerate() {
            let d = sq_dist(x, p);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| self.dict.label(i) as usize)
            .ok_or_else(|| Error::state("NMC has no prototypes"))
    }
}

impl TaskMapper for NmcMapper {
    fn name(&self) -> String {
        format!("nmc(k={})", self.k)
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.dict.num_tasks())?;
        let data = rows(ctx.train);
        if self.k > data.len() {
            return Err(Error::arg(format!("K = {} exceeds the {} training samples", self.k, data.len())));
        }
        let opts = KMeansOptions {
            max_iter: self.max_iter,
            seed: crate::seed::derive(self.seed, "nmc", ctx.task_id as u64),
        };
        let res = kmeans(&data, self.k, &opts)?;
        self.dict.begin_task(ctx.task_id)?;
        for c in res.centroids {
            self.dict.push(c)?;
        }
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        self.nearest(query.features)
    }

    fn num_tasks(&self) -> usize {
        self.dict.num_tasks()
    }

    /// Centroids at four bytes per value. Labels are implied by the fixed K
    /// per task and are not stored.
    fn memory(&self) -> MemoryLedger {
        MemoryLedger::new().with("mapper", self.to_blob().payload_bytes())
    }

    fn to_blob(&self) -> Blob {
        let mut blob = Blob::new("nmc");
        let dim = self.dict.entries().first().map_or(0, Vec::len);
        blob.header = vec![self.k as u64, dim as u64, self.dict.num_tasks() as u64];
        for p in self.dict.entries() {
            blob.floats.extend_from_slice(p);
        }
        blob
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Split, TaskDataset};
    use rand::Rng;

    fn ds(t: usize, values: Vec<f32>, dim: usize) -> TaskDataset {
        let n = values.len() / dim;
        TaskDataset::new(t, Split::Train, dim, 1, values, vec![0; n]).unwrap()
    }

    #[test]
    fn single_prototype_is_the_sample_mean() {
        let mut m = NmcMapper::new(1, 0).unwrap();
        let d = ds(0, vec![1.0, 2.0, 3.0, 4.0, 8.0, 0.0], 2);
        m.learn_task(&TaskContext::new(0, &d)).unwrap();
        assert_eq!(m.dictionary().entries()[0], vec![4.0, 2.0]);
    }

    #[test]
    fn nearest_prototype_and_tie_break() {
        let mut m = NmcMapper::new(1, 0).unwrap();
        m.learn_task(&TaskContext::new(0, &ds(0, vec![0.0], 1))).unwrap();
        m.learn_task(&TaskContext::new(1, &ds(1, vec![1.0], 1))).unwrap();
        assert_eq!(m.predict(&Query::new(&[0.4])).unwrap(), 0);
        assert_eq!(m.predict(&Query::new(&[1.0])).unwrap(), 1);
        assert_eq!(m.predict(&Query::new(&[0.5])).unwrap(), 0);
    }

    #[test]
    fn errors() {
        assert!(NmcMapper::new(0, 0).is_err());
        let m = NmcMapper::new(1, 0).unwrap();
        assert!(matches!(m.predict(&Query::new(&[0.0])), Err(Error::State(_))));
        let mut m = NmcMapper::new(3, 0).unwrap();
        assert!(matches!(
            m.learn_task(&TaskContext::new(0, &ds(0, vec![0.0, 1.0], 1))),
            Err(Error::Argument(_))
        ));
        assert!(m.learn_task(&TaskContext::new(1, &ds(1, vec![0.0; 5], 1))).is_err());
    }

    #[test]
    fn agrees_with_exhaustive_scan_and_keeps_old_entries() {
        let mut rng = crate::seed::rng(1, "nmc-test", 0);
        let mut m = NmcMapper::new(2, 5).unwrap();
        let mut snapshot = Vec::new();
        for t in 0..4 {
            let vals: Vec<f32> = (0..40 * 3).map(|_| rng.gen_range(0.0..1.0) + t as f32).collect();
            m.learn_task(&TaskContext::new(t, &ds(t, vals, 3))).unwrap();
            let bytes = m.to_blob().floats;
            assert_eq!(&bytes[..snapshot.len()], &snapshot[..]);
            snapshot = bytes;
        }
        for _ in 0..100 {
            let x: Vec<f32> = (0..3).map(|_| rng.gen_range(-1.0..5.0)).collect();
            let mut best = (0, f64::INFINITY);
            for (i, p) in m.dictionary().entries().iter().enumerate() {
                let d: f64 = p.iter().zip(&x).map(|(a, b)| f64::from(a - b).powi(2)).sum();
                if d < best.1 {
                    best = (i, d);
                }
            }
            let expect = m.dictionary().label(best.0) as usize;
            let got = m.predict(&Query::new(&x)).unwrap();
            assert_eq!(got, expect);
            assert!(got < 4);
        }
    }

    #[test]
    fn permuted_mnist_shaped_payload() {
        let mut m = NmcMapper::new(1, 0).unwrap();
        for t in 0..25 {
            m.learn_task(&TaskContext::new(t, &ds(t, vec![0.5; 784 * 2], 784))).unwrap();
        }
        assert_eq!(m.memory().total(), 78_400);
        assert_eq!(NmcMapper::new(1, 0).unwrap().memory().total(), 0);
    }
}
