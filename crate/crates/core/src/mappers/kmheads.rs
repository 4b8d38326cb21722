//! k-means prototypes of each task head's output; a query goes to the head
//! whose output lands closest to one of its own prototypes.

use super::{expect_next_task, subsample_indices, Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::cluster::{kmeans, sq_dist, KMeansOptions};
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;
use crate::nn::gather_rows;
use crate::pspbd::{PspBdClassifier, PspBdConfig};
use crate::seed;

/// Where head embeddings come from.
#[derive(Debug, Clone)]
pub enum KmHeadsSource {
    /// The pipeline's keyed classifier.
    Pipeline,
    /// A network owned and trained by the mapper, which then also does the
    /// fine classification (the original multi-head formulation).
    Own(PspBdConfig),
}

/// N prototypes of head outputs per task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeadPrototypeStore {
    per_task: Vec<Vec<Vec<f32>>>,
}

impl HeadPrototypeStore {
    pub fn push_task(&mut self, prototypes: Vec<Vec<f32>>) {
        self.per_task.push(prototypes);
    }

    pub fn num_tasks(&self) -> usize {
        self.per_task.len()
    }

    pub fn task(&self, t: usize) -> &[Vec<f32>] {
        &self.per_task[t]
    }

    /// Distance from `h` to the nearest prototype of task `t`.
    pub fn nearest_distance(&self, t: usize, h: &[f32]) -> f64 {
        self.per_task[t].iter().map(|p| sq_dist(h, p)).fold(f64::INFINITY, f64::min)
    }

    /// Task minimizing its nearest-prototype distance to its own head
    /// output; ties go to the lowest task.
    pub fn select(&self, head_outputs: &[Vec<f32>]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (t, h) in head_outputs.iter().enumerate().take(self.per_task.len()) {
            let d = self.nearest_distance(t, h);
            if d < best.1 {
                best = (t, d);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone)]
pub struct KmHeadsMapper {
    n: usize,
    seed: u64,
    source: KmHeadsSource,
    max_samples_per_task: Option<usize>,
    own: Option<PspBdClassifier>,
    store: HeadPrototypeStore,
}

impl KmHeadsMapper {
    pub fn new(n: usize, source: KmHeadsSource, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("KM-heads needs at least one prototype per task"));
        }
        let own = match &source {
            KmHeadsSource::Own(cfg) => Some(PspBdClassifier::new(cfg.clone())?),
            KmHeadsSource::Pipeline => None,
        };
        Ok(KmHeadsMapper {
            n,
            seed,
            source,
            max_samples_per_task: None,
            own,
            store: HeadPrototypeStore::default(),
        })
    }

    /// Cluster at most `cap` samples per task.
    pub fn with_sample_cap(mut self, cap: Option<usize>) -> Self {
        self.max_samples_per_task = cap;
        self
    }

    pub fn store(&self) -> &HeadPrototypeStore {
        &self.store
    }

    pub fn own_network(&self) -> Option<&PspBdClassifier> {
        self.own.as_ref()
    }

    fn head_outputs(&self, query: &Query<'_>) -> Result<Vec<Vec<f32>>> {
        match &self.own {
            Some(net) => (0..self.store.num_tasks())
                .map(|t| net.forward(query.classifier_features, t))
                .collect(),
            None => query.task_logits(),
        }
    }
}

impl TaskMapper for KmHeadsMapper {
    fn name(&self) -> String {
        match &self.source {
            KmHeadsSource::Pipeline => format!("km-heads-ours(n={})", self.n),
            KmHeadsSource::Own(c) if c.use_keys || c.use_bd => format!("km-heads-ours-multi(n={})", self.n),
            KmHeadsSource::Own(_) => format!("km-heads(n={})", self.n),
        }
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.store.num_tasks())?;
        let t = ctx.task_id;
        let data = ctx.classifier_train;
        if self.n > data.len() {
            return Err(Error::arg(format!("N = {} exceeds the {} training samples", self.n, data.len())));
        }
        let net: &PspBdClassifier = match self.own.as_mut() {
            Some(own) => {
                own.train_task(data, t)?;
                own
            }
            None => ctx.require_classifier()?,
        };
        let idx = subsample_indices(data.len(), self.max_samples_per_task.map(|c| c.max(self.n)), self.seed, "kmheads-subsample", t);
        let x = gather_rows(&idx.iter().map(|&i| data.sample(i)).collect::<Vec<_>>());
        let h = net.forward_batch(x.view(), t)?;
        let rows: Vec<&[f32]> = h.outer_iter().map(|r| r.to_slice().expect("contiguous")).collect();
        let res = kmeans(
            &rows,
            self.n,
            &KMeansOptions {
                max_iter: 100,
                seed: seed::derive(self.seed, "kmheads", t as u64),
            },
        )?;
        self.store.push_task(res.centroids);
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        if self.store.num_tasks() == 0 {
            return Err(Error::state("KM-heads has no prototypes"));
        }
        let h = self.head_outputs(query)?;
        if h.len() < self.store.num_tasks() {
            return Err(Error::state("fewer head outputs than learned tasks"));
        }
        Ok(self.store.select(&h))
    }

    fn num_tasks(&self) -> usize {
        self.store.num_tasks()
    }

    fn uses_classifier_logits(&self) -> bool {
        self.own.is_none()
    }

    fn fine_classifier(&self) -> Option<&PspBdClassifier> {
        self.own.as_ref()
    }

    /// Prototypes at four bytes per value; an owned network adds its heads
    /// beyond the first and any keys or task biases.
    fn memory(&self) -> MemoryLedger {
        let mut m = MemoryLedger::new().with("mapper", self.to_blob().payload_bytes());
        if let Some(own) = &self.own {
            m.add("heads", own.extra_head_bytes());
            if own.key_bytes() + own.bd_bytes() > 0 {
                m.add("psp_keys", own.key_bytes());
                m.add("bd_biases", own.bd_bytes());
            }
        }
        m
    }

    fn to_blob(&self) -> Blob {
        let mut blob = Blob::new("km-heads");
        blob.header = vec![self.n as u64, self.store.num_tasks() as u64];
        for t in 0..self.store.num_tasks() {
            for p in self.store.task(t) {
                blob.header.push(p.len() as u64);
                blob.floats.extend_from_slice(p);
            }
        }
        blob
    }
}
