//! Gaussian-mixture task mapper. Each task contributes K diagonal Gaussian
//! components; queries go to the task of the component with the largest
//! posterior.

use std::sync::atomic::{AtomicU64, Ordering};

use super::{expect_next_task, rows, PrototypeDictionary, Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::cluster::{fit_diag_gmm, log_density, sq_dist, GaussianComponent, GmmOptions};
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;

#[derive(Debug)]
pub struct GmmcMapper {
    k: usize,
    seed: u64,
    opts: GmmOptions,
    /// Components with the within-task weights EM produced. Never modified
    /// after their task completes.
    dict: PrototypeDictionary<GaussianComponent>,
    /// Global weights over all stored components, recomputed on every
    /// renormalization.
    weights: Vec<f64>,
    fallbacks: AtomicU64,
}

impl Clone for GmmcMapper {
    fn clone(&self) -> Self {
        GmmcMapper {
            k: self.k,
            seed: self.seed,
            opts: self.opts,
            dict: self.dict.clone(),
            weights: self.weights.clone(),
            fallbacks: AtomicU64::new(self.fallbacks.load(Ordering::Relaxed)),
        }
    }
}

impl GmmcMapper {
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::arg("GMMC needs at least one component per task"));
        }
        Ok(GmmcMapper {
            k,
            seed,
            opts: GmmOptions::default(),
            dict: PrototypeDictionary::new(),
            weights: Vec::new(),
            fallbacks: AtomicU64::new(0),
        })
    }

    pub fn with_options(mut self, opts: GmmOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn components(&self) -> &[GaussianComponent] {
        self.dict.entries()
    }

    pub fn dictionary(&self) -> &PrototypeDictionary<GaussianComponent> {
        &self.dict
    }

    /// Current global mixture weights, one per stored component.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Predictions that fell back to the nearest-mean rule because every
    /// posterior was non-finite.
    pub fn fallback_count(&self) -> u64 {
        self.fallbacks.load(Ordering::Relaxed)
    }

    /// Append a component for the open task directly (used by tests and
    /// checkpoint loading).
    pub fn push_component(&mut self, task: usize, comp: GaussianComponent) -> Result<()> {
        if task == self.dict.num_tasks() {
            self.dict.begin_task(task)?;
        } else if task + 1 != self.dict.num_tasks() {
            return Err(Error::arg(format!("cannot add a component to task {task}")));
        }
        self.dict.push(comp)?;
        self.renormalize_weights();
        Ok(())
    }

    /// `w_i ← w_i·K / Σ_j w_j·K` over every stored component.
    pub fn renormalize_weights(&mut self) {
        let k = self.k as f64;
        let total: f64 = self.dict.entries().iter().map(|c| c.weight * k).sum();
        self.weights = self
            .dict
            .entries()
            .iter()
            .map(|c| if total > 0.0 { c.weight * k / total } else { 0.0 })
            .collect();
    }

    /// Unnormalized log posterior of every component for `x`.
    pub fn log_posteriors(&self, x: &[f32]) -> Vec<f64> {
        self.dict
            .entries()
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| w.ln() + log_density(x, &c.mean, &c.var))
            .collect()
    }

    fn nearest_mean(&self, x: &[f32]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.dict.entries().iter().enumerate() {
            let d = sq_dist(x, &c.mean);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

impl TaskMapper for GmmcMapper {
    fn name(&self) -> String {
        format!("gmmc(k={})", self.k)
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.dict.num_tasks())?;
        let data = rows(ctx.train);
        if self.k > data.len() {
            return Err(Error::arg(format!("K = {} exceeds the {} training samples", self.k, data.len())));
        }
        let opts = GmmOptions {
            seed: crate::seed::derive(self.seed, "gmmc", ctx.task_id as u64),
            ..self.opts
        };
        let comps = fit_diag_gmm(&data, self.k, &opts)?;
        self.dict.begin_task(ctx.task_id)?;
        for c in comps {
            self.dict.push(c)?;
        }
        self.renormalize_weights();
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        if self.dict.is_empty() {
            return Err(Error::state("GMMC has no components"));
        }
        let post = self.log_posteriors(query.features);
        let mut best = None::<(usize, f64)>;
        for (i, &p) in post.iter().enumerate() {
            if p.is_finite() && best.map_or(true, |(_, bp)| p > bp) {
                best = Some((i, p));
            }
        }
        let idx = match best {
            Some((i, _)) => i,
            None => {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                self.nearest_mean(query.features)
            }
        };
        Ok(self.dict.label(idx) as usize)
    }

    fn num_tasks(&self) -> usize {
        self.dict.num_tasks()
    }

    /// Mean, variance and weight per component at four bytes each; labels
    /// are implied by the fixed K per task.
    fn memory(&self) -> MemoryLedger {
        MemoryLedger::new().with("mapper", self.to_blob().payload_bytes())
    }

    fn to_blob(&self) -> Blob {
        let mut blob = Blob::new("gmmc");
        let dim = self.dict.entries().first().map_or(0, |c| c.mean.len());
        blob.header = vec![self.k as u64, dim as u64, self.dict.num_tasks() as u64];
        for (c, &w) in self.dict.entries().iter().zip(&self.weights) {
            blob.floats.extend_from_slice(&c.mean);
            blob.floats.extend_from_slice(&c.var);
            blob.floats.push(w as f32);
        }
        blob
    }
}
