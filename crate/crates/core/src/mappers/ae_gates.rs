//! One undercomplete autoencoder per task; a query goes to the task whose
//! autoencoder reconstructs it best.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{expect_next_task, subsample_indices, Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;
use crate::nn::{argmin_f64, gather_rows, mse, relu_backward, relu_inplace, Dense, Sgd};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeGatesConfig {
    /// Latent width; `None` picks 64 for 784-d inputs and 32 otherwise.
    pub latent: Option<usize>,
    pub epochs: usize,
    pub lr: f32,
    pub momentum: f32,
    pub batch_size: usize,
    /// Standardize inputs with the first task's pooled mean and deviation.
    pub standardize: bool,
    pub max_samples_per_task: Option<usize>,
    pub seed: u64,
}

impl Default for AeGatesConfig {
    fn default() -> Self {
        AeGatesConfig {
            latent: None,
            epochs: 20,
            lr: 0.001,
            momentum: 0.9,
            batch_size: 32,
            standardize: true,
            max_samples_per_task: None,
            seed: 0,
        }
    }
}

impl AeGatesConfig {
    pub fn latent_for(&self, dim: usize) -> usize {
        self.latent.unwrap_or(if dim == 784 { 64 } else { 32 })
    }
}

/// ReLU encoder, linear decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskAutoencoder {
    pub enc: Dense,
    pub dec: Dense,
}

impl TaskAutoencoder {
    pub fn new(dim: usize, latent: usize, rng: &mut impl rand::Rng) -> Self {
        TaskAutoencoder {
            enc: Dense::new(dim, latent, rng),
            dec: Dense::new(latent, dim, rng),
        }
    }

    /// Identity weights with `latent = dim`; exact on non-negative inputs.
    pub fn identity(dim: usize) -> Self {
        let mut enc = Dense::zeros(dim, dim);
        let mut dec = Dense::zeros(dim, dim);
        enc.w.diag_mut().fill(1.0);
        dec.w.diag_mut().fill(1.0);
        TaskAutoencoder { enc, dec }
    }

    pub fn reconstruct(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        let mut h = self.enc.forward(x);
        relu_inplace(&mut h);
        self.dec.forward(h.view())
    }

    /// Per-row mean squared reconstruction error.
    pub fn row_errors(&self, x: ArrayView2<'_, f32>) -> Vec<f64> {
        let r = self.reconstruct(x);
        r.outer_iter()
            .zip(x.outer_iter())
            .map(|(a, b)| {
                a.iter().zip(b).map(|(p, q)| f64::from(p - q).powi(2)).sum::<f64>() / a.len().max(1) as f64
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.enc.param_count() + self.dec.param_count()
    }

    fn train(&mut self, x: &Array2<f32>, cfg: &AeGatesConfig, t: usize) {
        let sgd = Sgd {
            lr: cfg.lr,
            momentum: cfg.momentum,
        };
        let mut vel = [
            (Array2::zeros(self.enc.w.raw_dim()), Array1::zeros(self.enc.b.len())),
            (Array2::zeros(self.dec.w.raw_dim()), Array1::zeros(self.dec.b.len())),
        ];
        let mut rng = seed::rng(cfg.seed, "ae-shuffle", t as u64);
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                let xb = x.select(ndarray::Axis(0), chunk);
                let mut h = self.enc.forward(xb.view());
                relu_inplace(&mut h);
                let r = self.dec.forward(h.view());
                // Per-sample MSE summed over dimensions keeps gradients on a
                // useful scale for wide inputs.
                let (_, mut d) = mse(r.view(), xb.view());
                d *= xb.ncols() as f32;
                let (dw2, db2) = self.dec.param_grads(h.view(), d.view());
                let mut dh = self.dec.input_grad(d.view());
                relu_backward(&mut dh, h.view());
                let (dw1, db1) = self.enc.param_grads(xb.view(), dh.view());
                sgd.step2(&mut self.dec.w, &dw2, &mut vel[1].0);
                sgd.step1(&mut self.dec.b, &db2, &mut vel[1].1);
                sgd.step2(&mut self.enc.w, &dw1, &mut vel[0].0);
                sgd.step1(&mut self.enc.b, &db1, &mut vel[0].1);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AeGatesMapper {
    cfg: AeGatesConfig,
    /// Pooled (mean, std) of the first task.
    stats: Option<(f32, f32)>,
    aes: Vec<TaskAutoencoder>,
}

impl AeGatesMapper {
    pub fn new(cfg: AeGatesConfig) -> Result<Self> {
        if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
            return Err(Error::arg("batch size and learning rate must be positive"));
        }
        Ok(AeGatesMapper {
            cfg,
            stats: None,
            aes: Vec::new(),
        })
    }

    pub fn autoencoders(&self) -> &[TaskAutoencoder] {
        &self.aes
    }

    /// Insert a ready-made autoencoder as the next task.
    pub fn push_autoencoder(&mut self, ae: TaskAutoencoder) {
        self.aes.push(ae);
    }

    fn standardized(&self, mut x: Array2<f32>) -> Array2<f32> {
        if let Some((m, s)) = self.stats {
            x.mapv_inplace(|v| (v - m) / s);
        }
        x
    }

    /// Reconstruction error of `x` under every task's autoencoder.
    pub fn errors(&self, x: &[f32]) -> Vec<f64> {
        let xm = self.standardized(gather_rows(&[x]));
        self.aes.iter().map(|ae| ae.row_errors(xm.view())[0]).collect()
    }
}

fn pooled_stats(x: &Array2<f32>) -> (f32, f32) {
    let n = x.len().max(1) as f64;
    let mean = x.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = x.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
    (mean as f32, (var.sqrt() as f32).max(1e-6))
}

impl TaskMapper for AeGatesMapper {
    fn name(&self) -> String {
        format!("ae-gates(l={})", self.cfg.latent.map_or("auto".into(), |l| l.to_string()))
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.aes.len())?;
        let t = ctx.task_id;
        let idx = subsample_indices(ctx.train.len(), self.cfg.max_samples_per_task, self.cfg.seed, "ae-subsample", t);
        let raw = gather_rows(&idx.iter().map(|&i| ctx.train.sample(i)).collect::<Vec<_>>());
        if self.cfg.standardize && self.stats.is_none() {
            self.stats = Some(pooled_stats(&raw));
        }
        let x = self.standardized(raw);
        let dim = x.ncols();
        let mut rng = seed::rng(self.cfg.seed, "ae-init", t as u64);
        let mut ae = TaskAutoencoder::new(dim, self.cfg.latent_for(dim), &mut rng);
        ae.train(&x, &self.cfg, t);
        let finite = |d: &Dense| d.w.iter().chain(d.b.iter()).all(|v| v.is_finite());
        if !finite(&ae.enc) || !finite(&ae.dec) {
            return Err(Error::state(format!("autoencoder for task {t} diverged; lower its learning rate")));
        }
        self.aes.push(ae);
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        if self.aes.is_empty() {
            return Err(Error::state("no autoencoders trained"));
        }
        Ok(argmin_f64(&self.errors(query.features)))
    }

    fn num_tasks(&self) -> usize {
        self.aes.len()
    }

    fn memory(&self) -> MemoryLedger {
        MemoryLedger::new().with("mapper", self.to_blob().payload_bytes())
    }

    fn to_blob(&self) -> Blob {
        let mut blob = Blob::new("ae-gates");
        blob.header.push(self.aes.len() as u64);
        if let Some((m, s)) = self.stats {
            blob.floats.extend([m, s]);
        }
        for ae in &self.aes {
            blob.header.extend([ae.enc.inputs() as u64, ae.enc.outputs() as u64]);
            for d in [&ae.enc, &ae.dec] {
                blob.floats.extend(d.w.iter());
                blob.floats.extend(d.b.iter());
            }
        }
        blob
    }
}
