//! Shared MLP with parameter superposition (PSP) and beneficial biases (BD).
//!
//! For task `t`, layer `l` computes
//!
//! ```text
//! z = (h ⊙ key[t][l]) · W[l] + b[l] + bd[t][l]
//! ```
//!
//! with ReLU on hidden layers. `key[t][l]` is a ±1 vector over the layer's
//! input (a diagonal binary context matrix) and `bd[t][l]` a per-task bias.
//! Both are fixed once task `t + 1` starts; `W` and `b` are shared.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HeadLayout;
use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::features::TaskDataset;
use crate::nn::{self, argmax, cross_entropy, Dense, Sgd};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PspBdConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub head: HeadLayout,
    /// Apply per-task context keys.
    pub use_keys: bool,
    /// Whether the head layer's input is keyed too.
    pub key_head_input: bool,
    /// Apply per-task additive biases.
    pub use_bd: bool,
    pub epochs: usize,
    pub lr: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub seed: u64,
}

impl PspBdConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, head: HeadLayout) -> Self {
        PspBdConfig {
            input_dim,
            hidden,
            head,
            use_keys: true,
            key_head_input: true,
            use_bd: true,
            epochs: 20,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }

    /// 784 → 256 → 256 → 10 with a shared ten-node head.
    pub fn permuted_mnist() -> Self {
        Self::new(784, vec![256, 256], HeadLayout::shared(10))
    }

    /// Same trunk and optimizer but no keys and no task biases: a plain
    /// network (multi-head when `head` is per-task).
    pub fn plain(mut self) -> Self {
        self.use_keys = false;
        self.use_bd = false;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("layer widths must be positive"));
        }
        if self.head.max_width().unwrap_or(0) == 0 {
            return Err(Error::config("head width must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(())
    }
}

/// ±1 context key over one layer's input.
#[derive(Debug, Clone, PartialEq)]
pub struct PspContextKey(Vec<f32>);

impl PspContextKey {
    pub fn sample(width: usize, rng: &mut impl Rng) -> Self {
        PspContextKey((0..width).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect())
    }

    pub fn ones(width: usize) -> Self {
        PspContextKey(vec![1.0; width])
    }

    pub fn from_signs(signs: Vec<f32>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::arg("context key entries must be +1 or -1"));
        }
        Ok(PspContextKey(signs))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn apply(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        let mut out = x.to_owned();
        out *= &ndarray::ArrayView1::from(&self.0);
        out
    }
}

/// Per-task additive bias on one layer's pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct BdBias(pub Array1<f32>);

#[derive(Debug, Clone)]
struct TaskParams {
    /// One key per layer input, head included (all ones when keys are off).
    keys: Vec<PspContextKey>,
    /// One bias per layer output, head included.
    bd: Vec<BdBias>,
}

/// Gradients of the cross-entropy loss for one task.
#[derive(Debug, Clone)]
pub struct PspBdGrads {
    pub trunk: Vec<(Array2<f32>, Array1<f32>)>,
    pub head: (Array2<f32>, Array1<f32>),
    /// Gradients of the task's BD biases, trunk layers then head.
    pub bd: Vec<Array1<f32>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub final_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct PspBdClassifier {
    cfg: PspBdConfig,
    trunk: Vec<Dense>,
    heads: Vec<Dense>,
    tasks: Vec<TaskParams>,
}

struct ForwardCache {
    /// Keyed input of every layer (trunk then head).
    inputs: Vec<Array2<f32>>,
    /// ReLU outputs of trunk layers.
    activations: Vec<Array2<f32>>,
    logits: Array2<f32>,
}

impl PspBdClassifier {
    pub fn new(cfg: PspBdConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seed::rng(cfg.seed, "psp-init", 0);
        let mut trunk = Vec::with_capacity(cfg.hidden.len());
        let mut width = cfg.input_dim;
        for &h in &cfg.hidden {
            trunk.push(Dense::new(width, h, &mut rng));
            width = h;
        }
        let heads = match &cfg.head {
            HeadLayout::Shared { width: w } => vec![Dense::new(width, *w, &mut rng)],
            HeadLayout::PerTask { .. } => Vec::new(),
        };
        Ok(PspBdClassifier {
            cfg,
            trunk,
            heads,
            tasks: Vec::new(),
        })
    }

    pub fn config(&self) -> &PspBdConfig {
        &self.cfg
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn head_layout(&self) -> &HeadLayout {
        &self.cfg.head
    }

    pub fn head_width(&self, t: usize) -> usize {
        self.cfg.head.width(t)
    }

    pub fn input_dim(&self) -> usize {
        self.cfg.input_dim
    }

    fn feature_width(&self) -> usize {
        self.cfg.hidden.last().copied().unwrap_or(self.cfg.input_dim)
    }

    fn layer_inputs(&self) -> Vec<usize> {
        let mut v = vec![self.cfg.input_dim];
        v.extend_from_slice(&self.cfg.hidden);
        v
    }

    fn layer_outputs(&self, t: usize) -> Vec<usize> {
        let mut v = self.cfg.hidden.clone();
        v.push(self.head_width(t));
        v
    }

    fn check_task(&self, t: usize) -> Result<()> {
        if t < self.tasks.len() {
            Ok(())
        } else {
            Err(Error::arg(format!("task {t} unknown; {} tasks learned", self.tasks.len())))
        }
    }

    pub fn trunk(&self) -> &[Dense] {
        &self.trunk
    }

    pub fn head(&self, t: usize) -> Result<&Dense> {
        self.check_task(t)?;
        Ok(match self.cfg.head {
            HeadLayout::Shared { .. } => &self.heads[0],
            HeadLayout::PerTask { .. } => &self.heads[t],
        })
    }

    /// Context key of task `t` on layer `l` (the head is the last layer).
    pub fn key(&self, t: usize, l: usize) -> Result<&PspContextKey> {
        self.check_task(t)?;
        self.tasks[t].keys.get(l).ok_or_else(|| Error::arg(format!("layer {l} out of range")))
    }

    pub fn bd(&self, t: usize, l: usize) -> Result<&BdBias> {
        self.check_task(t)?;
        self.tasks[t].bd.get(l).ok_or_else(|| Error::arg(format!("layer {l} out of range")))
    }

    /// Register task `t` with freshly sampled keys and zero biases, without
    /// training. Head weights for a per-task layout are initialized here.
    pub fn add_task(&mut self) -> Result<usize> {
        let t = self.tasks.len();
        if let Some(cap) = self.cfg.head.task_capacity() {
            if t >= cap {
                return Err(Error::config(format!("head layout only has {cap} task heads")));
            }
        }
        let n_layers = self.trunk.len() + 1;
        let mut rng = seed::rng(self.cfg.seed, "psp-key", t as u64);
        let keys = self
            .layer_inputs()
            .into_iter()
            .enumerate()
            .map(|(l, w)| {
                let keyed = self.cfg.use_keys && (l + 1 < n_layers || self.cfg.key_head_input);
                if keyed {
                    PspContextKey::sample(w, &mut rng)
                } else {
                    PspContextKey::ones(w)
                }
            })
            .collect();
        let bd = self
            .layer_outputs(t)
            .into_iter()
            .map(|w| BdBias(Array1::zeros(w)))
            .collect();
        if let HeadLayout::PerTask { .. } = self.cfg.head {
            let mut hrng = seed::rng(self.cfg.seed, "psp-head", t as u64);
            self.heads.push(Dense::new(self.feature_width(), self.head_width(t), &mut hrng));
        }
        self.tasks.push(TaskParams { keys, bd });
        Ok(t)
    }

    /// Replace the parameters of task `t` (used to build identity
    /// configurations and fixtures).
    pub fn set_task_params(&mut self, t: usize, keys: Vec<PspContextKey>, bd: Vec<BdBias>) -> Result<()> {
        self.check_task(t)?;
        let ins = self.layer_inputs();
        let outs = self.layer_outputs(t);
        if keys.len() != ins.len() || keys.iter().zip(&ins).any(|(k, &w)| k.len() != w) {
            return Err(Error::arg("key widths do not match the layer inputs"));
        }
        if bd.len() != outs.len() || bd.iter().zip(&outs).any(|(b, &w)| b.0.len() != w) {
            return Err(Error::arg("bias widths do not match the layer outputs"));
        }
        self.tasks[t] = TaskParams { keys, bd };
        Ok(())
    }

    pub fn trunk_mut(&mut self) -> &mut [Dense] {
        &mut self.trunk
    }

    pub fn head_mut(&mut self, t: usize) -> Result<&mut Dense> {
        self.check_task(t)?;
        Ok(match self.cfg.head {
            HeadLayout::Shared { .. } => &mut self.heads[0],
            HeadLayout::PerTask { .. } => &mut self.heads[t],
        })
    }

    fn head_index(&self, t: usize) -> usize {
        match self.cfg.head {
            HeadLayout::Shared { .. } => 0,
            HeadLayout::PerTask { .. } => t,
        }
    }

    fn forward_cached(&self, x: ArrayView2<'_, f32>, t: usize) -> ForwardCache {
        let params = &self.tasks[t];
        let mut inputs = Vec::with_capacity(self.trunk.len() + 1);
        let mut activations = Vec::with_capacity(self.trunk.len());
        let mut h = x.to_owned();
        for (l, layer) in self.trunk.iter().enumerate() {
            let keyed = params.keys[l].apply(h.view());
            let mut z = layer.forward(keyed.view());
            z += &params.bd[l].0;
            nn::relu_inplace(&mut z);
            inputs.push(keyed);
            h = z.clone();
            activations.push(z);
        }
        let l = self.trunk.len();
        let keyed = params.keys[l].apply(h.view());
        let mut logits = self.heads[self.head_index(t)].forward(keyed.view());
        logits += &params.bd[l].0;
        inputs.push(keyed);
        ForwardCache {
            inputs,
            activations,
            logits,
        }
    }

    /// Logits of a batch under task `t`'s keys and biases.
    pub fn forward_batch(&self, x: ArrayView2<'_, f32>, t: usize) -> Result<Array2<f32>> {
        self.check_task(t)?;
        if x.ncols() != self.cfg.input_dim {
            return Err(Error::arg(format!(
                "input has {} features, classifier expects {}",
                x.ncols(),
                self.cfg.input_dim
            )));
        }
        Ok(self.forward_cached(x, t).logits)
    }

    pub fn forward(&self, x: &[f32], t: usize) -> Result<Vec<f32>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::arg(e.to_string()))?;
        Ok(self.forward_batch(view, t)?.into_raw_vec_and_offset().0)
    }

    pub fn predict_fine(&self, x: &[f32], t: usize) -> Result<usize> {
        Ok(argmax(&self.forward(x, t)?))
    }

    pub fn gradients(&self, x: ArrayView2<'_, f32>, labels: &[usize], t: usize) -> Result<(f64, PspBdGrads)> {
        self.check_task(t)?;
        Ok(self.gradients_unchecked(x, labels, t))
    }

    fn gradients_unchecked(&self, x: ArrayView2<'_, f32>, labels: &[usize], t: usize) -> (f64, PspBdGrads) {
        let cache = self.forward_cached(x, t);
        let params = &self.tasks[t];
        let (loss, d_logits) = cross_entropy(cache.logits.view(), labels, 1.0);
        let n = self.trunk.len();
        let head = &self.heads[self.head_index(t)];
        let head_grads = head.param_grads(cache.inputs[n].view(), d_logits.view());
        let mut bd = vec![Array1::zeros(0); n + 1];
        bd[n] = head_grads.1.clone();
        let mut d_h = head.input_grad(d_logits.view());
        d_h *= &ndarray::ArrayView1::from(params.keys[n].as_slice());
        let mut trunk = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); n];
        for l in (0..n).rev() {
            nn::relu_backward(&mut d_h, cache.activations[l].view());
            let (dw, db) = self.trunk[l].param_grads(cache.inputs[l].view(), d_h.view());
            if l > 0 {
                let mut d_prev = self.trunk[l].input_grad(d_h.view());
                d_prev *= &ndarray::ArrayView1::from(params.keys[l].as_slice());
                d_h = d_prev;
            }
            bd[l] = db.clone();
            trunk[l] = (dw, db);
        }
        (
            loss,
            PspBdGrads {
                trunk,
                head: head_grads,
                bd,
            },
        )
    }

    /// Register task `t` and train it. Earlier tasks' keys and biases are not
    /// touched; shared weights and this task's biases are updated.
    pub fn train_task(&mut self, train: &TaskDataset, t: usize) -> Result<TrainStats> {
        if t != self.tasks.len() {
            return Err(Error::arg(format!("expected task {}, got {t}", self.tasks.len())));
        }
        if train.is_empty() {
            return Err(Error::arg("training set is empty"));
        }
        if train.dim() != self.cfg.input_dim {
            return Err(Error::arg(format!(
                "training data has dimension {}, classifier expects {}",
                train.dim(),
                self.cfg.input_dim
            )));
        }
        if train.num_classes() > self.head_width(t) {
            return Err(Error::arg(format!(
                "task {t} has {} classes but its head has {} nodes",
                train.num_classes(),
                self.head_width(t)
            )));
        }
        if self.cfg.epochs == 0 || self.cfg.lr <= 0.0 {
            return Err(Error::arg("epochs and learning rate must be positive"));
        }
        self.add_task()?;
        let sgd = Sgd {
            lr: self.cfg.lr,
            momentum: self.cfg.momentum,
        };
        let mut vel_trunk: Vec<(Array2<f32>, Array1<f32>)> = self
            .trunk
            .iter()
            .map(|d| (Array2::zeros(d.w.raw_dim()), Array1::zeros(d.b.len())))
            .collect();
        let hi = self.head_index(t);
        let mut vel_head = (Array2::zeros(self.heads[hi].w.raw_dim()), Array1::zeros(self.heads[hi].b.len()));
        let mut vel_bd: Vec<Array1<f32>> = self.tasks[t].bd.iter().map(|b| Array1::zeros(b.0.len())).collect();

        let mut rng = seed::rng(self.cfg.seed, "psp-shuffle", t as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut last_loss = 0.0;
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(self.cfg.batch_size) {
                let rows: Vec<&[f32]> = chunk.iter().map(|&i| train.sample(i)).collect();
                let x = nn::gather_rows(&rows);
                let labels: Vec<usize> = chunk.iter().map(|&i| train.label(i) as usize).collect();
                let (loss, g) = self.gradients_unchecked(x.view(), &labels, t);
                epoch_loss += loss;
                batches += 1;
                for ((layer, vel), (dw, db)) in self.trunk.iter_mut().zip(&mut vel_trunk).zip(&g.trunk) {
                    sgd.step2(&mut layer.w, dw, &mut vel.0);
                    sgd.step1(&mut layer.b, db, &mut vel.1);
                }
                sgd.step2(&mut self.heads[hi].w, &g.head.0, &mut vel_head.0);
                sgd.step1(&mut self.heads[hi].b, &g.head.1, &mut vel_head.1);
                if self.cfg.use_bd {
                    for ((bias, vel), grad) in self.tasks[t].bd.iter_mut().zip(&mut vel_bd).zip(&g.bd) {
                        sgd.step1(&mut bias.0, grad, vel);
                    }
                }
            }
            last_loss = epoch_loss / batches.max(1) as f64;
        }
        let train_accuracy = self.accuracy(train, t)?;
        Ok(TrainStats {
            final_loss: last_loss,
            train_accuracy,
        })
    }

    /// Fraction of `data` classified correctly under task `t`.
    pub fn accuracy(&self, data: &TaskDataset, t: usize) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let preds = self.predict_batch(data.view(), t)?;
        let hits = preds
            .iter()
            .zip(data.labels())
            .filter(|(p, &y)| **p == y as usize)
            .count();
        Ok(hits as f64 / data.len() as f64)
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f32>, t: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(x.nrows());
        for chunk in x.axis_chunks_iter(Axis(0), 512) {
            let logits = self.forward_batch(chunk, t)?;
            out.extend(logits.outer_iter().map(|r| argmax(r.as_slice().expect("contiguous"))));
        }
        Ok(out)
    }

    /// Serialized key and bias state of task `t` (freeze checks).
    pub fn task_state(&self, t: usize) -> Result<Vec<u8>> {
        self.check_task(t)?;
        let mut out = Vec::new();
        for k in &self.tasks[t].keys {
            out.extend(k.as_slice().iter().flat_map(|v| v.to_le_bytes()));
        }
        for b in &self.tasks[t].bd {
            out.extend(b.0.iter().flat_map(|v| v.to_le_bytes()));
        }
        Ok(out)
    }

    /// Bytes to store every task's keys, one bit per entry padded to 32-bit
    /// words per task. Zero when keys are disabled.
    pub fn key_bytes(&self) -> u64 {
        if !self.cfg.use_keys {
            return 0;
        }
        let per_task: usize = self
            .layer_inputs()
            .iter()
            .enumerate()
            .filter(|(l, _)| *l < self.trunk.len() || self.cfg.key_head_input)
            .map(|(_, w)| w)
            .sum();
        (self.tasks.len() * per_task.div_ceil(32) * 4) as u64
    }

    /// Bytes of all tasks' BD biases at four bytes per value.
    pub fn bd_bytes(&self) -> u64 {
        if !self.cfg.use_bd {
            return 0;
        }
        (0..self.tasks.len())
            .map(|t| self.layer_outputs(t).iter().sum::<usize>() as u64 * 4)
            .sum()
    }

    /// Bytes of output heads beyond the first (per-task layouts only).
    pub fn extra_head_bytes(&self) -> u64 {
        self.heads.iter().skip(1).map(|h| h.param_count() as u64 * 4).sum()
    }

    pub fn to_blob(&self) -> Blob {
        let mut blob = Blob::new("pspbd");
        blob.header.push(self.cfg.input_dim as u64);
        blob.header.push(self.cfg.hidden.len() as u64);
        blob.header.extend(self.cfg.hidden.iter().map(|&h| h as u64));
        blob.header.push(self.tasks.len() as u64);
        blob.header.push(self.heads.len() as u64);
        for d in self.trunk.iter().chain(&self.heads) {
            blob.floats.extend(d.w.iter());
            blob.floats.extend(d.b.iter());
        }
        for tp in &self.tasks {
            for b in &tp.bd {
                blob.floats.extend(b.0.iter());
            }
            for k in &tp.keys {
                for chunk in k.as_slice().chunks(32) {
                    let mut word = 0u32;
                    for (i, &s) in chunk.iter().enumerate() {
                        if s > 0.0 {
                            word |= 1 << i;
                        }
                    }
                    blob.labels.push(word);
                }
            }
        }
        blob
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Split;
    use ndarray::array;

    fn tiny(head: HeadLayout) -> PspBdClassifier {
        let mut cfg = PspBdConfig::new(3, vec![4], head);
        cfg.seed = 11;
        PspBdClassifier::new(cfg).unwrap()
    }

    #[test]
    fn identity_configuration_is_a_plain_mlp() {
        let mut clf = tiny(HeadLayout::shared(2));
        clf.add_task().unwrap();
        clf.set_task_params(
            0,
            vec![PspContextKey::ones(3), PspContextKey::ones(4)],
            vec![BdBias(Array1::zeros(4)), BdBias(Array1::zeros(2))],
        )
        .unwrap();
        let x = [0.2f32, -0.7, 1.1];
        let h: Vec<f32> = (0..4)
            .map(|j| {
                let z: f32 = (0..3).map(|i| x[i] * clf.trunk()[0].w[[i, j]]).sum::<f32>() + clf.trunk()[0].b[j];
                z.max(0.0)
            })
            .collect();
        let head = clf.head(0).unwrap();
        let expected: Vec<f32> = (0..2)
            .map(|k| (0..4).map(|j| h[j] * head.w[[j, k]]).sum::<f32>() + head.b[k])
            .collect();
        let got = clf.forward(&x, 0).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn flipping_a_dead_unit_key_changes_nothing() {
        let mut clf = tiny(HeadLayout::shared(2));
        clf.add_task().unwrap();
        let x = [0.5f32, 0.1, -0.3];
        // Input unit 1 contributes nothing once its outgoing weights are zero.
        clf.trunk_mut()[0].w.row_mut(1).fill(0.0);
        let before = clf.forward(&x, 0).unwrap();
        let mut keys = vec![clf.key(0, 0).unwrap().clone(), clf.key(0, 1).unwrap().clone()];
        let mut signs = keys[0].as_slice().to_vec();
        signs[1] = -signs[1];
        keys[0] = PspContextKey::from_signs(signs).unwrap();
        let bd = vec![clf.bd(0, 0).unwrap().clone(), clf.bd(0, 1).unwrap().clone()];
        clf.set_task_params(0, keys, bd).unwrap();
        assert_eq!(before, clf.forward(&x, 0).unwrap());
    }

    #[test]
    fn unknown_task_is_an_argument_error() {
        let clf = tiny(HeadLayout::shared(2));
        assert!(matches!(clf.forward(&[0.0; 3], 0), Err(Error::Argument(_))));
    }

    #[test]
    fn keys_are_signs_and_seeded() {
        let mut a = tiny(HeadLayout::shared(2));
        let mut b = tiny(HeadLayout::shared(2));
        a.add_task().unwrap();
        b.add_task().unwrap();
        assert_eq!(a.key(0, 0).unwrap(), b.key(0, 0).unwrap());
        assert!(a.key(0, 1).unwrap().as_slice().iter().all(|&s| s == 1.0 || s == -1.0));
        assert!(PspContextKey::from_signs(vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn earlier_task_state_is_frozen() {
        let mut clf = tiny(HeadLayout::shared(2));
        clf.cfg.epochs = 3;
        let data = |t| {
            TaskDataset::new(t, Split::Train, 3, 2, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.5, 0.5, 0.5, 0.1, 0.9, 0.2], vec![0, 1, 0, 1])
                .unwrap()
        };
        clf.train_task(&data(0), 0).unwrap();
        let snapshot = clf.task_state(0).unwrap();
        clf.train_task(&data(1), 1).unwrap();
        assert_eq!(snapshot, clf.task_state(0).unwrap());
        assert!(clf.train_task(&data(1), 5).is_err());
    }

    #[test]
    fn per_task_heads_grow() {
        let mut clf = tiny(HeadLayout::per_task(vec![2, 3]));
        clf.add_task().unwrap();
        clf.add_task().unwrap();
        assert_eq!(clf.forward(&[0.0; 3], 1).unwrap().len(), 3);
        assert!(clf.add_task().is_err());
        assert_eq!(clf.extra_head_bytes(), (4 * 3 + 3) * 4);
    }

    #[test]
    fn memory_counts() {
        let mut clf = PspBdClassifier::new(PspBdConfig::permuted_mnist()).unwrap();
        for _ in 0..25 {
            clf.add_task().unwrap();
        }
        // (784 + 256 + 256) key bits per task → 41 words.
        assert_eq!(clf.key_bytes(), 25 * 41 * 4);
        assert_eq!(clf.bd_bytes(), 25 * (256 + 256 + 10) * 4);
        assert_eq!(clf.extra_head_bytes(), 0);
        let plain = PspBdClassifier::new(PspBdConfig::permuted_mnist().plain()).unwrap();
        assert_eq!(plain.key_bytes() + plain.bd_bytes(), 0);
    }

    #[test]
    fn forward_batch_matches_single() {
        let mut clf = tiny(HeadLayout::shared(2));
        clf.add_task().unwrap();
        let x = array![[0.1f32, 0.2, 0.3], [-1.0, 0.0, 2.0]];
        let batch = clf.forward_batch(x.view(), 0).unwrap();
        for (i, row) in x.outer_iter().enumerate() {
            let single = clf.forward(row.as_slice().unwrap(), 0).unwrap();
            assert_eq!(batch.row(i).to_vec(), single);
        }
    }
}
