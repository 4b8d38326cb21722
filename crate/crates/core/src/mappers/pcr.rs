//! Perceptron task mapper trained with coreset replay.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{expect_next_task, subsample_indices, Query, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::coreset::Coreset;
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;
use crate::nn::{argmax, cross_entropy, gather_rows, relu_backward, relu_inplace, Dense};
use crate::seed;

/// Weight of the replay term: `λ_mem = T_memory / T_all`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayLossWeights {
    pub lambda_mem: f64,
    pub t_memory: usize,
    pub t_new: usize,
    pub t_all: usize,
}

impl ReplayLossWeights {
    pub fn new(t_memory: usize, t_new: usize) -> Self {
        let t_all = t_memory + t_new;
        ReplayLossWeights {
            lambda_mem: if t_all == 0 { 0.0 } else { t_memory as f64 / t_all as f64 },
            t_memory,
            t_new,
            t_all,
        }
    }
}

/// Perceptron with an optional ReLU hidden layer and one output per task.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowPerceptron {
    layers: Vec<Dense>,
}

/// One weighted cross-entropy term of the training loss.
pub struct LossTerm<'a> {
    pub x: ArrayView2<'a, f32>,
    pub labels: &'a [usize],
    pub weight: f32,
}

impl ShallowPerceptron {
    pub fn new(inputs: usize, hidden: Option<usize>, outputs: usize, rng: &mut impl Rng) -> Self {
        let layers = match hidden {
            Some(h) => vec![Dense::new(inputs, h, rng), Dense::zeros(h, outputs)],
            None => vec![Dense::zeros(inputs, outputs)],
        };
        ShallowPerceptron { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Self {
        ShallowPerceptron { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Append one zero-initialized output node; existing rows are kept.
    pub fn grow_output(&mut self) {
        let out = self.layers.last_mut().expect("at least one layer");
        let (i, o) = out.w.dim();
        let mut w = Array2::zeros((i, o + 1));
        w.slice_mut(ndarray::s![.., ..o]).assign(&out.w);
        let mut b = Array1::zeros(o + 1);
        b.slice_mut(ndarray::s![..o]).assign(&out.b);
        out.w = w;
        out.b = b;
    }

    /// Append `extra` inputs with He-uniform weights. Existing weights are
    /// kept, so the function is unchanged while the new inputs are zero.
    pub fn grow_input(&mut self, extra: usize, rng: &mut impl Rng) {
        let first = &mut self.layers[0];
        let (i, o) = first.w.dim();
        let bound = (6.0 / (i + extra).max(1) as f32).sqrt();
        let mut w = Array2::from_shape_simple_fn((i + extra, o), || rng.gen_range(-bound..bound));
        w.slice_mut(ndarray::s![..i, ..]).assign(&first.w);
        first.w = w;
    }

    fn forward_all(&self, x: ArrayView2<'_, f32>) -> Vec<Array2<f32>> {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut cur = self.layers[0].forward(x);
        for l in &self.layers[1..] {
            relu_inplace(&mut cur);
            let next = l.forward(cur.view());
            acts.push(cur);
            cur = next;
        }
        acts.push(cur);
        acts
    }

    pub fn logits(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        self.forward_all(x).pop().expect("output layer")
    }

    pub fn predict(&self, x: &[f32]) -> usize {
        let l = self.logits(ArrayView2::from_shape((1, x.len()), x).expect("row"));
        argmax(l.row(0).as_slice().expect("contiguous"))
    }

    /// Sum of weighted mean cross-entropies and per-layer `(dw, db)`.
    pub fn loss_and_grads(&self, terms: &[LossTerm<'_>]) -> (f64, Vec<(Array2<f32>, Array1<f32>)>) {
        let mut grads: Vec<(Array2<f32>, Array1<f32>)> = self
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.len())))
            .collect();
        let mut loss = 0.0;
        for term in terms {
            if term.labels.is_empty() || term.weight == 0.0 {
                continue;
            }
            let acts = self.forward_all(term.x);
            let (l, mut d) = cross_entropy(acts.last().expect("output").view(), term.labels, term.weight);
            loss += l;
            for k in (0..self.layers.len()).rev() {
                let input = if k == 0 { term.x.view() } else { acts[k - 1].view() };
                let (dw, db) = self.layers[k].param_grads(input, d.view());
                grads[k].0 += &dw;
                grads[k].1 += &db;
                if k > 0 {
                    let mut dx = self.layers[k].input_grad(d.view());
                    relu_backward(&mut dx, acts[k - 1].view());
                    d = dx;
                }
            }
        }
        (loss, grads)
    }

    pub fn apply(&mut self, grads: &[(Array2<f32>, Array1<f32>)], lr: f32) {
        for (l, (dw, db)) in self.layers.iter_mut().zip(grads) {
            l.w.scaled_add(-lr, dw);
            l.b.scaled_add(-lr, db);
        }
    }

    pub fn to_floats(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend(l.w.iter().copied());
            v.extend(l.b.iter().copied());
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcrConfig {
    /// Coreset slots shared by all tasks.
    pub coreset: usize,
    pub hidden: Option<usize>,
    pub epochs: usize,
    pub lr: f32,
    pub batch_size: usize,
    /// Cap on new-task samples used for training (`None` = all).
    pub max_samples_per_task: Option<usize>,
    pub seed: u64,
}

impl PcrConfig {
    pub fn pcr() -> Self {
        PcrConfig {
            coreset: 150,
            hidden: None,
            epochs: 20,
            lr: 0.01,
            batch_size: 32,
            max_samples_per_task: None,
            seed: 0,
        }
    }

    pub fn pcre() -> Self {
        PcrConfig {
            coreset: 120,
            hidden: Some(64),
            ..Self::pcr()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::arg(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::arg("epochs and batch size must be positive"));
        }
        if self.coreset == 0 {
            return Err(Error::arg("coreset needs at least one slot"));
        }
        Ok(())
    }
}

/// One task of replay training: minibatches of the new task (label `t`)
/// each paired with an equally sized uniform draw from `memory`.
pub(crate) fn train_replay_task(
    p: &mut ShallowPerceptron,
    new_x: &Array2<f32>,
    t: usize,
    memory: Option<(&Array2<f32>, &[usize])>,
    weights: ReplayLossWeights,
    cfg: &PcrConfig,
    purpose: &str,
) {
    let mut rng = seed::rng(cfg.seed, purpose, t as u64);
    let mut order: Vec<usize> = (0..new_x.nrows()).collect();
    let new_labels = vec![t; cfg.batch_size];
    let lambda = weights.lambda_mem as f32;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let xb = new_x.select(Axis(0), chunk);
            let mut terms = vec![LossTerm {
                x: xb.view(),
                labels: &new_labels[..chunk.len()],
                weight: 1.0,
            }];
            let mem_batch;
            let mem_labels: Vec<usize>;
            if let Some((mx, ml)) = memory.filter(|(mx, _)| mx.nrows() > 0) {
                let idx: Vec<usize> = (0..cfg.batch_size).map(|_| rng.gen_range(0..mx.nrows())).collect();
                mem_batch = mx.select(Axis(0), &idx);
                mem_labels = idx.iter().map(|&i| ml[i]).collect();
                terms.push(LossTerm {
                    x: mem_batch.view(),
                    labels: &mem_labels,
                    weight: lambda,
                });
            }
            let (_, grads) = p.loss_and_grads(&terms);
            p.apply(&grads, cfg.lr);
        }
    }
}

pub(crate) fn coreset_matrix(c: &Coreset) -> (Array2<f32>, Vec<usize>) {
    let rows: Vec<(&[f32], u32)> = c.iter().collect();
    let feats: Vec<&[f32]> = rows.iter().map(|r| r.0).collect();
    (gather_rows(&feats), rows.iter().map(|r| r.1 as usize).collect())
}

#[derive(Debug, Clone)]
pub struct PcrMapper {
    cfg: PcrConfig,
    perceptron: Option<ShallowPerceptron>,
    coreset: Option<Coreset>,
    history: Vec<ReplayLossWeights>,
}

impl PcrMapper {
    pub fn new(cfg: PcrConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PcrMapper {
            cfg,
            perceptron: None,
            coreset: None,
            history: Vec::new(),
        })
    }

    pub fn perceptron(&self) -> Option<&ShallowPerceptron> {
        self.perceptron.as_ref()
    }

    pub fn coreset(&self) -> Option<&Coreset> {
        self.coreset.as_ref()
    }

    /// Replay weights used at each learned task.
    pub fn lambda_history(&self) -> &[ReplayLossWeights] {
        &self.history
    }
}

impl TaskMapper for PcrMapper {
    fn name(&self) -> String {
        format!("pcr(n={})", self.cfg.coreset)
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.history.len())?;
        let t = ctx.task_id;
        let dim = ctx.train.dim();
        let coreset = self
            .coreset
            .get_or_insert_with(|| Coreset::new(self.cfg.coreset, dim, seed::derive(self.cfg.seed, "pcr-coreset", 0)));
        if coreset.num_buckets() + 1 > coreset.capacity() {
            return Err(Error::config(format!(
                "coreset of {} slots cannot hold {} tasks",
                coreset.capacity(),
                t + 1
            )));
        }
        let p = self.perceptron.get_or_insert_with(|| {
            let mut rng = seed::rng(self.cfg.seed, "pcr-init", 0);
            ShallowPerceptron::new(dim, self.cfg.hidden, 0, &mut rng)
        });
        p.grow_output();
        let weights = ReplayLossWeights::new(coreset.num_buckets(), 1);
        let idx = subsample_indices(ctx.train.len(), self.cfg.max_samples_per_task, self.cfg.seed, "pcr-subsample", t);
        let new_x = gather_rows(&idx.iter().map(|&i| ctx.train.sample(i)).collect::<Vec<_>>());
        let (mx, ml) = coreset_matrix(coreset);
        train_replay_task(p, &new_x, t, Some((&mx, &ml)), weights, &self.cfg, "pcr-train");
        coreset.insert_task(ctx.train, t)?;
        self.history.push(weights);
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        let p = self.perceptron.as_ref().ok_or_else(|| Error::state("PCR is untrained"))?;
        Ok(p.predict(query.features))
    }

    fn num_tasks(&self) -> usize {
        self.history.len()
    }

    fn memory(&self) -> MemoryLedger {
        let p = self.perceptron.as_ref().map_or(0, |p| 4 * p.param_count() as u64);
        let c = self.coreset.as_ref().map_or(0, Coreset::bytes);
        MemoryLedger::new().with("mapper", p).with("coreset", c)
    }

    fn to_blob(&self) -> Blob {
        replay_blob("pcr", self.perceptron.as_ref(), self.coreset.as_ref())
    }
}

pub(crate) fn replay_blob(kind: &str, p: Option<&ShallowPerceptron>, c: Option<&Coreset>) -> Blob {
    let mut blob = Blob::new(kind);
    if let Some(p) = p {
        blob.header.push(p.layers().len() as u64);
        for l in p.layers() {
            blob.header.push(l.inputs() as u64);
            blob.header.push(l.outputs() as u64);
        }
        blob.floats = p.to_floats();
    }
    if let Some(c) = c {
        let cb = c.to_blob();
        blob.header.extend(cb.header);
        blob.floats.extend(cb.floats);
        blob.labels = cb.labels;
    }
    blob
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Split, TaskDataset};
    use rand::Rng;

    fn toy_task(t: usize, n: usize, dim: usize, rng: &mut impl Rng) -> TaskDataset {
        let mut feats = Vec::with_capacity(n * dim);
        for _ in 0..n {
            for d in 0..dim {
                let centre = if d == t % dim { 3.0 } else { 0.0 };
                feats.push(centre + rng.gen_range(-0.5..0.5));
            }
        }
        TaskDataset::new(t, Split::Train, dim, 1, feats, vec![0; n]).unwrap()
    }

    #[test]
    fn lambda_formula() {
        let w = ReplayLossWeights::new(3, 1);
        assert_eq!(w.lambda_mem, 0.75);
        assert_eq!(w.t_all, 4);
        assert_eq!(ReplayLossWeights::new(0, 1).lambda_mem, 0.0);
    }

    #[test]
    fn config_errors() {
        assert!(PcrMapper::new(PcrConfig { lr: 0.0, ..PcrConfig::pcr() }).is_err());
        assert!(PcrMapper::new(PcrConfig { epochs: 0, ..PcrConfig::pcr() }).is_err());
        let m = PcrMapper::new(PcrConfig::pcr()).unwrap();
        assert!(matches!(m.predict(&Query::new(&[0.0])), Err(Error::State(_))));
    }

    #[test]
    fn single_task_always_predicts_zero_and_schedule_tracks_tasks() {
        let mut rng = seed::rng(0, "pcr-test", 0);
        let mut m = PcrMapper::new(PcrConfig { coreset: 20, epochs: 5, ..PcrConfig::pcr() }).unwrap();
        m.learn_task(&TaskContext::new(0, &toy_task(0, 50, 4, &mut rng))).unwrap();
        for _ in 0..10 {
            let x: Vec<f32> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            assert_eq!(m.predict(&Query::new(&x)).unwrap(), 0);
        }
        let mut rows = Vec::new();
        for t in 1..4 {
            let before = m.perceptron().unwrap().layers()[0].w.clone();
            m.learn_task(&TaskContext::new(t, &toy_task(t, 50, 4, &mut rng))).unwrap();
            let after = &m.perceptron().unwrap().layers()[0].w;
            assert_eq!(after.ncols(), t + 1);
            rows.push((before, after.clone()));
        }
        for (t, w) in m.lambda_history().iter().enumerate() {
            assert_eq!(w.t_memory, t);
            assert_eq!(w.lambda_mem, t as f64 / (t + 1) as f64);
        }
        let acc = (0..4)
            .map(|t| {
                let d = toy_task(t, 50, 4, &mut rng);
                d.rows().filter(|r| m.predict(&Query::new(r)).unwrap() == t).count()
            })
            .sum::<usize>();
        assert!(acc as f64 / 200.0 > 0.95, "accuracy {}", acc as f64 / 200.0);
        assert_eq!(m.coreset().unwrap().bucket_sizes(), vec![5; 4]);
        assert_eq!(m.memory().total(), 4 * (4 * 4 + 4) as u64 + 20 * (4 * 4 + 4));
    }

    #[test]
    fn growth_preserves_existing_function() {
        let mut rng = seed::rng(1, "pcr-test", 0);
        let mut p = ShallowPerceptron::new(3, Some(4), 2, &mut rng);
        for l in p.layers_mut() {
            l.w.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
            l.b.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        }
        let x = Array2::from_shape_vec((2, 3), vec![0.1, -0.4, 0.9, 1.0, 0.3, -0.2]).unwrap();
        let before = p.logits(x.view());
        p.grow_output();
        let after = p.logits(x.view());
        assert_eq!(after.slice(ndarray::s![.., ..2]), before);
        p.grow_input(2, &mut rng);
        let mut wide = Array2::zeros((2, 5));
        wide.slice_mut(ndarray::s![.., ..3]).assign(&x);
        assert_eq!(p.logits(wide.view()), after);
    }

    #[test]
    fn predict_matches_matrix_oracle() {
        let mut rng = seed::rng(2, "pcr-test", 0);
        let mut p = ShallowPerceptron::new(5, None, 4, &mut rng);
        p.layers_mut()[0].w.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        p.layers_mut()[0].b.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        for _ in 0..100 {
            let x: Vec<f32> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let l = &p.layers()[0];
            let logits: Vec<f64> = (0..4)
                .map(|j| f64::from(l.b[j]) + (0..5).map(|i| f64::from(x[i]) * f64::from(l.w[[i, j]])).sum::<f64>())
                .collect();
            assert_eq!(p.predict(&x), crate::nn::argmax_f64(&logits));
        }
    }
}
