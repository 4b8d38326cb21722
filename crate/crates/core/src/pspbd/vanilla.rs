//! Task-independent baseline: one plain network trained on each new task
//! with class-balanced coreset samples mixed into every minibatch.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{HeadLayout, PspBdClassifier, PspBdConfig};
use crate::coreset::Coreset;
use crate::error::{Error, Result};
use crate::features::TaskDataset;
use crate::metrics::{MemoryLedger, TaskCounts};
use crate::nn::{gather_rows, Sgd};
use crate::seed;

/// Output arrangement without task identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VanillaLayout {
    /// One output node per (task, class) pair.
    PerClass,
    /// Every task reuses the same class nodes.
    SharedHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanillaReplayConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes_per_task: usize,
    pub max_tasks: usize,
    pub layout: VanillaLayout,
    pub coreset: usize,
    pub epochs: usize,
    pub lr: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub seed: u64,
}

impl VanillaReplayConfig {
    pub fn permuted_mnist(max_tasks: usize) -> Self {
        VanillaReplayConfig {
            input_dim: 784,
            hidden: vec![256, 256],
            classes_per_task: 10,
            max_tasks,
            layout: VanillaLayout::PerClass,
            coreset: 6400,
            epochs: 20,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }

    fn outputs(&self) -> usize {
        match self.layout {
            VanillaLayout::PerClass => self.classes_per_task * self.max_tasks,
            VanillaLayout::SharedHead => self.classes_per_task,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VanillaReplay {
    cfg: VanillaReplayConfig,
    net: PspBdClassifier,
    coreset: Coreset,
    tasks: usize,
}

impl VanillaReplay {
    pub fn new(cfg: VanillaReplayConfig) -> Result<Self> {
        if cfg.epochs == 0 || !(cfg.lr > 0.0) || cfg.batch_size == 0 {
            return Err(Error::arg("epochs, learning rate and batch size must be positive"));
        }
        let mut ncfg = PspBdConfig::new(cfg.input_dim, cfg.hidden.clone(), HeadLayout::shared(cfg.outputs())).plain();
        ncfg.seed = cfg.seed;
        let mut net = PspBdClassifier::new(ncfg)?;
        net.add_task()?;
        let coreset = Coreset::new(cfg.coreset, cfg.input_dim, seed::derive(cfg.seed, "vanilla-coreset", 0));
        Ok(VanillaReplay { cfg, net, coreset, tasks: 0 })
    }

    pub fn coreset(&self) -> &Coreset {
        &self.coreset
    }

    pub fn network(&self) -> &PspBdClassifier {
        &self.net
    }

    fn target(&self, t: usize, y: u32) -> u32 {
        match self.cfg.layout {
            VanillaLayout::PerClass => (t * self.cfg.classes_per_task) as u32 + y,
            VanillaLayout::SharedHead => y,
        }
    }

    pub fn train_task(&mut self, train: &TaskDataset, t: usize) -> Result<()> {
        if t != self.tasks || t >= self.cfg.max_tasks {
            return Err(Error::arg(format!("cannot train task {t} after {} tasks", self.tasks)));
        }
        if train.is_empty() {
            return Err(Error::arg("training set is empty"));
        }
        let sgd = Sgd {
            lr: self.cfg.lr,
            momentum: self.cfg.momentum,
        };
        let mut vel: Vec<(Array2<f32>, Array1<f32>)> = self
            .net
            .trunk()
            .iter()
            .chain(std::iter::once(self.net.head(0)?))
            .map(|d| (Array2::zeros(d.w.raw_dim()), Array1::zeros(d.b.len())))
            .collect();
        let mut rng = seed::rng(self.cfg.seed, "vanilla-shuffle", t as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let targets: Vec<usize> = (0..train.len()).map(|i| self.target(t, train.label(i)) as usize).collect();
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let rows: Vec<&[f32]> = chunk.iter().map(|&i| train.sample(i)).collect();
                let mut x = gather_rows(&rows);
                let mut labels: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
                if !self.coreset.is_empty() {
                    let mem = self.coreset.minibatch(chunk.len(), &mut rng)?;
                    let mx = gather_rows(&mem.iter().map(|m| m.0).collect::<Vec<_>>());
                    x = concatenate(Axis(0), &[x.view(), mx.view()]).map_err(|e| Error::state(e.to_string()))?;
                    labels.extend(mem.iter().map(|m| m.1 as usize));
                }
                let (_, g) = self.net.gradients(x.view(), &labels, 0)?;
                let n = self.net.trunk().len();
                for (l, (dw, db)) in g.trunk.iter().enumerate() {
                    let layer = &mut self.net.trunk_mut()[l];
                    sgd.step2(&mut layer.w, dw, &mut vel[l].0);
                    sgd.step1(&mut layer.b, db, &mut vel[l].1);
                }
                let head = self.net.head_mut(0)?;
                sgd.step2(&mut head.w, &g.head.0, &mut vel[n].0);
                sgd.step1(&mut head.b, &g.head.1, &mut vel[n].1);
            }
        }
        // Class-balanced buckets keyed by output node.
        let mut groups = Vec::new();
        for c in 0..train.num_classes() as u32 {
            let idx: Vec<usize> = (0..train.len()).filter(|&i| train.label(i) == c).collect();
            if idx.is_empty() {
                continue;
            }
            let key = (t * self.cfg.classes_per_task) as u32 + c;
            let payload = vec![self.target(t, c); idx.len()];
            groups.push((key, idx, payload));
        }
        self.coreset.insert_groups(train, groups)?;
        self.tasks += 1;
        Ok(())
    }

    /// Class prediction without task identity.
    pub fn predict(&self, x: &[f32]) -> Result<usize> {
        self.net.predict_fine(x, 0)
    }

    /// Counts for test task `t`; task hits are not applicable and stay zero.
    pub fn evaluate(&self, test: &TaskDataset, t: usize) -> Result<TaskCounts> {
        let preds = self.net.predict_batch(test.view(), 0)?;
        let hits = preds
            .iter()
            .enumerate()
            .filter(|(i, &p)| p == self.target(t, test.label(*i)) as usize)
            .count() as u64;
        Ok(TaskCounts {
            task: t,
            samples: test.len() as u64,
            main_hits: hits,
            class_hits: hits,
            ..TaskCounts::default()
        })
    }

    /// Coreset contents; the network itself is the backbone.
    pub fn memory(&self) -> MemoryLedger {
        MemoryLedger::new().with("coreset", self.coreset.bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Split;
    use rand::Rng;

    fn task(t: usize, n: usize) -> TaskDataset {
        let mut rng = seed::rng(t as u64, "vanilla-test", 0);
        let labels: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        let feats: Vec<f32> = labels
            .iter()
            .flat_map(|&y| {
                let centre = if y == 0 { -1.0 } else { 1.0 };
                [centre + rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3) + t as f32]
            })
            .collect();
        TaskDataset::new(t, Split::Train, 2, 2, feats, labels).unwrap()
    }

    fn cfg(layout: VanillaLayout) -> VanillaReplayConfig {
        VanillaReplayConfig {
            input_dim: 2,
            hidden: vec![16],
            classes_per_task: 2,
            max_tasks: 3,
            layout,
            coreset: 11,
            epochs: 10,
            lr: 0.05,
            momentum: 0.9,
            batch_size: 8,
            seed: 0,
        }
    }

    #[test]
    fn single_task_is_plain_supervised_training() {
        let mut v = VanillaReplay::new(cfg(VanillaLayout::SharedHead)).unwrap();
        let d = task(0, 100);
        v.train_task(&d, 0).unwrap();
        let c = v.evaluate(&d, 0).unwrap();
        assert!(c.main_pct() > 95.0, "{}", c.main_pct());
        assert_eq!(v.coreset().bucket_sizes(), vec![6, 5]);
    }

    #[test]
    fn class_buckets_stay_balanced() {
        for layout in [VanillaLayout::PerClass, VanillaLayout::SharedHead] {
            let mut v = VanillaReplay::new(cfg(layout)).unwrap();
            for t in 0..3 {
                v.train_task(&task(t, 40), t).unwrap();
                let s = v.coreset().bucket_sizes();
                assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
                assert_eq!(s.len(), 2 * (t + 1));
            }
            assert!(v.train_task(&task(3, 10), 3).is_err());
            let payloads: Vec<u32> = v.coreset().iter().map(|e| e.1).collect();
            let max = payloads.iter().max().copied().unwrap();
            assert_eq!(max, if layout == VanillaLayout::PerClass { 5 } else { 1 });
        }
    }
}
