//! Perceptron over concatenated per-task classifier responses, with a
//! coreset of raw classifier features re-sifted at every task.

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use super::pcr::{coreset_matrix, replay_blob, train_replay_task};
use super::{expect_next_task, subsample_indices, PcrConfig, Query, ReplayLossWeights, ShallowPerceptron, TaskContext, TaskMapper};
use crate::blob::Blob;
use crate::coreset::Coreset;
use crate::error::{Error, Result};
use crate::metrics::MemoryLedger;
use crate::nn::gather_rows;
use crate::pspbd::PspBdClassifier;
use crate::seed;

/// Logits of `x` under every learned task, concatenated in task order.
pub fn collect_embedding(x: &[f32], clf: &PspBdClassifier) -> Result<Vec<f32>> {
    if clf.num_tasks() == 0 {
        return Err(Error::state("the classifier has no learned tasks"));
    }
    let mut out = Vec::new();
    for t in 0..clf.num_tasks() {
        out.extend(clf.forward(x, t)?);
    }
    Ok(out)
}

/// Batched `collect_embedding` over the first `tasks` tasks.
pub(crate) fn embed_batch(clf: &PspBdClassifier, x: ArrayView2<'_, f32>, tasks: usize) -> Result<Array2<f32>> {
    let parts = (0..tasks).map(|t| clf.forward_batch(x, t)).collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(1), &views).map_err(|e| Error::state(format!("embedding concat failed: {e}")))
}

#[derive(Debug, Clone)]
pub struct PcreMapper {
    cfg: PcrConfig,
    perceptron: Option<ShallowPerceptron>,
    coreset: Option<Coreset>,
    history: Vec<ReplayLossWeights>,
}

impl PcreMapper {
    pub fn new(cfg: PcrConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PcreMapper {
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

    pub fn lambda_history(&self) -> &[ReplayLossWeights] {
        &self.history
    }

    /// Coreset contents as the perceptron sees them under `clf`.
    pub fn replayed_embeddings(&self, clf: &PspBdClassifier) -> Result<Array2<f32>> {
        let c = self.coreset.as_ref().ok_or_else(|| Error::state("coreset is empty"))?;
        let (x, _) = coreset_matrix(c);
        embed_batch(clf, x.view(), clf.num_tasks())
    }
}

impl TaskMapper for PcreMapper {
    fn name(&self) -> String {
        format!("pcre(n={},h={})", self.cfg.coreset, self.cfg.hidden.unwrap_or(0))
    }

    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()> {
        expect_next_task(ctx, self.history.len())?;
        let clf = ctx.require_classifier()?;
        let t = ctx.task_id;
        if clf.num_tasks() < t + 1 {
            return Err(Error::state(format!("classifier has not learned task {t} yet")));
        }
        let tasks = t + 1;
        let width: usize = (0..tasks).map(|k| clf.head_width(k)).sum();
        let data = ctx.classifier_train;
        let coreset = self
            .coreset
            .get_or_insert_with(|| Coreset::new(self.cfg.coreset, data.dim(), seed::derive(self.cfg.seed, "pcre-coreset", 0)));
        if coreset.num_buckets() + 1 > coreset.capacity() {
            return Err(Error::config(format!("coreset of {} slots cannot hold {tasks} tasks", coreset.capacity())));
        }
        let p = self.perceptron.get_or_insert_with(|| {
            let mut rng = seed::rng(self.cfg.seed, "pcre-init", 0);
            ShallowPerceptron::new(0, self.cfg.hidden, 0, &mut rng)
        });
        let mut rng = seed::rng(self.cfg.seed, "pcre-grow", t as u64);
        p.grow_input(width - p.inputs(), &mut rng);
        p.grow_output();

        let idx = subsample_indices(data.len(), self.cfg.max_samples_per_task, self.cfg.seed, "pcre-subsample", t);
        let raw = gather_rows(&idx.iter().map(|&i| data.sample(i)).collect::<Vec<_>>());
        let new_x = embed_batch(clf, raw.view(), tasks)?;
        let (mraw, ml) = coreset_matrix(coreset);
        let mem_x = if mraw.nrows() > 0 {
            embed_batch(clf, mraw.view(), tasks)?
        } else {
            Array2::zeros((0, width))
        };
        let weights = ReplayLossWeights::new(coreset.num_buckets(), 1);
        train_replay_task(p, &new_x, t, Some((&mem_x, &ml)), weights, &self.cfg, "pcre-train");
        coreset.insert_task(data, t)?;
        self.history.push(weights);
        Ok(())
    }

    fn predict(&self, query: &Query<'_>) -> Result<usize> {
        let p = self.perceptron.as_ref().ok_or_else(|| Error::state("PCR-E is untrained"))?;
        let logits = query.task_logits()?;
        let tasks = self.history.len();
        if logits.len() < tasks {
            return Err(Error::state(format!("need logits for {tasks} tasks, got {}", logits.len())));
        }
        let x: Vec<f32> = logits[..tasks].iter().flatten().copied().collect();
        Ok(p.predict(&x))
    }

    fn num_tasks(&self) -> usize {
        self.history.len()
    }

    fn uses_classifier_logits(&self) -> bool {
        true
    }

    fn memory(&self) -> MemoryLedger {
        let p = self.perceptron.as_ref().map_or(0, |p| 4 * p.param_count() as u64);
        let c = self.coreset.as_ref().map_or(0, Coreset::bytes);
        MemoryLedger::new().with("mapper", p).with("coreset", c)
    }

    fn to_blob(&self) -> Blob {
        replay_blob("pcre", self.perceptron.as_ref(), self.coreset.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Split, TaskDataset};
    use crate::pspbd::{HeadLayout, PspBdConfig};
    use rand::Rng;

    fn tiny_clf(tasks: usize) -> PspBdClassifier {
        let mut cfg = PspBdConfig::new(6, vec![5], HeadLayout::shared(3));
        cfg.seed = 3;
        let mut clf = PspBdClassifier::new(cfg).unwrap();
        for _ in 0..tasks {
            clf.add_task().unwrap();
        }
        clf
    }

    #[test]
    fn embedding_concatenates_per_task_forwards() {
        let clf = tiny_clf(3);
        let x = [0.1, 0.5, -0.3, 0.9, 0.0, 0.2];
        let e = collect_embedding(&x, &clf).unwrap();
        assert_eq!(e.len(), 9);
        for t in 0..3 {
            assert_eq!(&e[3 * t..3 * t + 3], &clf.forward(&x, t).unwrap()[..]);
        }
        let one = tiny_clf(1);
        assert_eq!(collect_embedding(&x, &one).unwrap(), one.forward(&x, 0).unwrap());
        assert!(collect_embedding(&x, &tiny_clf(0)).is_err());
    }

    #[test]
    fn replay_path_equals_live_path() {
        let mut rng = crate::seed::rng(0, "pcre-test", 0);
        let mut clf = tiny_clf(0);
        let mut m = PcreMapper::new(PcrConfig { coreset: 6, epochs: 2, ..PcrConfig::pcre() }).unwrap();
        for t in 0..2 {
            let feats: Vec<f32> = (0..20 * 6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = TaskDataset::new(t, Split::Train, 6, 3, feats, vec![0; 20]).unwrap();
            clf.add_task().unwrap();
            m.learn_task(&TaskContext::new(t, &d).with_classifier(&clf, &d)).unwrap();
            assert_eq!(m.perceptron().unwrap().inputs(), 3 * (t + 1));
            assert_eq!(m.perceptron().unwrap().outputs(), t + 1);
        }
        let replay = m.replayed_embeddings(&clf).unwrap();
        for (i, (x, _)) in m.coreset().unwrap().iter().enumerate() {
            let live = collect_embedding(x, &clf).unwrap();
            for (a, b) in live.iter().zip(replay.row(i)) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        let x = [0.0f32; 6];
        let logits: Vec<Vec<f32>> = (0..2).map(|t| clf.forward(&x, t).unwrap()).collect();
        let a = m.predict(&Query::new(&x).with_classifier(&clf, &x)).unwrap();
        let b = m.predict(&Query::new(&x).with_logits(&logits)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn needs_classifier() {
        let d = TaskDataset::new(0, Split::Train, 6, 3, vec![0.0; 6], vec![0]).unwrap();
        let mut m = PcreMapper::new(PcrConfig::pcre()).unwrap();
        assert!(matches!(m.learn_task(&TaskContext::new(0, &d)), Err(Error::State(_))));
    }
}
