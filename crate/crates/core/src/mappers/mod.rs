//! Task mappers: models that predict a sample's task identity in place of
//! an oracle.

mod ae_gates;
mod art;
mod artmap;
mod dictionary;
mod entropy;
mod gmmc;
mod kmheads;
mod nmc;
mod pcr;
mod pcre;
mod providers;
mod scaling;

use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::features::TaskDataset;
use crate::metrics::MemoryLedger;
use crate::pspbd::PspBdClassifier;

pub use ae_gates::{AeGatesConfig, AeGatesMapper, TaskAutoencoder};
pub use art::{complement_code, ArtCategory, ArtConfig, ArtMapper};
pub use artmap::ArtmapMapper;
pub use dictionary::PrototypeDictionary;
pub use entropy::EntropyMapper;
pub use gmmc::GmmcMapper;
pub use kmheads::{HeadPrototypeStore, KmHeadsMapper, KmHeadsSource};
pub use nmc::NmcMapper;
pub use pcr::{LossTerm, PcrConfig, PcrMapper, ReplayLossWeights, ShallowPerceptron};
pub use pcre::{collect_embedding, PcreMapper};
pub use providers::{OracleMapper, RandomTaskProvider};
pub use scaling::{InputScaling, MinMaxScaler};

/// Everything a mapper may use while learning task `task_id`.
#[derive(Clone, Copy)]
pub struct TaskContext<'a> {
    pub task_id: usize,
    /// Mapper features of the new task.
    pub train: &'a TaskDataset,
    /// Classifier features of the same samples (equal to `train` unless the
    /// benchmark feeds the classifier a different embedding).
    pub classifier_train: &'a TaskDataset,
    /// The task-dependent classifier, already trained on `task_id`.
    pub classifier: Option<&'a PspBdClassifier>,
}

impl<'a> TaskContext<'a> {
    pub fn new(task_id: usize, train: &'a TaskDataset) -> Self {
        TaskContext {
            task_id,
            train,
            classifier_train: train,
            classifier: None,
        }
    }

    pub fn with_classifier(mut self, clf: &'a PspBdClassifier, classifier_train: &'a TaskDataset) -> Self {
        self.classifier = Some(clf);
        self.classifier_train = classifier_train;
        self
    }

    pub(crate) fn require_classifier(&self) -> Result<&'a PspBdClassifier> {
        self.classifier
            .ok_or_else(|| Error::state("this mapper needs the task-dependent classifier"))
    }
}

/// One sample to be mapped to a task.
#[derive(Clone, Copy, Default)]
pub struct Query<'a> {
    pub features: &'a [f32],
    pub classifier_features: &'a [f32],
    pub classifier: Option<&'a PspBdClassifier>,
    /// Precomputed classifier logits, one vector per learned task.
    pub logits: Option<&'a [Vec<f32>]>,
    /// Ground-truth task, read only by the oracle.
    pub true_task: Option<usize>,
}

impl<'a> Query<'a> {
    pub fn new(features: &'a [f32]) -> Self {
        Query {
            features,
            classifier_features: features,
            ..Query::default()
        }
    }

    pub fn with_classifier(mut self, clf: &'a PspBdClassifier, classifier_features: &'a [f32]) -> Self {
        self.classifier = Some(clf);
        self.classifier_features = classifier_features;
        self
    }

    pub fn with_logits(mut self, logits: &'a [Vec<f32>]) -> Self {
        self.logits = Some(logits);
        self
    }

    pub fn with_true_task(mut self, t: usize) -> Self {
        self.true_task = Some(t);
        self
    }

    /// Classifier logits of this sample under every learned task.
    pub fn task_logits(&self) -> Result<Vec<Vec<f32>>> {
        if let Some(l) = self.logits {
            return Ok(l.to_vec());
        }
        let clf = self
            .classifier
            .ok_or_else(|| Error::state("query carries neither logits nor a classifier"))?;
        (0..clf.num_tasks())
            .map(|t| clf.forward(self.classifier_features, t))
            .collect()
    }
}

pub trait TaskMapper {
    fn name(&self) -> String;

    /// Learn task `ctx.task_id`, which must be the next unseen task.
    fn learn_task(&mut self, ctx: &TaskContext<'_>) -> Result<()>;

    fn predict(&self, query: &Query<'_>) -> Result<usize>;

    fn num_tasks(&self) -> usize;

    /// Whether `predict` reads classifier logits (so callers can precompute them).
    fn uses_classifier_logits(&self) -> bool {
        false
    }

    /// A network the mapper brings for fine-grained classification instead
    /// of the pipeline's classifier.
    fn fine_classifier(&self) -> Option<&PspBdClassifier> {
        None
    }

    /// Permanent storage attributable to the mapper.
    fn memory(&self) -> MemoryLedger;

    fn to_blob(&self) -> Blob;
}

pub(crate) fn expect_next_task(ctx: &TaskContext<'_>, learned: usize) -> Result<()> {
    if ctx.task_id != learned {
        return Err(Error::arg(format!(
            "expected task {learned} next, got task {}",
            ctx.task_id
        )));
    }
    if ctx.train.is_empty() {
        return Err(Error::arg("training set is empty"));
    }
    Ok(())
}

pub(crate) fn rows(data: &TaskDataset) -> Vec<&[f32]> {
    data.rows().collect()
}

/// Sorted indices of a seeded uniform subsample of `n` rows, or all rows
/// when `cap` is absent or not smaller than `n`.
pub(crate) fn subsample_indices(n: usize, cap: Option<usize>, seed: u64, purpose: &str, task: usize) -> Vec<usize> {
    match cap {
        Some(c) if c < n => {
            let mut rng = crate::seed::rng(seed, purpose, task as u64);
            let mut idx = rand::seq::index::sample(&mut rng, n, c).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    }
}
