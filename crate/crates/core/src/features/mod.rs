//! Task datasets, task streams and their on-disk sources.

mod file;
mod idx;
mod permuted;
mod pool;
mod synthetic;

use std::sync::Arc;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pspbd::HeadLayout;

pub use file::{load_feature_file, load_stream_from_dir, task_file, write_feature_file, FeatureFileManifest, FEATURE_MAGIC};
pub use idx::{read_idx_images, read_idx_labels, MnistSource};
pub use permuted::{apply_permutation, generate_permuted_mnist, permutation_for_task, PermutedConfig};
pub use pool::{spatial_pool, ALEXNET_CONV_SHAPE};
pub use synthetic::{pseudo_eight_dsets, SyntheticConfig};

/// A single embedding. Entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f32>);

impl FeatureVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("feature entry {i} is not finite")));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl AsRef<[f32]> for FeatureVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Samples of one task and split, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    task_id: usize,
    split: Split,
    dim: usize,
    num_classes: usize,
    features: Vec<f32>,
    labels: Vec<u32>,
}

impl TaskDataset {
    pub fn new(
        task_id: usize,
        split: Split,
        dim: usize,
        num_classes: usize,
        features: Vec<f32>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dataset dimension must be positive"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::arg(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite feature at sample {}", i / dim)));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::arg(format!("label {l} outside [0, {num_classes})")));
        }
        Ok(TaskDataset {
            task_id,
            split,
            dim,
            num_classes,
            features,
            labels,
        })
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn view(&self) -> ArrayView2<'_, f32> {
        ArrayView2::from_shape((self.len(), self.dim), &self.features).expect("shape checked at construction")
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    /// Copy of the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> TaskDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        TaskDataset {
            features,
            labels,
            ..self.clone_header()
        }
    }

    /// First `n` rows (or all of them).
    pub fn truncated(&self, n: usize) -> TaskDataset {
        let n = n.min(self.len());
        TaskDataset {
            features: self.features[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> TaskDataset {
        TaskDataset {
            task_id: self.task_id,
            split: self.split,
            dim: self.dim,
            num_classes: self.num_classes,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }
}

/// Where a task's samples come from. Permuted tasks are materialized on
/// demand so that a 25-task stream does not hold 25 copies of MNIST.
#[derive(Debug, Clone)]
pub(crate) enum TaskSource {
    Stored {
        train: Arc<TaskDataset>,
        test: Arc<TaskDataset>,
        classifier: Option<(Arc<TaskDataset>, Arc<TaskDataset>)>,
    },
    Permuted {
        permutation: Arc<Vec<u32>>,
        base: Arc<MnistSource>,
        train_rows: Arc<Vec<usize>>,
        test_rows: Arc<Vec<usize>>,
    },
}

/// Ordered sequence of tasks, each with a train and test split.
///
/// Mapper features and classifier features may differ (pooled 256-d
/// features for mapping against full conv maps for classification); when no
/// separate classifier view exists both use the same data.
#[derive(Debug, Clone)]
pub struct TaskStream {
    dim: usize,
    classifier_dim: usize,
    head: HeadLayout,
    tasks: Vec<TaskSource>,
}

impl TaskStream {
    pub(crate) fn from_parts(dim: usize, classifier_dim: usize, head: HeadLayout, tasks: Vec<TaskSource>) -> Self {
        TaskStream {
            dim,
            classifier_dim,
            head,
            tasks,
        }
    }

    /// Build a stream from in-memory datasets; `pairs[t]` holds task `t`.
    pub fn from_datasets(head: HeadLayout, pairs: Vec<(TaskDataset, TaskDataset)>) -> Result<Self> {
        let with_views = pairs.into_iter().map(|(tr, te)| (tr, te, None)).collect();
        Self::from_datasets_with_classifier_views(head, with_views)
    }

    pub fn from_datasets_with_classifier_views(
        head: HeadLayout,
        tasks: Vec<(TaskDataset, TaskDataset, Option<(TaskDataset, TaskDataset)>)>,
    ) -> Result<Self> {
        let first = tasks.first().ok_or_else(|| Error::arg("a task stream needs at least one task"))?;
        let dim = first.0.dim();
        let classifier_dim = first.2.as_ref().map_or(dim, |(c, _)| c.dim());
        let mut sources = Vec::with_capacity(tasks.len());
        for (t, (train, test, clf)) in tasks.into_iter().enumerate() {
            if train.task_id() != t || test.task_id() != t {
                return Err(Error::arg(format!("task ids must be consecutive; position {t} holds task {}", train.task_id())));
            }
            if train.dim() != dim || test.dim() != dim {
                return Err(Error::arg(format!("task {t} has dimension {} but the stream uses {dim}", train.dim())));
            }
            if let Some((ctr, cte)) = &clf {
                if ctr.dim() != classifier_dim || cte.dim() != classifier_dim {
                    return Err(Error::arg(format!("task {t} classifier view dimension mismatch")));
                }
                if ctr.labels() != train.labels() || cte.labels() != test.labels() {
                    return Err(Error::arg(format!("task {t} classifier view labels differ from mapper view")));
                }
            }
            sources.push(TaskSource::Stored {
                train: Arc::new(train),
                test: Arc::new(test),
                classifier: clf.map(|(a, b)| (Arc::new(a), Arc::new(b))),
            });
        }
        Ok(TaskStream {
            dim,
            classifier_dim,
            head,
            tasks: sources,
        })
    }

    /// The same tasks under a different head layout.
    pub fn with_head(mut self, head: HeadLayout) -> Self {
        self.head = head;
        self
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Mapper feature dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classifier_dim(&self) -> usize {
        self.classifier_dim
    }

    pub fn head(&self) -> &HeadLayout {
        &self.head
    }

    /// Mapper view of task `t`.
    pub fn task(&self, t: usize, split: Split) -> Result<Arc<TaskDataset>> {
        match self.source(t)? {
            TaskSource::Stored { train, test, .. } => Ok(match split {
                Split::Train => Arc::clone(train),
                Split::Test => Arc::clone(test),
            }),
            TaskSource::Permuted {
                permutation,
                base,
                train_rows,
                test_rows,
            } => {
                let rows = match split {
                    Split::Train => train_rows,
                    Split::Test => test_rows,
                };
                Ok(Arc::new(base.permuted_task(t, split, permutation, rows)))
            }
        }
    }

    /// Classifier view of task `t`.
    pub fn classifier_task(&self, t: usize, split: Split) -> Result<Arc<TaskDataset>> {
        match self.source(t)? {
            TaskSource::Stored {
                classifier: Some((train, test)),
                ..
            } => Ok(match split {
                Split::Train => Arc::clone(train),
                Split::Test => Arc::clone(test),
            }),
            _ => self.task(t, split),
        }
    }

    pub fn has_classifier_view(&self) -> bool {
        self.tasks
            .iter()
            .any(|s| matches!(s, TaskSource::Stored { classifier: Some(_), .. }))
    }

    /// Pixel permutation of task `t`, when the stream is permuted MNIST.
    pub fn permutation(&self, t: usize) -> Option<&[u32]> {
        match self.tasks.get(t)? {
            TaskSource::Permuted { permutation, .. } => Some(permutation),
            TaskSource::Stored { .. } => None,
        }
    }

    fn source(&self, t: usize) -> Result<&TaskSource> {
        self.tasks
            .get(t)
            .ok_or_else(|| Error::arg(format!("task {t} not in stream of {} tasks", self.tasks.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(task: usize, rows: &[[f32; 2]], labels: &[u32]) -> TaskDataset {
        TaskDataset::new(task, Split::Train, 2, 3, rows.iter().flatten().copied().collect(), labels.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(TaskDataset::new(0, Split::Train, 2, 2, vec![0.0; 3], vec![0]).is_err());
        assert!(TaskDataset::new(0, Split::Train, 1, 2, vec![f32::NAN], vec![0]).is_err());
        assert!(TaskDataset::new(0, Split::Train, 1, 2, vec![0.0], vec![2]).is_err());
        assert!(FeatureVector::new(vec![1.0, f32::INFINITY]).is_err());
    }

    #[test]
    fn select_and_truncate() {
        let d = ds(0, &[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], &[0, 1, 2]);
        let s = d.select(&[2, 0]);
        assert_eq!(s.features(), &[5.0, 6.0, 1.0, 2.0]);
        assert_eq!(s.labels(), &[2, 0]);
        assert_eq!(d.truncated(1).len(), 1);
        assert_eq!(d.truncated(10).len(), 3);
    }

    #[test]
    fn stream_requires_consecutive_ids() {
        let head = HeadLayout::shared(3);
        let ok = TaskStream::from_datasets(head.clone(), vec![(ds(0, &[[0.0, 0.0]], &[0]), ds(0, &[[0.0, 0.0]], &[0]))]);
        assert!(ok.is_ok());
        let bad = TaskStream::from_datasets(head, vec![(ds(1, &[[0.0, 0.0]], &[0]), ds(1, &[[0.0, 0.0]], &[0]))]);
        assert!(bad.is_err());
    }
}
