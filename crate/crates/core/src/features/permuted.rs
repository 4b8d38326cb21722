use std::sync::Arc;

use rand::seq::{index, SliceRandom};

use super::{MnistSource, Split, TaskSource, TaskStream};
use crate::error::{Error, Result};
use crate::pspbd::HeadLayout;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PermutedConfig {
    pub n_tasks: usize,
    pub seed: u64,
    /// Training images per task; `None` keeps all 60,000.
    pub train_per_task: Option<usize>,
    /// Test images per task; `None` keeps all 10,000.
    pub test_per_task: Option<usize>,
}

impl PermutedConfig {
    pub fn new(n_tasks: usize, seed: u64) -> Self {
        PermutedConfig {
            n_tasks,
            seed,
            train_per_task: None,
            test_per_task: None,
        }
    }
}

/// Pixel permutation of task `t`. Every task, including the first, gets a
/// random permutation.
pub fn permutation_for_task(dim: usize, seed: u64, t: usize) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..dim as u32).collect();
    perm.shuffle(&mut seed::rng(seed, "permutation", t as u64));
    perm
}

/// `out[j] = image[perm[j]]`.
pub fn apply_permutation(image: &[f32], perm: &[u32]) -> Result<Vec<f32>> {
    if image.len() != perm.len() {
        return Err(Error::arg(format!(
            "image has {} pixels, permutation covers {}",
            image.len(),
            perm.len()
        )));
    }
    Ok(perm.iter().map(|&p| image[p as usize]).collect())
}

fn rows_for(total: usize, wanted: Option<usize>, seed: u64, purpose: &str, t: usize) -> Vec<usize> {
    match wanted {
        Some(n) if n < total => index::sample(&mut seed::rng(seed, purpose, t as u64), total, n).into_vec(),
        _ => (0..total).collect(),
    }
}

/// Permuted-MNIST stream: `n_tasks` ten-class tasks, each a fixed pixel
/// permutation applied identically to its train and test images.
pub fn generate_permuted_mnist(source: Arc<MnistSource>, cfg: &PermutedConfig) -> Result<TaskStream> {
    if cfg.n_tasks == 0 {
        return Err(Error::arg("permuted MNIST needs at least one task"));
    }
    if source.len(Split::Train) == 0 || source.len(Split::Test) == 0 {
        return Err(Error::arg("MNIST source has an empty split"));
    }
    let dim = source.image_dim;
    let tasks = (0..cfg.n_tasks)
        .map(|t| TaskSource::Permuted {
            permutation: Arc::new(permutation_for_task(dim, cfg.seed, t)),
            base: Arc::clone(&source),
            train_rows: Arc::new(rows_for(source.len(Split::Train), cfg.train_per_task, cfg.seed, "train-rows", t)),
            test_rows: Arc::new(rows_for(source.len(Split::Test), cfg.test_per_task, cfg.seed, "test-rows", t)),
        })
        .collect();
    Ok(TaskStream::from_parts(dim, dim, HeadLayout::shared(10), tasks))
}
