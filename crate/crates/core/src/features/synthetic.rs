//! Synthetic inter-dataset stream: each task is a Gaussian mixture around
//! its own task mean, with task means at least `task_separation` standard
//! deviations apart. Stands in for the 8-dataset benchmark when the image
//! corpora are not available.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Split, TaskDataset, TaskStream};
use crate::error::{Error, Result};
use crate::pspbd::HeadLayout;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_tasks: usize,
    pub dim: usize,
    pub classes_per_task: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Minimum distance between task means, in units of `sigma`.
    pub task_separation: f64,
    /// Norm of each class offset from its task mean, in units of `sigma`.
    pub class_offset: f64,
    /// Per-dimension noise standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_tasks: 8,
            dim: 256,
            classes_per_task: 5,
            train_per_class: 80,
            test_per_class: 40,
            task_separation: 6.0,
            class_offset: 3.0,
            sigma: 1.0,
            seed: 0,
        }
    }
}

fn gaussian_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn scale_to(v: &mut [f64], norm: f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x *= norm / n);
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Task means, rescaled so that the closest pair is exactly
/// `task_separation · sigma` apart.
pub(crate) fn task_means(cfg: &SyntheticConfig) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(cfg.seed, "synthetic-task-means", 0);
    let mut means: Vec<Vec<f64>> = (0..cfg.n_tasks)
        .map(|_| {
            let mut m = gaussian_vec(&mut rng, cfg.dim);
            scale_to(&mut m, 1.0);
            m
        })
        .collect();
    let mut min_d = f64::INFINITY;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            min_d = min_d.min(distance(&means[i], &means[j]));
        }
    }
    if min_d.is_finite() && min_d > 0.0 {
        let s = cfg.task_separation * cfg.sigma / min_d;
        means.iter_mut().flatten().for_each(|x| *x *= s);
    }
    means
}

/// Generate a stream with per-task heads, one head per task of
/// `classes_per_task` nodes.
pub fn pseudo_eight_dsets(cfg: &SyntheticConfig) -> Result<TaskStream> {
    if cfg.n_tasks == 0 || cfg.dim == 0 || cfg.classes_per_task == 0 {
        return Err(Error::arg("synthetic stream needs tasks, dimensions and classes"));
    }
    if cfg.sigma <= 0.0 || cfg.task_separation < 0.0 {
        return Err(Error::arg("sigma must be positive and separation non-negative"));
    }
    let means = task_means(cfg);
    let mut pairs = Vec::with_capacity(cfg.n_tasks);
    for (t, task_mean) in means.iter().enumerate() {
        let mut rng = seed::rng(cfg.seed, "synthetic-task", t as u64);
        let class_means: Vec<Vec<f64>> = (0..cfg.classes_per_task)
            .map(|_| {
                let mut off = gaussian_vec(&mut rng, cfg.dim);
                scale_to(&mut off, cfg.class_offset * cfg.sigma);
                task_mean.iter().zip(&off).map(|(m, o)| m + o).collect()
            })
            .collect();
        let draw = |split: Split, per_class: usize, rng: &mut seed::Rng| {
            let mut features = Vec::with_capacity(per_class * cfg.classes_per_task * cfg.dim);
            let mut labels = Vec::with_capacity(per_class * cfg.classes_per_task);
            for i in 0..per_class * cfg.classes_per_task {
                let c = i % cfg.classes_per_task;
                for &m in &class_means[c] {
                    features.push((m + cfg.sigma * rng.sample::<f64, _>(StandardNormal)) as f32);
                }
                labels.push(c as u32);
            }
            TaskDataset::new(t, split, cfg.dim, cfg.classes_per_task, features, labels)
        };
        let train = draw(Split::Train, cfg.train_per_class, &mut rng)?;
        let test = draw(Split::Test, cfg.test_per_class, &mut rng)?;
        pairs.push((train, test));
    }
    TaskStream::from_datasets(HeadLayout::per_task(vec![cfg.classes_per_task; cfg.n_tasks]), pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_means_respect_separation() {
        let cfg = SyntheticConfig::default();
        let means = task_means(&cfg);
        let mut min_d = f64::INFINITY;
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                min_d = min_d.min(distance(&means[i], &means[j]));
            }
        }
        assert!(min_d >= 4.0 * cfg.sigma);
        assert!((min_d - cfg.task_separation * cfg.sigma).abs() < 1e-9);
    }

    #[test]
    fn stream_shape() {
        let cfg = SyntheticConfig {
            train_per_class: 3,
            test_per_class: 2,
            ..SyntheticConfig::default()
        };
        let s = pseudo_eight_dsets(&cfg).unwrap();
        assert_eq!(s.num_tasks(), 8);
        assert_eq!(s.dim(), 256);
        let tr = s.task(7, Split::Train).unwrap();
        assert_eq!(tr.len(), 15);
        assert_eq!(s.task(7, Split::Test).unwrap().len(), 10);
        assert_eq!(s.head().width(7), 5);
    }
}
