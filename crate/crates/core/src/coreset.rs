//! Fixed-capacity replay buffer with balanced buckets.
//!
//! Mappers bucket by task (payload = task id); the task-independent replay
//! baseline buckets by class (payload = class label).

use rand::seq::index;
use rand::Rng;

use crate::blob::Blob;
use crate::error::{Error, Result};
use crate::features::TaskDataset;

#[derive(Debug, Clone, PartialEq)]
struct Bucket {
    key: u32,
    /// Row-major features.
    features: Vec<f32>,
    payloads: Vec<u32>,
}

impl Bucket {
    fn len(&self, dim: usize) -> usize {
        if dim == 0 {
            self.payloads.len()
        } else {
            self.features.len() / dim
        }
    }

    fn truncate(&mut self, n: usize, dim: usize) {
        self.features.truncate(n * dim);
        self.payloads.truncate(n);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coreset {
    capacity: usize,
    dim: usize,
    seed: u64,
    buckets: Vec<Bucket>,
    inserts: u64,
}

impl Coreset {
    pub fn new(capacity: usize, dim: usize, seed: u64) -> Self {
        Coreset {
            capacity,
            dim,
            seed,
            buckets: Vec::new(),
            inserts: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(|b| b.len(self.dim)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_buckets(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket_sizes(&self) -> Vec<usize> {
        self.buckets.iter().map(|b| b.len(self.dim)).collect()
    }

    pub fn bucket_keys(&self) -> Vec<u32> {
        self.buckets.iter().map(|b| b.key).collect()
    }

    /// Slot allowance of bucket `i` when `n` buckets share the capacity.
    pub fn allowance(capacity: usize, n: usize, i: usize) -> usize {
        capacity / n + usize::from(i < capacity % n)
    }

    /// Add task `t` as one bucket whose payload is the task id.
    pub fn insert_task(&mut self, train: &TaskDataset, t: usize) -> Result<()> {
        if t != self.buckets.len() {
            return Err(Error::arg(format!("coreset expects task {} next, got {t}", self.buckets.len())));
        }
        if train.is_empty() {
            return Err(Error::arg("cannot insert an empty task"));
        }
        let all: Vec<usize> = (0..train.len()).collect();
        self.insert_groups(train, vec![(t as u32, all, vec![t as u32; train.len()])])
    }

    /// Add several new buckets at once, each given as (key, candidate row
    /// indices into `data`, payload per candidate), then rebalance.
    pub fn insert_groups(&mut self, data: &TaskDataset, groups: Vec<(u32, Vec<usize>, Vec<u32>)>) -> Result<()> {
        if data.dim() != self.dim {
            return Err(Error::arg(format!("coreset holds {}-d features, got {}", self.dim, data.dim())));
        }
        let total = self.buckets.len() + groups.len();
        if self.capacity < total {
            return Err(Error::config(format!(
                "coreset capacity {} cannot keep a slot for each of {total} buckets",
                self.capacity
            )));
        }
        for (i, b) in self.buckets.iter_mut().enumerate() {
            b.truncate(Self::allowance(self.capacity, total, i), self.dim);
        }
        let first_new = self.buckets.len();
        for (g, (key, candidates, payloads)) in groups.into_iter().enumerate() {
            let allow = Self::allowance(self.capacity, total, first_new + g);
            let mut rng = crate::seed::rng(self.seed, "coreset", self.inserts);
            self.inserts += 1;
            let take = allow.min(candidates.len());
            let picks = index::sample(&mut rng, candidates.len(), take).into_vec();
            let mut bucket = Bucket {
                key,
                features: Vec::with_capacity(take * self.dim),
                payloads: Vec::with_capacity(take),
            };
            for p in picks {
                bucket.features.extend_from_slice(data.sample(candidates[p]));
                bucket.payloads.push(payloads[p]);
            }
            self.buckets.push(bucket);
        }
        Ok(())
    }

    /// Uniform sample with replacement over all stored entries.
    pub fn minibatch<R: Rng>(&self, size: usize, rng: &mut R) -> Result<Vec<(&[f32], u32)>> {
        let n = self.len();
        if n == 0 {
            return Err(Error::state("coreset is empty"));
        }
        Ok((0..size).map(|_| self.entry(rng.gen_range(0..n))).collect())
    }

    /// Entry `i` in bucket order.
    pub fn entry(&self, mut i: usize) -> (&[f32], u32) {
        for b in &self.buckets {
            let len = b.len(self.dim);
            if i < len {
                return (&b.features[i * self.dim..(i + 1) * self.dim], b.payloads[i]);
            }
            i -= len;
        }
        panic!("coreset entry out of range");
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f32], u32)> + '_ {
        (0..self.len()).map(move |i| self.entry(i))
    }

    /// Stored features at four bytes per value plus a four-byte payload each.
    pub fn bytes(&self) -> u64 {
        self.to_blob().payload_bytes()
    }

    pub fn to_blob(&self) -> Blob {
        let mut blob = Blob::new("coreset");
        blob.header = vec![self.capacity as u64, self.dim as u64, self.buckets.len() as u64];
        for b in &self.buckets {
            blob.header.push(u64::from(b.key));
            blob.header.push(b.payloads.len() as u64);
            blob.floats.extend_from_slice(&b.features);
            blob.labels.extend_from_slice(&b.payloads);
        }
        blob
    }

    pub fn from_blob(blob: &Blob, seed: u64) -> Result<Self> {
        blob.expect_kind("coreset")?;
        let h = &blob.header;
        if h.len() < 3 {
            return Err(Error::arg("coreset header too short"));
        }
        let (capacity, dim, nb) = (h[0] as usize, h[1] as usize, h[2] as usize);
        if h.len() != 3 + 2 * nb {
            return Err(Error::arg("coreset header does not match its bucket count"));
        }
        let mut buckets = Vec::with_capacity(nb);
        let (mut fo, mut lo) = (0, 0);
        for i in 0..nb {
            let key = h[3 + 2 * i] as u32;
            let n = h[4 + 2 * i] as usize;
            if lo + n > blob.labels.len() || fo + n * dim > blob.floats.len() {
                return Err(Error::arg("coreset payload shorter than its header"));
            }
            buckets.push(Bucket {
                key,
                features: blob.floats[fo..fo + n * dim].to_vec(),
                payloads: blob.labels[lo..lo + n].to_vec(),
            });
            fo += n * dim;
            lo += n;
        }
        if fo != blob.floats.len() || lo != blob.labels.len() {
            return Err(Error::arg("coreset payload longer than its header"));
        }
        Ok(Coreset {
            capacity,
            dim,
            seed,
            buckets,
            inserts: nb as u64,
        })
    }
}
