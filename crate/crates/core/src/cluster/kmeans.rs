//! Lloyd's k-means with k-means++ seeding.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::sq_dist;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { max_iter: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `k` centroids, row-major.
    pub centroids: Vec<Vec<f32>>,
    /// Cluster index of every input row.
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

fn nearest(row: &[f32], centroids: &[Vec<f32>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(rows: &[&[f32]], k: usize, rng: &mut impl Rng) -> Vec<Vec<f32>> {
    let mut centroids = vec![rows[rng.gen_range(0..rows.len())].to_vec()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // Every point coincides with a centroid already.
            Err(_) => rng.gen_range(0..rows.len()),
        };
        let c = rows[next].to_vec();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Cluster `rows` into `k` groups. Empty clusters keep their previous
/// centroid. Stops when assignments no longer change.
pub fn kmeans(rows: &[&[f32]], k: usize, opts: &KMeansOptions) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::arg("k-means needs k >= 1"));
    }
    if k > rows.len() {
        return Err(Error::arg(format!("k = {k} exceeds the {} available samples", rows.len())));
    }
    let dim = rows[0].len();
    let mut rng = seed::rng(opts.seed, "kmeans++", k as u64);
    let mut centroids = plus_plus_init(rows, k, &mut rng);
    let mut assignment = vec![usize::MAX; rows.len()];
    let mut iterations = 0;
    for _ in 0..opts.max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        for (a, r) in assignment.iter_mut().zip(rows) {
            let (j, _) = nearest(r, &centroids);
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, r) in assignment.iter().zip(rows) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(r.iter()) {
                *s += f64::from(v);
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| (s / counts[j] as f64) as f32).collect();
            }
        }
        if !changed {
            break;
        }
    }
    Ok(KMeansResult {
        centroids,
        assignment,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    #[test]
    fn k_one_is_the_mean() {
        let data = [[1.0f32, 2.0], [3.0, 6.0], [5.0, 1.0]];
        let rows: Vec<&[f32]> = data.iter().map(|r| &r[..]).collect();
        let res = kmeans(&rows, 1, &KMeansOptions::default()).unwrap();
        assert!((res.centroids[0][0] - 3.0).abs() < 1e-6);
        assert!((res.centroids[0][1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn recovers_planted_blobs() {
        let centers = [[0.0f32, 0.0], [5.0, 5.0], [-5.0, 5.0]];
        let mut rng = seed::rng(3, "blobs", 0);
        let mut data = Vec::new();
        for i in 0..30 {
            let c = centers[i % 3];
            let nx: f32 = rng.sample(StandardNormal);
            let ny: f32 = rng.sample(StandardNormal);
            data.push(vec![c[0] + 0.05 * nx, c[1] + 0.05 * ny]);
        }
        let rows: Vec<&[f32]> = data.iter().map(Vec::as_slice).collect();
        let res = kmeans(&rows, 3, &KMeansOptions { max_iter: 100, seed: 1 }).unwrap();
        for c in &centers {
            let best = res
                .centroids
                .iter()
                .map(|m| ((m[0] - c[0]).powi(2) + (m[1] - c[1]).powi(2)).sqrt())
                .fold(f32::INFINITY, f32::min);
            assert!(best < 0.05, "center {c:?} off by {best}");
        }
    }

    #[test]
    fn too_many_clusters() {
        let rows: Vec<&[f32]> = vec![&[0.0], &[1.0]];
        assert!(matches!(kmeans(&rows, 3, &KMeansOptions::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn identical_points() {
        let rows: Vec<&[f32]> = vec![&[1.0, 1.0]; 5];
        let res = kmeans(&rows, 2, &KMeansOptions::default()).unwrap();
        assert_eq!(res.centroids.len(), 2);
    }
}
