//! Diagonal-covariance Gaussian mixtures fitted by EM in log space.

use rand::Rng;

use super::kmeans::{kmeans, KMeansOptions};
use crate::error::{Error, Result};
use crate::seed;

/// Lower bound on every per-dimension variance.
pub const VARIANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub mean: Vec<f32>,
    /// Per-dimension variances, each at least the floor.
    pub var: Vec<f32>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Relative log-likelihood improvement below which EM stops.
    pub tol: f64,
    pub var_floor: f64,
    pub seed: u64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            max_iter: 100,
            tol: 1e-5,
            var_floor: VARIANCE_FLOOR,
            seed: 0,
        }
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln N(x; mean, diag(var))`.
pub fn log_density(x: &[f32], mean: &[f32], var: &[f32]) -> f64 {
    let mut acc = 0.0;
    for ((&xi, &m), &v) in x.iter().zip(mean).zip(var) {
        let v = f64::from(v);
        let d = f64::from(xi) - f64::from(m);
        acc += LN_2PI + v.ln() + d * d / v;
    }
    -0.5 * acc
}

fn logsumexp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

fn column_variance(rows: &[&[f32]], floor: f64) -> Vec<f32> {
    let n = rows.len() as f64;
    let dim = rows[0].len();
    let mut mean = vec![0.0f64; dim];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(r.iter()) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; dim];
    for r in rows {
        for ((s, &v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
            let d = f64::from(v) - m;
            *s += d * d;
        }
    }
    var.iter().map(|s| (s / n).max(floor) as f32).collect()
}

/// Fit `k` diagonal Gaussians to `rows`. Initialization comes from k-means;
/// a component whose responsibility mass vanishes is re-seeded on a random
/// sample with the data's overall variance.
pub fn fit_diag_gmm(rows: &[&[f32]], k: usize, opts: &GmmOptions) -> Result<Vec<GaussianComponent>> {
    if k == 0 {
        return Err(Error::arg("a mixture needs k >= 1"));
    }
    if k > rows.len() {
        return Err(Error::arg(format!("k = {k} exceeds the {} available samples", rows.len())));
    }
    let n = rows.len();
    let dim = rows[0].len();
    let init = kmeans(
        rows,
        k,
        &KMeansOptions {
            max_iter: 100,
            seed: opts.seed,
        },
    )?;
    let global_var = column_variance(rows, opts.var_floor);
    let mut rng = seed::rng(opts.seed, "gmm-reseed", k as u64);

    let mut comps: Vec<GaussianComponent> = (0..k)
        .map(|j| {
            let members: Vec<&[f32]> = rows
                .iter()
                .zip(&init.assignment)
                .filter(|(_, &a)| a == j)
                .map(|(r, _)| *r)
                .collect();
            if members.is_empty() {
                GaussianComponent {
                    mean: rows[rng.gen_range(0..n)].to_vec(),
                    var: global_var.clone(),
                    weight: 1.0 / n as f64,
                }
            } else {
                GaussianComponent {
                    mean: init.centroids[j].clone(),
                    var: column_variance(&members, opts.var_floor),
                    weight: members.len() as f64 / n as f64,
                }
            }
        })
        .collect();
    normalize(&mut comps);

    let mut resp = vec![0.0f64; n * k];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut logp = vec![0.0f64; k];
    for _ in 0..opts.max_iter {
        // E-step.
        let mut ll = 0.0;
        for (i, r) in rows.iter().enumerate() {
            for (j, c) in comps.iter().enumerate() {
                logp[j] = c.weight.ln() + log_density(r, &c.mean, &c.var);
            }
            let lse = logsumexp(&logp);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (logp[j] - lse).exp();
            }
        }

        // M-step.
        for j in 0..k {
            let mass: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if mass < 1e-10 * n as f64 {
                comps[j] = GaussianComponent {
                    mean: rows[rng.gen_range(0..n)].to_vec(),
                    var: global_var.clone(),
                    weight: 1.0 / n as f64,
                };
                continue;
            }
            let mut mean = vec![0.0f64; dim];
            for (i, r) in rows.iter().enumerate() {
                let w = resp[i * k + j];
                if w == 0.0 {
                    continue;
                }
                for (m, &v) in mean.iter_mut().zip(r.iter()) {
                    *m += w * f64::from(v);
                }
            }
            mean.iter_mut().for_each(|m| *m /= mass);
            let mut var = vec![0.0f64; dim];
            for (i, r) in rows.iter().enumerate() {
                let w = resp[i * k + j];
                if w == 0.0 {
                    continue;
                }
                for ((s, &v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                    let d = f64::from(v) - m;
                    *s += w * d * d;
                }
            }
            comps[j] = GaussianComponent {
                mean: mean.iter().map(|&m| m as f32).collect(),
                var: var.iter().map(|s| (s / mass).max(opts.var_floor) as f32).collect(),
                weight: mass / n as f64,
            };
        }
        normalize(&mut comps);

        let improvement = (ll - prev_ll) / ll.abs().max(f64::MIN_POSITIVE);
        prev_ll = ll;
        if improvement.abs() < opts.tol {
            break;
        }
    }
    Ok(comps)
}

fn normalize(comps: &mut [GaussianComponent]) {
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps {
        c.weight /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    #[test]
    fn single_component_is_closed_form() {
        let data = [[1.0f32, 0.0], [2.0, 0.0], [6.0, 0.0]];
        let rows: Vec<&[f32]> = data.iter().map(|r| &r[..]).collect();
        let c = &fit_diag_gmm(&rows, 1, &GmmOptions::default()).unwrap()[0];
        assert!((c.mean[0] - 3.0).abs() < 1e-6);
        // Population variance of {1,2,6} is 14/3; the constant column is floored.
        assert!((c.var[0] - 14.0 / 3.0).abs() < 1e-5);
        assert_eq!(c.var[1], VARIANCE_FLOOR as f32);
        assert!((c.weight - 1.0).abs() < 1e-12);
    }

    /// Plain EM on 1-D data written independently of the implementation,
    /// run from the same starting point until the means stop moving.
    fn em_oracle(xs: &[f64], mut mu: [f64; 2]) -> [f64; 2] {
        let mut var = [1.0f64; 2];
        let mut w = [0.5f64; 2];
        for _ in 0..500 {
            let mut r0 = vec![0.0; xs.len()];
            for (i, &x) in xs.iter().enumerate() {
                let p = |k: usize| w[k] * (-(x - mu[k]).powi(2) / (2.0 * var[k])).exp() / (2.0 * std::f64::consts::PI * var[k]).sqrt();
                r0[i] = p(0) / (p(0) + p(1));
            }
            let n0: f64 = r0.iter().sum();
            let n1 = xs.len() as f64 - n0;
            let m0 = xs.iter().zip(&r0).map(|(x, r)| x * r).sum::<f64>() / n0;
            let m1 = xs.iter().zip(&r0).map(|(x, r)| x * (1.0 - r)).sum::<f64>() / n1;
            var[0] = xs.iter().zip(&r0).map(|(x, r)| r * (x - m0).powi(2)).sum::<f64>() / n0;
            var[1] = xs.iter().zip(&r0).map(|(x, r)| (1.0 - r) * (x - m1).powi(2)).sum::<f64>() / n1;
            w = [n0 / xs.len() as f64, n1 / xs.len() as f64];
            mu = [m0, m1];
        }
        mu
    }

    #[test]
    fn two_planted_blobs() {
        let mut rng = seed::rng(9, "gmm-blobs", 0);
        let xs: Vec<f64> = (0..400)
            .map(|i| {
                let c = if i % 2 == 0 { -2.0 } else { 3.0 };
                c + 0.5 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let data: Vec<[f32; 1]> = xs.iter().map(|&x| [x as f32]).collect();
        let rows: Vec<&[f32]> = data.iter().map(|r| &r[..]).collect();
        let comps = fit_diag_gmm(&rows, 2, &GmmOptions { seed: 4, ..GmmOptions::default() }).unwrap();
        let mut got: Vec<f64> = comps.iter().map(|c| f64::from(c.mean[0])).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = em_oracle(&xs, [-1.0, 1.0]);
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, (w, planted)) in got.iter().zip(want.iter().zip([-2.0, 3.0])) {
            assert!((g - w).abs() < 0.1, "EM mean {g} vs oracle {w}");
            assert!((g - planted).abs() < 0.1, "EM mean {g} vs planted {planted}");
        }
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
