mod gmm;
mod kmeans;

pub use gmm::{fit_diag_gmm, log_density, GaussianComponent, GmmOptions, VARIANCE_FLOOR};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult};

pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}
