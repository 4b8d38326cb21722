use super::FeatureVector;
use crate::error::{Error, Result};

/// (channels, height, width) of the AlexNet conv5 map used for pooling.
pub const ALEXNET_CONV_SHAPE: (usize, usize, usize) = (256, 6, 6);

/// Replace every channel of a channel-major `c × h × w` map by its spatial mean.
pub fn spatial_pool(map: &[f32], shape: (usize, usize, usize)) -> Result<FeatureVector> {
    let (c, h, w) = shape;
    let cells = h * w;
    if c == 0 || cells == 0 || map.len() != c * cells {
        return Err(Error::arg(format!(
            "feature map of {} values does not have shape {c}x{h}x{w}",
            map.len()
        )));
    }
    let pooled = map
        .chunks_exact(cells)
        .map(|ch| (ch.iter().map(|&v| f64::from(v)).sum::<f64>() / cells as f64) as f32)
        .collect();
    FeatureVector::new(pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn constant_maps() {
        let ones = vec![1.0; 256 * 36];
        assert_eq!(spatial_pool(&ones, ALEXNET_CONV_SHAPE).unwrap().as_slice(), &[1.0; 256][..]);

        let per_channel: Vec<f32> = (0..256).flat_map(|c| std::iter::repeat(c as f32).take(36)).collect();
        let pooled = spatial_pool(&per_channel, ALEXNET_CONV_SHAPE).unwrap();
        for (c, v) in pooled.as_slice().iter().enumerate() {
            assert_eq!(*v, c as f32);
        }
    }

    #[test]
    fn random_map_matches_cell_mean() {
        let mut rng = crate::seed::rng(5, "pool-test", 0);
        let map: Vec<f32> = (0..256 * 36).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let pooled = spatial_pool(&map, ALEXNET_CONV_SHAPE).unwrap();
        for c in 0..256 {
            let mut s = 0.0f64;
            for cell in 0..36 {
                s += f64::from(map[c * 36 + cell]);
            }
            assert!((f64::from(pooled.as_slice()[c]) - s / 36.0).abs() < 1e-6);
        }
    }

    #[test]
    fn wrong_shape() {
        assert!(matches!(spatial_pool(&[0.0; 35], (1, 6, 6)), Err(Error::Argument(_))));
    }
}
