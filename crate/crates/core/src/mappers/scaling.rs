use serde::{Deserialize, Serialize};

/// How raw features are mapped into [0, 1] before complement coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// Features already lie in [0, 1] (e.g. MNIST pixels).
    None,
    /// Per-dimension min-max fitted on the first task, then frozen; later
    /// values are clamped.
    MinMaxFirstTask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    min: Vec<f32>,
    range: Vec<f32>,
}

impl MinMaxScaler {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f32]>) -> Option<Self> {
        let mut it = rows.into_iter();
        let first = it.next()?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for r in it {
            for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(r) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        let range = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
        Some(MinMaxScaler { min, range })
    }

    /// Scale into [0, 1]. Dimensions that were constant on the fitting data
    /// map to 0 at or below that constant and 1 above it.
    pub fn transform(&self, x: &[f32]) -> Vec<f32> {
        x.iter()
            .zip(self.min.iter().zip(&self.range))
            .map(|(&v, (&lo, &r))| {
                if r > 0.0 {
                    ((v - lo) / r).clamp(0.0, 1.0)
                } else if v > lo {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_and_handles_constant_columns() {
        let data = [[0.0f32, 5.0], [2.0, 5.0]];
        let s = MinMaxScaler::fit(data.iter().map(|r| &r[..])).unwrap();
        assert_eq!(s.transform(&[1.0, 5.0]), vec![0.5, 0.0]);
        assert_eq!(s.transform(&[3.0, 6.0]), vec![1.0, 1.0]);
        assert_eq!(s.transform(&[-1.0, 4.0]), vec![0.0, 0.0]);
    }
}
