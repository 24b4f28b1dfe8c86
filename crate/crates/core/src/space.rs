//! Bounded continuous action box with an optional per-dimension
//! discretization, the universe every sampler and predictor is defined over.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::RunRng;

/// A box `[low, high]^d`, optionally discretized into `bins` evenly spaced
/// points per dimension (endpoints included, so 3 bins on `[-1, 1]` gives the
/// bang-off-bang set `{-1, 0, 1}`).
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpace {
    low: Vec<f64>,
    high: Vec<f64>,
    bins: Option<usize>,
}

impl ActionSpace {
    pub fn continuous(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.is_empty() || low.len() != high.len() {
            return Err(Error::Config(format!(
                "action box needs matching non-empty bounds, got {} and {}",
                low.len(),
                high.len()
            )));
        }
        for (i, (l, h)) in low.iter().zip(&high).enumerate() {
            if !(l < h) {
                return Err(Error::Config(format!(
                    "action bound {i}: low {l} must be strictly below high {h}"
                )));
            }
        }
        Ok(ActionSpace { low, high, bins: None })
    }

    /// `[-bound, bound]^dims`.
    pub fn symmetric(dims: usize, bound: f64) -> Self {
        ActionSpace::continuous(vec![-bound; dims], vec![bound; dims])
            .expect("symmetric box is always valid")
    }

    /// Returns a discretized view of the same box.
    pub fn discretized(&self, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
        }
        Ok(ActionSpace {
            low: self.low.clone(),
            high: self.high.clone(),
            bins: Some(bins),
        })
    }

    /// Drops the discretization, exposing the underlying continuous box.
    pub fn continuous_view(&self) -> Self {
        ActionSpace {
            low: self.low.clone(),
            high: self.high.clone(),
            bins: None,
        }
    }

    pub fn dims(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn bins(&self) -> Option<usize> {
        self.bins
    }

    pub fn center(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn half_width(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (h - l)).collect()
    }

    /// Continuous coordinate of bin `idx` along `dim`.
    pub fn bin_center(&self, dim: usize, idx: usize) -> f64 {
        let bins = self.bins.expect("bin_center on a continuous space");
        debug_assert!(idx < bins);
        let step = (self.high[dim] - self.low[dim]) / (bins - 1) as f64;
        self.low[dim] + idx as f64 * step
    }

    /// Index of the bin center nearest to `x` along `dim`; exact midpoints
    /// break toward the lower index.
    pub fn nearest_bin(&self, dim: usize, x: f64) -> usize {
        let bins = self.bins.expect("nearest_bin on a continuous space");
        let step = (self.high[dim] - self.low[dim]) / (bins - 1) as f64;
        let t = (x - self.low[dim]) / step;
        let idx = (t - 0.5).ceil();
        (idx.max(0.0) as usize).min(bins - 1)
    }

    /// Snaps each coordinate to its nearest bin center (no-op when
    /// continuous).
    pub fn snap(&self, action: &mut [f64]) {
        if self.bins.is_some() {
            for d in 0..self.dims() {
                action[d] = self.bin_center(d, self.nearest_bin(d, action[d]));
            }
        }
    }

    pub fn clamp(&self, action: &mut [f64]) {
        for d in 0..self.dims() {
            action[d] = action[d].clamp(self.low[d], self.high[d]);
        }
    }

    pub fn contains(&self, action: &[f64]) -> bool {
        action.len() == self.dims()
            && action
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(a, (l, h))| *a >= *l && *a <= *h)
    }

    /// Draws one action, i.i.d. per coordinate: uniform over the box, or
    /// uniform over bin centers when discretized. Cost is linear in the
    /// number of dimensions; the grid is never enumerated.
    pub fn sample_uniform_into(&self, rng: &mut RunRng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims());
        match self.bins {
            None => {
                for d in 0..self.dims() {
                    out[d] = rng.random_range(self.low[d]..self.high[d]);
                }
            }
            Some(bins) => {
                for d in 0..self.dims() {
                    let idx = rng.random_range(0..bins);
                    out[d] = self.bin_center(d, idx);
                }
            }
        }
    }

    /// Draws `n` actions as a matrix (possibly zero rows).
    pub fn sample_uniform(&self, n: usize, rng: &mut RunRng) -> Mat {
        let mut m = Mat::zeros(n, self.dims());
        for r in 0..n {
            self.sample_uniform_into(rng, m.row_mut(r));
        }
        m
    }

    /// Number of grid points `bins^dims` for a discretized space, if it fits
    /// in a `u128`.
    pub fn grid_size(&self) -> Option<u128> {
        let bins = self.bins? as u128;
        let mut total: u128 = 1;
        for _ in 0..self.dims() {
            total = total.checked_mul(bins)?;
        }
        Some(total)
    }

    /// Materializes the full discrete action set, refusing to construct more
    /// than `ceiling` actions. The refusal is deterministic in
    /// `bins` and `dims` alone.
    pub fn enumerate_grid(&self, ceiling: u128) -> Result<Mat> {
        let bins = self
            .bins
            .ok_or_else(|| Error::Config("enumerate_grid on a continuous space".into()))?;
        let count = self.grid_size().unwrap_or(u128::MAX);
        if count > ceiling {
            return Err(Error::ActionOutInfeasible {
                bins,
                dims: self.dims(),
                count,
                ceiling,
            });
        }
        let n = count as usize;
        let d = self.dims();
        let mut m = Mat::zeros(n, d);
        for flat in 0..n {
            let mut rem = flat;
            let row = m.row_mut(flat);
            for dim in (0..d).rev() {
                row[dim] = self.bin_center(dim, rem % bins);
                rem /= bins;
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn uniform_samples_stay_in_bounds_with_centered_mean() {
        let space = ActionSpace::symmetric(2, 1.0);
        let mut rng = rng_from_seed(3);
        let m = space.sample_uniform(1000, &mut rng);
        let mut mean = [0.0; 2];
        for row in m.iter_rows() {
            assert!(space.contains(row));
            mean[0] += row[0];
            mean[1] += row[1];
        }
        for v in mean {
            assert!((v / 1000.0).abs() < 0.1);
        }
    }

    #[test]
    fn zero_samples_give_empty_set() {
        let space = ActionSpace::symmetric(3, 1.0);
        let mut rng = rng_from_seed(0);
        assert_eq!(space.sample_uniform(0, &mut rng).rows(), 0);
    }

    #[test]
    fn high_dimensional_discrete_sampling_never_enumerates() {
        // 3^38 grid points; sampling must stay linear in n * dims.
        let space = ActionSpace::symmetric(38, 1.0).discretized(3).unwrap();
        assert_eq!(space.grid_size(), Some(3u128.pow(38)));
        let mut rng = rng_from_seed(1);
        let m = space.sample_uniform(100, &mut rng);
        for row in m.iter_rows() {
            for &v in row {
                assert!(v == -1.0 || v == 0.0 || v == 1.0);
            }
        }
    }

    #[test]
    fn bang_off_bang_centers_and_nearest_bin() {
        let space = ActionSpace::symmetric(1, 1.0).discretized(3).unwrap();
        assert_eq!(space.bin_center(0, 0), -1.0);
        assert_eq!(space.bin_center(0, 1), 0.0);
        assert_eq!(space.bin_center(0, 2), 1.0);
        // 0.4 is nearest to center 0 (index 1).
        assert_eq!(space.nearest_bin(0, 0.4), 1);
        // Exact midpoint 0.5 breaks toward the lower index.
        assert_eq!(space.nearest_bin(0, 0.5), 1);
        assert_eq!(space.nearest_bin(0, 0.51), 2);
        assert_eq!(space.nearest_bin(0, -2.0), 0);
    }

    #[test]
    fn grid_enumeration_and_ceiling() {
        let space = ActionSpace::symmetric(2, 1.0).discretized(3).unwrap();
        let grid = space.enumerate_grid(1_000_000).unwrap();
        assert_eq!(grid.rows(), 9);
        assert_eq!(grid.row(0), &[-1.0, -1.0]);
        assert_eq!(grid.row(8), &[1.0, 1.0]);

        let big = ActionSpace::symmetric(38, 1.0).discretized(3).unwrap();
        let err = big.enumerate_grid(1_000_000).unwrap_err();
        match err {
            Error::ActionOutInfeasible { count, .. } => {
                assert_eq!(count, 3u128.pow(38));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(ActionSpace::continuous(vec![1.0], vec![1.0]).is_err());
        assert!(ActionSpace::continuous(vec![2.0], vec![1.0]).is_err());
        let space = ActionSpace::symmetric(1, 1.0);
        assert!(space.discretized(1).is_err());
    }
}
