//! Node strengths and strength distributions.
//!
//! Every window's weight matrix is read as a complete weighted undirected
//! graph; a node's strength is the sum of its incident weights. Histograms
//! share one run-wide grid so distributions from different windows are
//! comparable bin by bin.

use crate::error::{Error, Result};
use crate::mi::MiMatrix;

/// Shared histogram grid: fixed-width bins from zero up to an upper edge
/// that covers the run-wide maximum strength.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthGrid {
    width: f64,
    n_bins: usize,
}

impl StrengthGrid {
    /// Grid of `width`-sized bins covering `[0, max_strength]`, the upper
    /// edge rounded up to the next bin boundary.
    pub fn covering(max_strength: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "histogram bin width {width} must be positive"
            )));
        }
        if !(max_strength.is_finite() && max_strength >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "maximum strength {max_strength} must be finite and nonnegative"
            )));
        }
        let n_bins = ((max_strength / width).floor() as usize + 1).max(1);
        Ok(Self { width, n_bins })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Upper edge of the grid.
    pub fn upper(&self) -> f64 {
        self.width * self.n_bins as f64
    }

    /// Bin edges, `n_bins + 1` values from 0 to the upper edge.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_bins).map(|i| i as f64 * self.width).collect()
    }

    /// Bin index of a strength value; the upper edge itself is closed.
    pub fn bin_of(&self, value: f64) -> Result<usize> {
        if !value.is_finite() || value < 0.0 || value > self.upper() {
            return Err(Error::OutsideGrid {
                value,
                upper: self.upper(),
            });
        }
        Ok(((value / self.width) as usize).min(self.n_bins - 1))
    }
}

/// Strength vector and normalized histogram for one window.
#[derive(Debug, Clone)]
pub struct StrengthDistribution {
    /// Window ordinal starting at 1.
    pub window_index: usize,
    /// Per-node sum of incident weights, panel ticker order.
    pub strengths: Vec<f64>,
    /// Normalized bin frequencies on the shared grid.
    pub histogram: Vec<f64>,
}

impl StrengthDistribution {
    pub fn from_matrix(m: &MiMatrix, grid: &StrengthGrid) -> Result<Self> {
        let strengths = node_strengths(m);
        let histogram = strength_histogram(&strengths, grid)?;
        Ok(Self {
            window_index: m.window_index,
            strengths,
            histogram,
        })
    }

    /// Mean node strength of the window.
    pub fn mean_strength(&self) -> f64 {
        self.strengths.iter().sum::<f64>() / self.strengths.len() as f64
    }
}

/// Row sums of the weight matrix.
pub fn node_strengths(m: &MiMatrix) -> Vec<f64> {
    m.weights.rows().into_iter().map(|row| row.sum()).collect()
}

/// Normalized histogram of strengths on the shared grid.
pub fn strength_histogram(strengths: &[f64], grid: &StrengthGrid) -> Result<Vec<f64>> {
    if strengths.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot build a histogram of zero strengths".into(),
        ));
    }
    let mut counts = vec![0usize; grid.n_bins()];
    for &s in strengths {
        counts[grid.bin_of(s)?] += 1;
    }
    let total = strengths.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn matrix_with_uniform_weight(n: usize, w: f64) -> MiMatrix {
        let mut weights = Array2::from_elem((n, n), w);
        for i in 0..n {
            weights[[i, i]] = 0.0;
        }
        MiMatrix::from_weights(1, weights).unwrap()
    }

    #[test]
    fn strengths_are_row_sums() {
        let m = matrix_with_uniform_weight(3, 0.5);
        assert_eq!(node_strengths(&m), vec![1.0, 1.0, 1.0]);
        let zero = matrix_with_uniform_weight(4, 0.0);
        assert_eq!(node_strengths(&zero), vec![0.0; 4]);
    }

    #[test]
    fn histogram_hand_case() {
        let grid = StrengthGrid::covering(30.0, 10.0).unwrap();
        assert_eq!(grid.edges(), vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        let hist = strength_histogram(&[5.0, 15.0, 25.0], &grid).unwrap();
        assert_eq!(hist, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
    }

    #[test]
    fn single_bin_histogram_is_an_indicator() {
        let grid = StrengthGrid::covering(100.0, 10.0).unwrap();
        let hist = strength_histogram(&[42.0, 43.5, 44.0], &grid).unwrap();
        let expected_bin = 4;
        for (i, v) in hist.iter().enumerate() {
            assert_eq!(*v, if i == expected_bin { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn upper_edge_is_closed_and_outside_is_an_error() {
        let grid = StrengthGrid::covering(25.0, 10.0).unwrap();
        assert_eq!(grid.upper(), 30.0);
        assert_eq!(grid.bin_of(30.0).unwrap(), 2);
        assert!(matches!(
            grid.bin_of(30.1).unwrap_err(),
            Error::OutsideGrid { .. }
        ));
        assert!(grid.bin_of(-0.5).is_err());
    }

    #[test]
    fn histogram_sums_to_one_and_ignores_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = StrengthGrid::covering(300.0, 10.0).unwrap();
        let mut values: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..300.0)).collect();
        let base = strength_histogram(&values, &grid).unwrap();
        assert_abs_diff_eq!(base.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        values.shuffle(&mut rng);
        assert_eq!(strength_histogram(&values, &grid).unwrap(), base);
    }

    #[test]
    fn scaling_weights_scales_strengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let mut weights = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let w = rng.gen_range(0.0..2.0);
                weights[[i, j]] = w;
                weights[[j, i]] = w;
            }
        }
        let m = MiMatrix::from_weights(1, weights.clone()).unwrap();
        let scaled = MiMatrix::from_weights(1, weights * 3.5).unwrap();
        let base = node_strengths(&m);
        let stretched = node_strengths(&scaled);
        for (b, s) in base.iter().zip(&stretched) {
            assert_abs_diff_eq!(s, &(b * 3.5), epsilon = 1e-12);
        }
    }
}
