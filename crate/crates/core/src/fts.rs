//! Core data model: functional time series, temporal block plans, and
//! Fourier frequency grids.
//!
//! A series is a `T x R` matrix of a curve observed at `R` functional grid
//! points over `T` time steps. Estimation splits time into `B` equal,
//! non-overlapping blocks of `T_B` observations and works on the Fourier
//! frequencies `omega_k = k / T_B` for `k = 1, ..., N_B = floor(T_B/2) - 1`.
//! All types here are immutable after construction and safe to share across
//! threads.

use crate::error::{Error, Result};
use ndarray::Array2;

/// A functional time series sampled on a fixed grid.
///
/// Rows are time points `t = 1..T`, columns are functional grid points.
#[derive(Debug, Clone)]
pub struct FunctionalTimeSeries {
    values: Array2<f64>,
    grid: Vec<f64>,
    sample_rate_hz: Option<f64>,
}

impl FunctionalTimeSeries {
    /// Build a series from raw values and an explicit grid.
    ///
    /// The grid must be strictly increasing inside `[0, 1]`, every entry must
    /// be finite, and the series needs at least two rows.
    pub fn new(values: Array2<f64>, grid: Vec<f64>, sample_rate_hz: Option<f64>) -> Result<Self> {
        let (t, r) = values.dim();
        if t < 2 {
            return Err(Error::InvalidSeries(format!("need T >= 2 rows, got {t}")));
        }
        if r < 1 {
            return Err(Error::InvalidSeries("need R >= 1 columns".into()));
        }
        if grid.len() != r {
            return Err(Error::InvalidSeries(format!(
                "grid has {} points but series has {} columns",
                grid.len(),
                r
            )));
        }
        for w in grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidSeries(
                    "grid must be strictly increasing".into(),
                ));
            }
        }
        if let (Some(&first), Some(&last)) = (grid.first(), grid.last()) {
            if !(0.0..=1.0).contains(&first) || !(0.0..=1.0).contains(&last) {
                return Err(Error::InvalidSeries("grid must lie within [0, 1]".into()));
            }
        }
        if let Some(rate) = sample_rate_hz {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::InvalidSeries("sample rate must be positive".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("all entries must be finite".into()));
        }
        Ok(Self {
            values,
            grid,
            sample_rate_hz,
        })
    }

    /// Series with the default equally spaced grid `(2r - 1) / (2R)`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let r = values.ncols();
        Self::new(values, uniform_grid(r), None)
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    /// True when the series is empty (never holds for a validated series).
    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of functional grid points.
    pub fn n_grid(&self) -> usize {
        self.values.ncols()
    }

    /// The raw `T x R` value matrix.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Functional grid positions in `[0, 1]`.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Sampling rate in Hz, when known.
    pub fn sample_rate_hz(&self) -> Option<f64> {
        self.sample_rate_hz
    }

    /// Copy with per-column means removed.
    pub fn centered(&self) -> Self {
        let mut values = self.values.clone();
        for mut col in values.columns_mut() {
            let mean = col.sum() / col.len() as f64;
            col.mapv_inplace(|v| v - mean);
        }
        Self {
            values,
            grid: self.grid.clone(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// Equally spaced interior grid `(2r - 1) / (2R)` for `r = 1..R`.
pub fn uniform_grid(r: usize) -> Vec<f64> {
    (1..=r).map(|i| (2 * i - 1) as f64 / (2 * r) as f64).collect()
}

/// Partition of `T` observations into `B` equal non-overlapping blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    total_len: usize,
    n_blocks: usize,
    block_len: usize,
    truncated: usize,
}

impl BlockPlan {
    /// Number of blocks `B`.
    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Observations per block `T_B`.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Effective series length `B * T_B` after truncation.
    pub fn effective_len(&self) -> usize {
        self.n_blocks * self.block_len
    }

    /// Trailing observations dropped when `B` does not divide `T`.
    pub fn truncated(&self) -> usize {
        self.truncated
    }

    /// Original series length before truncation.
    pub fn total_len(&self) -> usize {
        self.total_len
    }

    /// Rescaled-time midpoint `u_b = (b - 1/2) / B` of the 0-based block `b`.
    pub fn midpoint(&self, block: usize) -> f64 {
        (block as f64 + 0.5) / self.n_blocks as f64
    }

    /// All block midpoints in order.
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_blocks).map(|b| self.midpoint(b)).collect()
    }

    /// Half-open row range `[start, end)` of the 0-based block `b`.
    pub fn block_rows(&self, block: usize) -> std::ops::Range<usize> {
        let start = block * self.block_len;
        start..start + self.block_len
    }
}

/// Split `T` observations into `B` equal blocks, truncating the remainder.
///
/// Requires `T >= 2B` so every block keeps at least two observations. When
/// `B` does not divide `T` the trailing `T mod B` samples are dropped and
/// reported through [`BlockPlan::truncated`].
pub fn make_block_plan(total_len: usize, n_blocks: usize) -> Result<BlockPlan> {
    if n_blocks == 0 || total_len < 2 * n_blocks {
        return Err(Error::InvalidPlan {
            t: total_len,
            b: n_blocks,
        });
    }
    let block_len = total_len / n_blocks;
    Ok(BlockPlan {
        total_len,
        n_blocks,
        block_len,
        truncated: total_len - n_blocks * block_len,
    })
}

/// Fourier frequencies `omega_k = k / T_B` for `k = 1..N_B`.
///
/// Frequency indices are 1-based throughout so that index arithmetic matches
/// the usual DFT-bin convention; `0` and `0.5` are excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyGrid {
    block_len: usize,
    n_freq: usize,
}

impl FrequencyGrid {
    /// Block length `T_B` the grid is derived from.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Number of usable Fourier frequencies `N_B = floor(T_B/2) - 1`.
    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    /// Frequency value of 1-based index `k`.
    pub fn freq(&self, k: usize) -> f64 {
        debug_assert!(k >= 1 && k <= self.n_freq);
        k as f64 / self.block_len as f64
    }

    /// All frequencies in index order.
    pub fn freqs(&self) -> Vec<f64> {
        (1..=self.n_freq).map(|k| self.freq(k)).collect()
    }
}

/// Frequency grid for a block of `T_B` observations.
///
/// Fails for `T_B < 6`: no interior frequency would survive the margins the
/// search needs on each side of the grid.
pub fn fourier_grid(block_len: usize) -> Result<FrequencyGrid> {
    if block_len < 6 {
        return Err(Error::GridTooSmall { block_len });
    }
    Ok(FrequencyGrid {
        block_len,
        n_freq: block_len / 2 - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn block_plan_paper_setting() {
        let plan = make_block_plan(2000, 5).unwrap();
        assert_eq!(plan.block_len(), 400);
        assert_eq!(plan.truncated(), 0);
        let mids = plan.midpoints();
        let expect = [0.1, 0.3, 0.5, 0.7, 0.9];
        for (m, e) in mids.iter().zip(expect.iter()) {
            assert!((m - e).abs() < 1e-15);
        }
    }

    #[test]
    fn block_plan_single_block() {
        let plan = make_block_plan(10, 1).unwrap();
        assert_eq!(plan.block_len(), 10);
        assert_eq!(plan.midpoints(), vec![0.5]);
    }

    #[test]
    fn block_plan_truncates_remainder() {
        let plan = make_block_plan(103, 10).unwrap();
        assert_eq!(plan.block_len(), 10);
        assert_eq!(plan.effective_len(), 100);
        assert_eq!(plan.truncated(), 3);
    }

    #[test]
    fn block_plan_rejects_short_series() {
        assert!(make_block_plan(9, 5).is_err());
        assert!(make_block_plan(100, 0).is_err());
    }

    #[test]
    fn block_midpoints_are_symmetric() {
        for b in 1..40 {
            let plan = make_block_plan(2 * b * 7, b).unwrap();
            let mids = plan.midpoints();
            for i in 0..b {
                assert!((mids[i] + mids[b - 1 - i] - 1.0).abs() < 1e-12);
            }
            assert_eq!(plan.effective_len(), plan.n_blocks() * plan.block_len());
        }
    }

    #[test]
    fn fourier_grid_sizes() {
        let g = fourier_grid(320).unwrap();
        assert_eq!(g.n_freq(), 159);
        assert!((g.freq(1) - 1.0 / 320.0).abs() < 1e-15);

        let g = fourier_grid(8).unwrap();
        assert_eq!(g.n_freq(), 3);
        let f = g.freqs();
        assert_eq!(f, vec![0.125, 0.25, 0.375]);

        let g = fourier_grid(200).unwrap();
        assert_eq!(g.n_freq(), 99);
    }

    #[test]
    fn fourier_grid_excludes_endpoints() {
        for t_b in [6usize, 7, 9, 64, 127, 500] {
            let g = fourier_grid(t_b).unwrap();
            for f in g.freqs() {
                assert!(f > 0.0 && f < 0.5, "freq {f} out of (0, 0.5) for T_B={t_b}");
            }
            let step = 1.0 / t_b as f64;
            for w in g.freqs().windows(2) {
                assert!((w[1] - w[0] - step).abs() < 1e-15);
            }
        }
        assert!(fourier_grid(5).is_err());
    }

    #[test]
    fn series_validation() {
        let ok = FunctionalTimeSeries::new(
            arr2(&[[1.0, 2.0], [3.0, 4.0]]),
            vec![0.25, 0.75],
            Some(32.0),
        );
        assert!(ok.is_ok());

        let bad_grid = FunctionalTimeSeries::new(arr2(&[[1.0, 2.0], [3.0, 4.0]]), vec![0.75, 0.25], None);
        assert!(bad_grid.is_err());

        let nan = FunctionalTimeSeries::new(
            arr2(&[[f64::NAN, 2.0], [3.0, 4.0]]),
            vec![0.25, 0.75],
            None,
        );
        assert!(nan.is_err());

        let short = FunctionalTimeSeries::new(arr2(&[[1.0, 2.0]]), vec![0.25, 0.75], None);
        assert!(short.is_err());
    }

    #[test]
    fn centering_removes_column_means() {
        let x = FunctionalTimeSeries::from_values(arr2(&[[1.0, 10.0], [3.0, 30.0], [5.0, 20.0]]))
            .unwrap();
        let c = x.centered();
        for col in c.values().columns() {
            assert!(col.sum().abs() < 1e-12);
        }
    }
}
