//! Batched left-to-right frequency search for band partition points.
//!
//! The walk fixes a window origin, tests a batch of window widths against
//! the simulated null of the scan statistic, applies Hochberg step-up
//! control, and advances past each confirmed cut — creeping across the
//! frequency axis like an inchworm. Margins of one taper bandwidth are kept
//! clear of the grid edges and of every accepted cut.

use crate::error::{Error, Result};
use crate::multitaper::{DemeanedSpectrum, SpectralEstimate};
use crate::nullsim::{derive_seed, draw_null_scan, p_value};
use crate::scan::{scan_statistic, CovarianceModel, ScanWindow, TestGrid, WindowCovarianceBuilder};

/// An estimated partition of the frequency axis into bands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPartition {
    cuts: Vec<usize>,
    block_len: usize,
    n_freq: usize,
}

impl BandPartition {
    /// Partition from 1-based cut indices on the Fourier grid of `T_B`.
    pub fn new(mut cuts: Vec<usize>, block_len: usize, n_freq: usize) -> Result<Self> {
        cuts.sort_unstable();
        for w in cuts.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidArgument("duplicate cut".into()));
            }
        }
        if let (Some(&first), Some(&last)) = (cuts.first(), cuts.last()) {
            if first == 0 || last > n_freq {
                return Err(Error::InvalidArgument(format!(
                    "cut outside grid of {n_freq} frequencies"
                )));
            }
        }
        Ok(Self {
            cuts,
            block_len,
            n_freq,
        })
    }

    /// Single-band partition (no cuts).
    pub fn single_band(block_len: usize, n_freq: usize) -> Self {
        Self {
            cuts: Vec::new(),
            block_len,
            n_freq,
        }
    }

    /// Partition from cut frequencies, rounded to the nearest grid index.
    pub fn from_cut_freqs(freqs: &[f64], block_len: usize, n_freq: usize) -> Result<Self> {
        let cuts: Vec<usize> = freqs
            .iter()
            .map(|&f| (f * block_len as f64).round() as usize)
            .collect();
        Self::new(cuts, block_len, n_freq)
    }

    /// Number of bands `p = cuts + 1`.
    pub fn n_bands(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Cut positions as 1-based frequency indices, strictly increasing.
    pub fn cut_indices(&self) -> &[usize] {
        &self.cuts
    }

    /// Cut frequencies `k / T_B`, strictly increasing in `(0, 0.5)`.
    pub fn cut_freqs(&self) -> Vec<f64> {
        self.cuts
            .iter()
            .map(|&k| k as f64 / self.block_len as f64)
            .collect()
    }

    /// Number of Fourier frequencies the partition lives on.
    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    /// Block length behind the frequency grid.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Band id (0-based) of the 1-based frequency index `k`.
    ///
    /// Bands are half-open: frequency `k` belongs to band `i` when
    /// `cut_{i-1} <= k < cut_i` in index terms.
    pub fn band_of(&self, k: usize) -> usize {
        self.cuts.iter().filter(|&&c| c <= k).count()
    }

    /// Band boundaries as frequency intervals `(lo, hi)`, covering `(0, 0.5)`.
    pub fn band_intervals(&self) -> Vec<(f64, f64)> {
        let mut edges = vec![0.0];
        edges.extend(self.cut_freqs());
        edges.push(0.5);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One tested window width inside a pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    /// Width index `k`: the window spans `k` Fourier frequencies.
    pub k: usize,
    /// Window width `delta = k / T_B`.
    pub delta: f64,
    /// 1-based index of the tested target frequency.
    pub target_k: usize,
    /// Observed scan statistic.
    pub q: f64,
    /// Simulated p-value.
    pub p: f64,
}

/// What a pass did after testing its batch.
#[derive(Debug, Clone, PartialEq)]
pub enum PassAction {
    /// No rejection: the origin jumped past the batch.
    Advanced { new_origin_k: usize },
    /// A cut was accepted at the smallest rejected frequency.
    CutFound { cut_k: usize, new_origin_k: usize },
    /// The batch was empty; the walk stopped.
    NoTestableFrequency,
}

/// Record of one pass of the walk.
#[derive(Debug, Clone, PartialEq)]
pub struct PassRecord {
    /// 1-based index of the window origin `omega_0`.
    pub origin_k: usize,
    /// Tested widths in batch order.
    pub tests: Vec<TestRecord>,
    /// Width indices `k` whose null was rejected by Hochberg.
    pub rejected: Vec<usize>,
    /// Action taken at the end of the pass.
    pub action: PassAction,
}

/// Full audit trail of a search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub passes: Vec<PassRecord>,
}

/// Tuning parameters of the search.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Familywise error level per pass.
    pub alpha: f64,
    /// Maximum number of window widths tested per pass.
    pub n_max: usize,
    /// Null draws per tested width.
    pub d0: usize,
    /// Functional grid points used for null simulation.
    pub test_grid: TestGrid,
    /// Master seed; every (pass, width) gets a derived substream.
    pub seed: u64,
    /// Ignore cross-block covariance when simulating (recommended).
    pub block_diagonal: bool,
    /// Covariance model for the null fields.
    pub model: CovarianceModel,
}

impl SearchConfig {
    /// Paper-style defaults for a series with `R` grid points.
    pub fn new(n_grid: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            alpha: 0.05,
            n_max: 30,
            d0: 100_000,
            test_grid: TestGrid::equally_spaced(n_grid, 4)?,
            seed,
            block_diagonal: true,
            model: CovarianceModel::default(),
        })
    }
}

/// Hochberg step-up procedure at level `alpha`.
///
/// With sorted p-values `p_(1) <= ... <= p_(m)`, rejects the hypotheses with
/// the `k` smallest p-values where `k = max { i : p_(i) <= alpha/(m-i+1) }`.
/// Returns the original indices of the rejected hypotheses.
pub fn hochberg(pvalues: &[f64], alpha: f64) -> Vec<usize> {
    let m = pvalues.len();
    if m == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].partial_cmp(&pvalues[b]).expect("finite p-values"));
    let mut k = 0;
    for i in (1..=m).rev() {
        if pvalues[order[i - 1]] <= alpha / (m - i + 1) as f64 {
            k = i;
            break;
        }
    }
    let mut rejected: Vec<usize> = order[..k].to_vec();
    rejected.sort_unstable();
    rejected
}

/// Walk the frequency axis and estimate all band partition points.
///
/// Follows the batched search: with `epsilon` the taper bandwidth and
/// `k_eps = ceil(T_B epsilon)`, each pass at origin index `k*` tests widths
/// `k in {k_eps, ..., min(k_eps + n_max - 1, N_B - k* - k_eps)}`. Rejections
/// are controlled by Hochberg per pass; the smallest rejected frequency
/// becomes a cut and the origin jumps one bandwidth past it, otherwise the
/// origin jumps past the batch. The walk stops once the origin is within two
/// bandwidths of the top of the grid.
pub fn search_partition(
    g: &DemeanedSpectrum,
    s: &SpectralEstimate,
    config: &SearchConfig,
) -> Result<(BandPartition, SearchTrace)> {
    let plan = s.plan();
    if plan.n_blocks() < 2 {
        return Err(Error::DegenerateDemean);
    }
    // Project both the statistic and its null onto the functional test grid
    // so the two share one discretization of the domain integrals.
    let restricted;
    let (g, s) = if config.test_grid.len() < s.n_grid() {
        restricted = (
            g.restrict(config.test_grid.indices())?,
            s.restrict(config.test_grid.indices())?,
        );
        (&restricted.0, &restricted.1)
    } else {
        (g, s)
    };
    let sim_grid = TestGrid::equally_spaced(s.n_grid(), s.n_grid())?;
    let grid = s.grid();
    let t_b = plan.block_len();
    let n_b = grid.n_freq();
    let k = s.n_tapers();
    let epsilon = (k + 1) as f64 / (t_b + 1) as f64;
    let k_eps = (t_b as f64 * epsilon).ceil() as usize;

    let mut cuts: Vec<usize> = Vec::new();
    let mut trace = SearchTrace::default();
    let mut origin = k_eps; // k*: 1-based index of omega_0
    let mut pass_idx: u64 = 0;

    loop {
        if origin as f64 / t_b as f64 > n_b as f64 / t_b as f64 - 2.0 * epsilon {
            break;
        }
        let pass_origin = origin;
        let k_min = k_eps;
        // all terms in index units on the omega_k grid
        let upper = n_b as isize - pass_origin as isize - k_eps as isize;
        let k_max = (k_min as isize + config.n_max as isize - 1).min(upper);
        if k_max < k_min as isize {
            trace.passes.push(PassRecord {
                origin_k: pass_origin,
                tests: Vec::new(),
                rejected: Vec::new(),
                action: PassAction::NoTestableFrequency,
            });
            break;
        }
        let k_max = k_max as usize;

        let mut builder =
            WindowCovarianceBuilder::new(s, &sim_grid, pass_origin, config.model)?;
        let mut tests = Vec::with_capacity(k_max - k_min + 1);
        for width in k_min..=k_max {
            let window = ScanWindow::new(grid, pass_origin, width)?;
            let q = scan_statistic(g, &window)?;
            let cov = builder.covariance(width, !config.block_diagonal)?;
            let seed = derive_seed(config.seed, pass_idx, width as u64);
            let draws = draw_null_scan(&cov, config.d0, k, seed, config.block_diagonal)?;
            let p = p_value(&draws, q);
            tests.push(TestRecord {
                k: width,
                delta: width as f64 / t_b as f64,
                target_k: pass_origin + width,
                q,
                p,
            });
        }

        let pvals: Vec<f64> = tests.iter().map(|t| t.p).collect();
        let rejected_pos = hochberg(&pvals, config.alpha);
        let rejected: Vec<usize> = rejected_pos.iter().map(|&i| tests[i].k).collect();

        let action = if rejected.is_empty() {
            origin = pass_origin + k_max;
            PassAction::Advanced { new_origin_k: origin }
        } else {
            // widths are increasing, so the smallest rejected width gives
            // the smallest rejected frequency
            let cut = pass_origin + rejected[0];
            cuts.push(cut);
            origin = cut + k_eps;
            PassAction::CutFound {
                cut_k: cut,
                new_origin_k: origin,
            }
        };
        trace.passes.push(PassRecord {
            origin_k: pass_origin,
            tests,
            rejected,
            action,
        });
        pass_idx += 1;
    }

    Ok((BandPartition::new(cuts, t_b, n_b)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hochberg_rejects_nothing_at_one() {
        assert!(hochberg(&[1.0, 1.0, 1.0], 0.05).is_empty());
        assert!(hochberg(&[], 0.05).is_empty());
    }

    #[test]
    fn hochberg_single_small_p() {
        assert_eq!(hochberg(&[0.001], 0.05), vec![0]);
    }

    #[test]
    fn hochberg_step_up_hand_case() {
        // thresholds 0.05/3, 0.05/2, 0.05: only the 0.01 hypothesis rejected
        let rej = hochberg(&[0.01, 0.04, 0.30], 0.05);
        assert_eq!(rej, vec![0]);
    }

    #[test]
    fn hochberg_rejects_all_when_largest_passes() {
        // p_(3) = 0.04 <= 0.05 -> all three rejected
        let rej = hochberg(&[0.04, 0.02, 0.03], 0.05);
        assert_eq!(rej, vec![0, 1, 2]);
    }

    #[test]
    fn partition_band_membership() {
        let p = BandPartition::new(vec![10, 30], 100, 49).unwrap();
        assert_eq!(p.n_bands(), 3);
        assert_eq!(p.band_of(5), 0);
        assert_eq!(p.band_of(10), 1);
        assert_eq!(p.band_of(29), 1);
        assert_eq!(p.band_of(30), 2);
        assert_eq!(p.cut_freqs(), vec![0.1, 0.3]);
        let iv = p.band_intervals();
        assert_eq!(iv, vec![(0.0, 0.1), (0.1, 0.3), (0.3, 0.5)]);
    }

    #[test]
    fn partition_rejects_duplicates_and_off_grid() {
        assert!(BandPartition::new(vec![4, 4], 100, 49).is_err());
        assert!(BandPartition::new(vec![0], 100, 49).is_err());
        assert!(BandPartition::new(vec![50], 100, 49).is_err());
    }
}
