//! Within-band stationarity test.
//!
//! If the spectrum inside a band is constant over time, the demeaned
//! spectrum vanishes there; the statistic integrates `|g_hat|^2` over the
//! band and over the functional domain, and its null is simulated from
//! Gaussian fields indexed jointly by band frequency and the functional
//! test grid, with the same covariance kernels the scan uses.

use crate::error::{Error, Result};
use crate::multitaper::{DemeanedSpectrum, SpectralEstimate};
use crate::nullsim::{p_value, sample_quadform_sums, quad_spectrum, NullDraws, QuadComponent};
use crate::scan::{project_to_psd, CovarianceModel, FieldEvaluator, TestGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Cap on the number of band frequencies carried by the simulation grid.
/// Larger bands are subsampled to this many equally spaced frequencies.
pub const MAX_SIM_FREQS: usize = 16;

/// Outcome of a stationarity test on one band.
#[derive(Debug, Clone)]
pub struct StationarityResult {
    /// Tested band `(omega_1, omega_2)`.
    pub band: (f64, f64),
    /// Integrated statistic `Q0`.
    pub q0: f64,
    /// Scaled statistic `K Q0 / B` compared against the simulated null.
    pub scaled: f64,
    /// Fraction of null draws exceeding the scaled statistic.
    pub p: f64,
    /// Rejection decision at the configured level.
    pub reject: bool,
    /// Level the decision was taken at.
    pub alpha: f64,
    /// Number of Fourier frequencies in the band.
    pub n_band_freqs: usize,
    /// 1-based frequency indices carried by the simulation grid (subsampled
    /// when the band holds more than [`MAX_SIM_FREQS`]).
    pub sim_freqs: Vec<usize>,
    /// Seed the null draws were generated from.
    pub seed: u64,
}

/// 1-based indices of the Fourier frequencies in `[lo, hi)`.
fn band_freq_indices(g: &DemeanedSpectrum, lo: f64, hi: f64) -> Result<Vec<usize>> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "band must satisfy omega1 < omega2, got ({lo}, {hi})"
        )));
    }
    let t_b = g.plan().block_len() as f64;
    let n_b = g.grid().n_freq();
    let idx: Vec<usize> = (1..=n_b)
        .filter(|&k| {
            let f = k as f64 / t_b;
            f >= lo && f < hi
        })
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyBand { lo, hi });
    }
    Ok(idx)
}

/// Integrated within-band statistic.
///
/// `Q0 = (1/B) sum_b (omega2 - omega1) * mean over band frequencies of
/// mean_{i,j} |g_hat_{b,omega}(tau_i, tau_j)|^2`, the mean-rule
/// discretization of the triple integral.
pub fn stationarity_statistic(g: &DemeanedSpectrum, lo: f64, hi: f64) -> Result<f64> {
    let idx = band_freq_indices(g, lo, hi)?;
    let b = g.plan().n_blocks();
    let r = g.n_grid();
    let width = hi - lo;
    let mut total = 0.0;
    for blk in 0..b {
        let mut band_acc = 0.0;
        for &k in &idx {
            let kern = g.kernel(blk, k);
            let mut acc = 0.0;
            for i in 0..r {
                for j in 0..r {
                    acc += kern[[i, j]].norm_sqr();
                }
            }
            band_acc += acc / (r * r) as f64;
        }
        total += width * band_acc / idx.len() as f64;
    }
    Ok(total / b as f64)
}

/// Equally spaced subsample of at most `cap` elements.
fn subsample(idx: &[usize], cap: usize) -> Vec<usize> {
    if idx.len() <= cap {
        return idx.to_vec();
    }
    let mut out: Vec<usize> = (0..cap)
        .map(|i| idx[(i * (idx.len() - 1)) as usize / (cap - 1)])
        .collect();
    out.dedup();
    out
}

/// Null draws for the scaled statistic of one band.
///
/// Each draw is `(1/B^2) sum_b (omega2-omega1) * mean over the simulation
/// grid of H_b^2`, with `H_b` a zero-mean Gaussian field over (band
/// frequency, test-grid pair) whose covariance couples frequencies through
/// the same kernel model as the scan. Sampling goes through the spectral
/// factor of the projected per-block covariance; the full joint matrix is
/// used instead when `block_diagonal` is false.
#[allow(clippy::too_many_arguments)]
pub fn draw_null_stationarity(
    s: &SpectralEstimate,
    sim_freqs: &[usize],
    band_width: f64,
    test_grid: &TestGrid,
    d0: usize,
    seed: u64,
    block_diagonal: bool,
    model: CovarianceModel,
) -> Result<NullDraws> {
    if d0 == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let eval = FieldEvaluator::new(s, test_grid, model)?;
    let b = eval.n_blocks();
    let bf = b as f64;
    let m = test_grid.field_dim();
    let l = sim_freqs.len();
    let dim = l * m;

    // per-block F matrices at every frequency pair of the simulation grid
    let mut f_per_block: Vec<DMatrix<Complex64>> = vec![DMatrix::zeros(dim, dim); b];
    let mut f_bar: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
    for (a, &ka) in sim_freqs.iter().enumerate() {
        for (c, &kc) in sim_freqs.iter().enumerate() {
            let f_all = eval.f_all_blocks(ka, kc);
            for (blk, f) in f_all.iter().enumerate() {
                f_per_block[blk]
                    .view_mut((a * m, c * m), (m, m))
                    .copy_from(f);
            }
            let mut mean = DMatrix::<Complex64>::zeros(m, m);
            for f in &f_all {
                mean += f;
            }
            mean /= Complex64::new(bf * bf, 0.0);
            f_bar.view_mut((a * m, c * m), (m, m)).copy_from(&mean);
        }
    }

    let scale = band_width / dim as f64;
    let components: Vec<QuadComponent> = if block_diagonal {
        f_per_block
            .iter()
            .map(|fb| {
                let raw = fb * Complex64::new(1.0 - 2.0 / bf, 0.0) + &f_bar;
                QuadComponent {
                    eigenvalues: quad_spectrum(&project_to_psd(&raw)),
                    scale,
                }
            })
            .collect()
    } else {
        let mut big = DMatrix::<Complex64>::zeros(b * dim, b * dim);
        for b1 in 0..b {
            for b2 in 0..b {
                let block = if b1 == b2 {
                    &f_per_block[b1] * Complex64::new(1.0 - 2.0 / bf, 0.0) + &f_bar
                } else {
                    (&f_per_block[b1] + &f_per_block[b2]) * Complex64::new(-1.0 / bf, 0.0) + &f_bar
                };
                big.view_mut((b1 * dim, b2 * dim), (dim, dim)).copy_from(&block);
            }
        }
        vec![QuadComponent {
            eigenvalues: quad_spectrum(&project_to_psd(&big)),
            scale,
        }]
    };

    let values = sample_quadform_sums(&components, d0, 1.0 / (bf * bf), seed);
    Ok(NullDraws::from_parts(values, seed, block_diagonal))
}

/// Test whether the spectrum is stationary inside the band `[lo, hi)`.
#[allow(clippy::too_many_arguments)]
pub fn stationarity_test(
    g: &DemeanedSpectrum,
    s: &SpectralEstimate,
    lo: f64,
    hi: f64,
    d0: usize,
    test_grid: &TestGrid,
    alpha: f64,
    seed: u64,
    block_diagonal: bool,
    model: CovarianceModel,
) -> Result<StationarityResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    // statistic and null share the test-grid discretization of the domain
    let restricted;
    let (g, s) = if test_grid.len() < s.n_grid() {
        restricted = (g.restrict(test_grid.indices())?, s.restrict(test_grid.indices())?);
        (&restricted.0, &restricted.1)
    } else {
        (g, s)
    };
    let sim_grid = TestGrid::equally_spaced(s.n_grid(), s.n_grid())?;
    let idx = band_freq_indices(g, lo, hi)?;
    let q0 = stationarity_statistic(g, lo, hi)?;
    let b = g.plan().n_blocks() as f64;
    let k = g.n_tapers() as f64;
    let scaled = k * q0 / b;

    let sim_freqs = subsample(&idx, MAX_SIM_FREQS);
    let draws = draw_null_stationarity(
        s,
        &sim_freqs,
        hi - lo,
        &sim_grid,
        d0,
        seed,
        block_diagonal,
        model,
    )?;
    let p = p_value(&draws, scaled);
    Ok(StationarityResult {
        band: (lo, hi),
        q0,
        scaled,
        p,
        reject: p <= alpha,
        alpha,
        n_band_freqs: idx.len(),
        sim_freqs,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fts::{fourier_grid, make_block_plan};
    use ndarray::Array4;

    fn demeaned(
        b: usize,
        t_b: usize,
        r: usize,
        f: impl Fn(usize, usize, usize, usize) -> Complex64,
    ) -> DemeanedSpectrum {
        let plan = make_block_plan(b * t_b, b).unwrap();
        let grid = fourier_grid(t_b).unwrap();
        let n = grid.n_freq();
        let mut kernels = Array4::zeros((b, n, r, r));
        for blk in 0..b {
            for k in 0..n {
                for i in 0..r {
                    for j in 0..r {
                        kernels[[blk, k, i, j]] = f(blk, k + 1, i, j);
                    }
                }
            }
        }
        DemeanedSpectrum::from_kernels(kernels, plan, grid, 4)
    }

    #[test]
    fn statistic_zero_for_zero_spectrum() {
        let g = demeaned(3, 20, 2, |_, _, _, _| Complex64::new(0.0, 0.0));
        assert_eq!(stationarity_statistic(&g, 0.1, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn statistic_hand_example() {
        // B=2, R=1, one band frequency, width 0.1, values +-1 -> 0.1
        let g = demeaned(2, 8, 1, |b, k, _, _| {
            if k == 2 {
                Complex64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        // omega_2 = 0.25; the band [0.2, 0.3) holds exactly that frequency
        let q0 = stationarity_statistic(&g, 0.2, 0.3).unwrap();
        assert!((q0 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn statistic_scales_quadratically() {
        let g = demeaned(3, 20, 2, |b, k, i, j| {
            Complex64::new(((b + k + i) as f64).sin(), (j as f64).cos())
        });
        let scaled = demeaned(3, 20, 2, |b, k, i, j| {
            Complex64::new(((b + k + i) as f64).sin(), (j as f64).cos()) * 2.0
        });
        let a = stationarity_statistic(&g, 0.1, 0.4).unwrap();
        let b_ = stationarity_statistic(&scaled, 0.1, 0.4).unwrap();
        assert!((b_ - 4.0 * a).abs() < 1e-10 * b_.max(1.0));
    }

    #[test]
    fn statistic_additive_over_grid_aligned_split() {
        let g = demeaned(4, 40, 2, |b, k, i, j| {
            Complex64::new(((b * k + i) as f64).sin(), ((k + j) as f64).cos())
        });
        // split [0.1, 0.4) at the grid-aligned point 0.25
        let whole = stationarity_statistic(&g, 0.1, 0.4).unwrap();
        let left = stationarity_statistic(&g, 0.1, 0.25).unwrap();
        let right = stationarity_statistic(&g, 0.25, 0.4).unwrap();
        assert!((whole - left - right).abs() < 1e-12 * whole.max(1.0));
    }

    #[test]
    fn block_sum_doubles_when_blocks_replicated() {
        let pattern = |b: usize, k: usize, i: usize, j: usize| {
            Complex64::new(
                ((b % 4) as f64 - 1.5) * ((k + i) as f64).sin(),
                ((b % 4) as f64 - 1.5) * (j as f64 + 0.3).cos(),
            )
        };
        let g1 = demeaned(4, 40, 2, pattern);
        let g2 = demeaned(8, 40, 2, pattern);
        // Q0 averages blocks, so the replicated pattern leaves it unchanged
        // and the block sum B*Q0 doubles exactly.
        let q1 = stationarity_statistic(&g1, 0.1, 0.4).unwrap();
        let q2 = stationarity_statistic(&g2, 0.1, 0.4).unwrap();
        assert!((q1 - q2).abs() < 1e-10 * q1.max(1.0));
        assert!((8.0 * q2 - 2.0 * 4.0 * q1).abs() < 1e-10 * (8.0 * q2).max(1.0));
    }

    #[test]
    fn empty_band_is_rejected() {
        let g = demeaned(2, 20, 1, |_, _, _, _| Complex64::new(1.0, 0.0));
        assert!(matches!(
            stationarity_statistic(&g, 0.21, 0.24),
            Err(Error::EmptyBand { .. })
        ));
        assert!(stationarity_statistic(&g, 0.4, 0.1).is_err());
    }

    #[test]
    fn subsample_caps_and_keeps_ends() {
        let idx: Vec<usize> = (1..=100).collect();
        let sub = subsample(&idx, 16);
        assert_eq!(sub.len(), 16);
        assert_eq!(sub[0], 1);
        assert_eq!(*sub.last().unwrap(), 100);
        let small: Vec<usize> = (1..=10).collect();
        assert_eq!(subsample(&small, 16), small);
    }
}
