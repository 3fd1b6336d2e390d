//! Sine-taper functional DFTs and the local multitaper estimator of the
//! time-varying spectral kernel.
//!
//! Each temporal block is tapered with `K` orthonormal sinusoids and
//! transformed; averaging the `K` single-taper periodogram kernels gives the
//! block's spectral estimate `f_hat[b][k]`, an `R x R` complex Hermitian
//! matrix per Fourier frequency. Subtracting the across-block mean produces
//! the demeaned spectrum `g_hat` that the scan statistics consume.

use crate::error::{Error, Result};
use crate::fts::{fourier_grid, BlockPlan, FrequencyGrid, FunctionalTimeSeries};
use ndarray::{Array2, Array4};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

/// Sine tapers for one block, in block-local time.
///
/// Column `k` (0-based) holds `v^{k+1}(s) = sqrt(2/(T_B+1)) sin(pi (k+1) s / (T_B+1))`
/// for `s = 1..T_B`. The columns are orthonormal on the block. Tapers are
/// identical across blocks once expressed in block-local time, so no block
/// argument is needed.
pub fn sine_tapers(block_len: usize, n_tapers: usize) -> Result<Array2<f64>> {
    if n_tapers == 0 {
        return Err(Error::InvalidArgument("need at least one taper".into()));
    }
    if n_tapers >= block_len {
        return Err(Error::TooManyTapers {
            tapers: n_tapers,
            block_len,
        });
    }
    let denom = (block_len + 1) as f64;
    let scale = (2.0 / denom).sqrt();
    let mut v = Array2::zeros((block_len, n_tapers));
    for k in 0..n_tapers {
        for s in 1..=block_len {
            v[[s - 1, k]] = scale * (PI * (k + 1) as f64 * s as f64 / denom).sin();
        }
    }
    Ok(v)
}

/// Taper count reaching a target bandwidth: `K = max(1, floor(bw (T_B+1)) - 1)`.
///
/// The bandwidth of a `K`-taper sine estimate is `(K+1)/(T_B+1)`, the minimum
/// frequency separation at which estimates are approximately uncorrelated.
pub fn tapers_for_bandwidth(bw: f64, block_len: usize) -> Result<usize> {
    if !(bw > 0.0 && bw < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must lie in (0, 0.5), got {bw}"
        )));
    }
    let k = (bw * (block_len + 1) as f64).floor() as isize - 1;
    Ok(k.max(1) as usize)
}

/// Bandwidth implied by a taper count: `(K+1)/(T_B+1)`.
pub fn bandwidth_for_tapers(n_tapers: usize, block_len: usize) -> f64 {
    (n_tapers + 1) as f64 / (block_len + 1) as f64
}

/// Tapered functional DFT of one block at an arbitrary frequency.
///
/// Returns `sum_{t in block b} v^k(t) X_t(.) e^{-i 2 pi omega t}` with `t`
/// the absolute 1-based time index; the taper provides the localization and
/// the absolute-time phase cancels in periodogram products. `block` and
/// `taper` are 0-based.
pub fn fdft(
    x: &FunctionalTimeSeries,
    plan: &BlockPlan,
    block: usize,
    taper: usize,
    n_tapers: usize,
    omega: f64,
) -> Result<Vec<Complex64>> {
    if block >= plan.n_blocks() {
        return Err(Error::IndexOutOfRange(format!(
            "block {block} >= B={}",
            plan.n_blocks()
        )));
    }
    if taper >= n_tapers {
        return Err(Error::IndexOutOfRange(format!(
            "taper {taper} >= K={n_tapers}"
        )));
    }
    if plan.effective_len() > x.len() {
        return Err(Error::IndexOutOfRange(
            "block plan longer than series".into(),
        ));
    }
    let tapers = sine_tapers(plan.block_len(), n_tapers)?;
    let values = x.values();
    let r = x.n_grid();
    let rows = plan.block_rows(block);
    let mut out = vec![Complex64::new(0.0, 0.0); r];
    for (s, row) in rows.enumerate() {
        // absolute 1-based time index
        let t = (row + 1) as f64;
        let phase = Complex64::from_polar(1.0, -2.0 * PI * omega * t);
        let w = tapers[[s, taper]];
        for (j, o) in out.iter_mut().enumerate() {
            *o += phase * (w * values[[row, j]]);
        }
    }
    Ok(out)
}

/// Local multitaper estimate of the time-varying spectral kernel.
///
/// `kernels[[b, k-1, i, j]]` is the block-`b` estimate at frequency
/// `omega_k = k/T_B` between grid points `i` and `j`. Kernels are Hermitian
/// (enforced as `(A + A^H)/2` after averaging) and positive semi-definite up
/// to rounding.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    kernels: Array4<Complex64>,
    plan: BlockPlan,
    grid: FrequencyGrid,
    n_tapers: usize,
}

impl SpectralEstimate {
    /// Kernel matrix at 0-based block `b` and 1-based frequency index `k`.
    pub fn kernel(&self, block: usize, k: usize) -> ndarray::ArrayView2<'_, Complex64> {
        self.kernels.slice(ndarray::s![block, k - 1, .., ..])
    }

    /// Single kernel entry `f_hat_{b, omega_k}(tau_i, tau_j)`.
    pub fn entry(&self, block: usize, k: usize, i: usize, j: usize) -> Complex64 {
        self.kernels[[block, k - 1, i, j]]
    }

    /// Block plan behind the estimate.
    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    /// Fourier frequency grid of the estimate.
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Number of tapers averaged per kernel.
    pub fn n_tapers(&self) -> usize {
        self.n_tapers
    }

    /// Functional grid size `R`.
    pub fn n_grid(&self) -> usize {
        self.kernels.dim().2
    }

    /// Full kernel array, shape `B x N_B x R x R`.
    pub fn kernels(&self) -> &Array4<Complex64> {
        &self.kernels
    }

    /// Restriction to a subset of the functional grid (0-based indices).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            kernels: restrict_kernels(&self.kernels, indices)?,
            plan: self.plan.clone(),
            grid: self.grid.clone(),
            n_tapers: self.n_tapers,
        })
    }
}

fn restrict_kernels(kernels: &Array4<Complex64>, indices: &[usize]) -> Result<Array4<Complex64>> {
    let (b, n_b, r, _) = kernels.dim();
    if indices.is_empty() || indices.iter().any(|&i| i >= r) {
        return Err(Error::IndexOutOfRange(
            "grid restriction outside observed grid".into(),
        ));
    }
    let m = indices.len();
    let mut out = Array4::zeros((b, n_b, m, m));
    for blk in 0..b {
        for kf in 0..n_b {
            for (a, &ia) in indices.iter().enumerate() {
                for (c, &ic) in indices.iter().enumerate() {
                    out[[blk, kf, a, c]] = kernels[[blk, kf, ia, ic]];
                }
            }
        }
    }
    Ok(out)
}

/// Demeaned time-varying spectrum `g_hat = f_hat - across-block mean`.
///
/// Block-mean zero by construction: summing any entry over blocks gives zero
/// up to rounding.
#[derive(Debug, Clone)]
pub struct DemeanedSpectrum {
    kernels: Array4<Complex64>,
    plan: BlockPlan,
    grid: FrequencyGrid,
    n_tapers: usize,
}

impl DemeanedSpectrum {
    /// Kernel matrix at 0-based block `b` and 1-based frequency index `k`.
    pub fn kernel(&self, block: usize, k: usize) -> ndarray::ArrayView2<'_, Complex64> {
        self.kernels.slice(ndarray::s![block, k - 1, .., ..])
    }

    /// Single entry `g_hat_{b/B, omega_k}(tau_i, tau_j)`.
    pub fn entry(&self, block: usize, k: usize, i: usize, j: usize) -> Complex64 {
        self.kernels[[block, k - 1, i, j]]
    }

    /// Block plan behind the estimate.
    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    /// Fourier frequency grid of the estimate.
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Number of tapers behind the parent estimate.
    pub fn n_tapers(&self) -> usize {
        self.n_tapers
    }

    /// Functional grid size `R`.
    pub fn n_grid(&self) -> usize {
        self.kernels.dim().2
    }

    /// Full kernel array, shape `B x N_B x R x R`.
    pub fn kernels(&self) -> &Array4<Complex64> {
        &self.kernels
    }

    /// Build directly from kernels (test support and synthetic inputs).
    pub fn from_kernels(
        kernels: Array4<Complex64>,
        plan: BlockPlan,
        grid: FrequencyGrid,
        n_tapers: usize,
    ) -> Self {
        Self {
            kernels,
            plan,
            grid,
            n_tapers,
        }
    }

    /// Restriction to a subset of the functional grid (0-based indices).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            kernels: restrict_kernels(&self.kernels, indices)?,
            plan: self.plan.clone(),
            grid: self.grid.clone(),
            n_tapers: self.n_tapers,
        })
    }
}

/// Multitaper spectral estimate of a series under a block plan.
///
/// One length-`T_B` FFT per (block, taper, grid column), then averaged outer
/// products at each Fourier frequency. FFT work is parallel over blocks and
/// columns; kernel assembly keeps a fixed reduction order so results do not
/// depend on the thread count.
pub fn multitaper_spectrum(
    x: &FunctionalTimeSeries,
    plan: &BlockPlan,
    n_tapers: usize,
) -> Result<SpectralEstimate> {
    let t_b = plan.block_len();
    let grid = fourier_grid(t_b)?;
    let tapers = Arc::new(sine_tapers(t_b, n_tapers)?);
    if plan.effective_len() > x.len() {
        return Err(Error::IndexOutOfRange(
            "block plan longer than series".into(),
        ));
    }
    let n_b = grid.n_freq();
    let b = plan.n_blocks();
    let r = x.n_grid();
    let values = x.values();

    // transforms[block][taper][col][freq k-1], phase-corrected to absolute time
    let transforms: Vec<Vec<Vec<Vec<Complex64>>>> = (0..b)
        .into_par_iter()
        .map(|blk| {
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(t_b);
            let rows = plan.block_rows(blk);
            let mut per_taper = Vec::with_capacity(n_tapers);
            for k in 0..n_tapers {
                let mut per_col = Vec::with_capacity(r);
                for col in 0..r {
                    let mut buf: Vec<Complex64> = rows
                        .clone()
                        .enumerate()
                        .map(|(s, row)| Complex64::new(tapers[[s, k]] * values[[row, col]], 0.0))
                        .collect();
                    fft.process(&mut buf);
                    // FFT gives sum over s of y_s e^{-i 2 pi k (s-1)/T_B}; shift to
                    // 1-based block time. The absolute-time block offset phase is
                    // e^{-i 2 pi k (b-1)} = 1 at Fourier frequencies.
                    let out: Vec<Complex64> = (1..=n_b)
                        .map(|kf| {
                            let shift =
                                Complex64::from_polar(1.0, -2.0 * PI * kf as f64 / t_b as f64);
                            buf[kf] * shift
                        })
                        .collect();
                    per_col.push(out);
                }
                per_taper.push(per_col);
            }
            per_taper
        })
        .collect();

    let mut kernels = Array4::zeros((b, n_b, r, r));
    let scale = 1.0 / n_tapers as f64;
    let slices: Vec<(usize, usize)> = (0..b)
        .flat_map(|blk| (0..n_b).map(move |kf| (blk, kf)))
        .collect();
    let assembled: Vec<Array2<Complex64>> = slices
        .par_iter()
        .map(|&(blk, kf)| {
            let mut m = Array2::<Complex64>::zeros((r, r));
            for k in 0..n_tapers {
                for i in 0..r {
                    let xi = transforms[blk][k][i][kf];
                    for j in 0..r {
                        let xj = transforms[blk][k][j][kf];
                        m[[i, j]] += xi * xj.conj();
                    }
                }
            }
            // Hermitian enforcement removes rounding drift before the
            // covariance plug-in uses these kernels.
            for i in 0..r {
                m[[i, i]] = Complex64::new(m[[i, i]].re * scale, 0.0);
                for j in (i + 1)..r {
                    let avg = (m[[i, j]] + m[[j, i]].conj()) * (0.5 * scale);
                    m[[i, j]] = avg;
                    m[[j, i]] = avg.conj();
                }
            }
            m
        })
        .collect();
    for (&(blk, kf), m) in slices.iter().zip(assembled) {
        for i in 0..r {
            for j in 0..r {
                kernels[[blk, kf, i, j]] = m[[i, j]];
            }
        }
    }

    Ok(SpectralEstimate {
        kernels,
        plan: plan.clone(),
        grid,
        n_tapers,
    })
}

/// Subtract the across-block mean kernel at every frequency.
///
/// Fails for `B = 1`: the result would be identically zero and must not be
/// fed to any test.
pub fn demean_spectrum(s: &SpectralEstimate) -> Result<DemeanedSpectrum> {
    let b = s.plan.n_blocks();
    if b < 2 {
        return Err(Error::DegenerateDemean);
    }
    let (_, n_b, r, _) = s.kernels.dim();
    let mut kernels = s.kernels.clone();
    for kf in 0..n_b {
        for i in 0..r {
            for j in 0..r {
                let mut mean = Complex64::new(0.0, 0.0);
                for blk in 0..b {
                    mean += s.kernels[[blk, kf, i, j]];
                }
                mean /= b as f64;
                for blk in 0..b {
                    kernels[[blk, kf, i, j]] -= mean;
                }
            }
        }
    }
    Ok(DemeanedSpectrum {
        kernels,
        plan: s.plan.clone(),
        grid: s.grid.clone(),
        n_tapers: s.n_tapers,
    })
}

/// Squared-modulus sums of the taper transfer cross-products.
///
/// `weight(m)` is `(1/K) sum_{k,l} |H_{k,l}(m / T_B)|^2` where
/// `H_{k,l}(omega) = sum_s v^k(s) v^l(s) e^{-i 2 pi omega s}`. This is the
/// exact second-moment weight coupling multitaper estimates `m` Fourier bins
/// apart for Gaussian data: `weight(0) = 1` by orthonormality and the weights
/// decay to zero beyond half the taper bandwidth.
#[derive(Debug, Clone)]
pub struct TaperTransfer {
    weights: Vec<f64>,
    block_len: usize,
}

impl TaperTransfer {
    /// Precompute weights for all bin offsets of a `(T_B, K)` taper family.
    pub fn new(block_len: usize, n_tapers: usize) -> Result<Self> {
        let tapers = sine_tapers(block_len, n_tapers)?;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(block_len);
        let mut weights = vec![0.0; block_len];
        for k in 0..n_tapers {
            for l in k..n_tapers {
                let mut buf: Vec<Complex64> = (0..block_len)
                    .map(|s| Complex64::new(tapers[[s, k]] * tapers[[s, l]], 0.0))
                    .collect();
                fft.process(&mut buf);
                let mult = if k == l { 1.0 } else { 2.0 };
                for (m, v) in buf.iter().enumerate() {
                    weights[m] += mult * v.norm_sqr();
                }
            }
        }
        let scale = 1.0 / n_tapers as f64;
        for w in &mut weights {
            *w *= scale;
        }
        // the transfer is even in the offset; enforce the symmetry exactly
        for m in 1..=(block_len - 1) / 2 {
            let avg = 0.5 * (weights[m] + weights[block_len - m]);
            weights[m] = avg;
            weights[block_len - m] = avg;
        }
        Ok(Self { weights, block_len })
    }

    /// Weight for a signed bin offset (periodic in `T_B`).
    pub fn weight(&self, offset: isize) -> f64 {
        let m = offset.rem_euclid(self.block_len as isize) as usize;
        self.weights[m]
    }

    /// Block length the weights were computed for.
    pub fn block_len(&self) -> usize {
        self.block_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fts::make_block_plan;
    use ndarray::Array2;

    fn series(t: usize, r: usize, f: impl Fn(usize, usize) -> f64) -> FunctionalTimeSeries {
        let values = Array2::from_shape_fn((t, r), |(i, j)| f(i, j));
        FunctionalTimeSeries::from_values(values).unwrap()
    }

    #[test]
    fn taper_values_smallest_case() {
        let v = sine_tapers(3, 1).unwrap();
        let expect = [0.5, std::f64::consts::FRAC_1_SQRT_2, 0.5];
        for (s, e) in expect.iter().enumerate() {
            assert!((v[[s, 0]] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn taper_orthonormality() {
        for (t_b, k) in [(8usize, 3usize), (64, 8), (200, 9), (500, 24)] {
            let v = sine_tapers(t_b, k).unwrap();
            for a in 0..k {
                for b in 0..k {
                    let dot: f64 = (0..t_b).map(|s| v[[s, a]] * v[[s, b]]).sum();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (dot - expect).abs() < 1e-12,
                        "T_B={t_b} K={k} ({a},{b}): {dot}"
                    );
                }
            }
        }
    }

    #[test]
    fn taper_count_rejected_at_block_len() {
        assert!(sine_tapers(8, 8).is_err());
        assert!(sine_tapers(8, 7).is_ok());
    }

    #[test]
    fn bandwidth_rule() {
        assert_eq!(tapers_for_bandwidth(0.05, 320).unwrap(), 15);
        let k = tapers_for_bandwidth(0.05, 319).unwrap();
        assert_eq!(k, 15);
        assert!((bandwidth_for_tapers(k, 319) - 0.05).abs() < 1e-15);
        // smallest taper count
        for t_b in [100usize, 321, 500] {
            let bw = 2.0 / (t_b + 1) as f64;
            assert_eq!(tapers_for_bandwidth(bw, t_b).unwrap(), 1);
        }
        assert!(tapers_for_bandwidth(0.0, 100).is_err());
        assert!(tapers_for_bandwidth(0.5, 100).is_err());
    }

    #[test]
    fn fdft_zero_series_is_zero() {
        let x = series(40, 3, |_, _| 0.0);
        let plan = make_block_plan(40, 2).unwrap();
        let out = fdft(&x, &plan, 1, 0, 2, 0.2).unwrap();
        for v in out {
            assert_eq!(v, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn fdft_single_row_matches_one_term_sum() {
        // all-ones row at absolute time t0 = 7 (1-based), block 0
        let t0 = 7usize;
        let x = series(20, 2, |i, _| if i + 1 == t0 { 1.0 } else { 0.0 });
        let plan = make_block_plan(20, 2).unwrap();
        let k = 1usize; // 0-based taper index -> taper number 2
        let omega = 0.13;
        let tapers = sine_tapers(10, 3).unwrap();
        let expect = Complex64::from_polar(1.0, -2.0 * PI * omega * t0 as f64)
            * tapers[[t0 - 1, k]];
        let out = fdft(&x, &plan, 0, k, 3, omega).unwrap();
        for v in out {
            assert!((v - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn fdft_is_linear_in_the_series() {
        let x = series(24, 2, |i, j| ((i * 3 + j) as f64).sin());
        let cx = series(24, 2, |i, j| 2.5 * ((i * 3 + j) as f64).sin());
        let plan = make_block_plan(24, 2).unwrap();
        let a = fdft(&x, &plan, 1, 0, 2, 0.3).unwrap();
        let b = fdft(&cx, &plan, 1, 0, 2, 0.3).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((*v - *u * 2.5).norm() < 1e-12);
        }
    }

    #[test]
    fn batch_spectrum_matches_direct_fdft_products() {
        let x = series(60, 3, |i, j| ((i as f64) * 0.7 + j as f64).cos() + 0.1 * j as f64);
        let plan = make_block_plan(60, 3).unwrap();
        let n_tapers = 4;
        let est = multitaper_spectrum(&x, &plan, n_tapers).unwrap();
        let grid = est.grid().clone();
        for blk in 0..3 {
            for kf in [1usize, 4, grid.n_freq()] {
                let omega = grid.freq(kf);
                let mut expect = Array2::<Complex64>::zeros((3, 3));
                for k in 0..n_tapers {
                    let d = fdft(&x, &plan, blk, k, n_tapers, omega).unwrap();
                    for i in 0..3 {
                        for j in 0..3 {
                            expect[[i, j]] += d[i] * d[j].conj();
                        }
                    }
                }
                expect.mapv_inplace(|v| v / n_tapers as f64);
                let got = est.kernel(blk, kf);
                for i in 0..3 {
                    for j in 0..3 {
                        assert!(
                            (got[[i, j]] - expect[[i, j]]).norm() < 1e-10,
                            "mismatch at b={blk} k={kf} ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn spectrum_of_zero_series_is_zero_and_hermitian_holds() {
        let x = series(40, 2, |_, _| 0.0);
        let plan = make_block_plan(40, 2).unwrap();
        let est = multitaper_spectrum(&x, &plan, 3).unwrap();
        assert!(est.kernels().iter().all(|v| v.norm() == 0.0));

        let y = series(80, 3, |i, j| ((i + 2 * j) as f64 * 0.37).sin());
        let est = multitaper_spectrum(&y, &make_block_plan(80, 2).unwrap(), 5).unwrap();
        let (b, n_b, r, _) = est.kernels().dim();
        for blk in 0..b {
            for kf in 1..=n_b {
                let m = est.kernel(blk, kf);
                for i in 0..r {
                    assert!(m[[i, i]].im.abs() <= 1e-10);
                    assert!(m[[i, i]].re >= -1e-10);
                    for j in 0..r {
                        assert!((m[[i, j]] - m[[j, i]].conj()).norm() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn demean_removes_block_mean() {
        let x = series(90, 2, |i, j| ((i * 2 + j) as f64 * 0.53).sin() + j as f64);
        let plan = make_block_plan(90, 3).unwrap();
        let est = multitaper_spectrum(&x, &plan, 3).unwrap();
        let g = demean_spectrum(&est).unwrap();
        let (b, n_b, r, _) = g.kernels().dim();
        for kf in 1..=n_b {
            for i in 0..r {
                for j in 0..r {
                    let sum: Complex64 = (0..b).map(|blk| g.entry(blk, kf, i, j)).sum();
                    assert!(sum.norm() < 1e-9);
                }
            }
        }
        // identical kernels across blocks demean to zero
        let flat = series(60, 2, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let plan2 = make_block_plan(60, 2).unwrap();
        let est2 = multitaper_spectrum(&flat, &plan2, 2).unwrap();
        let g2 = demean_spectrum(&est2).unwrap();
        // both blocks see the same deterministic pattern, so g is exactly zero
        assert!(g2.kernels().iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn demean_rejects_single_block() {
        let x = series(30, 2, |i, _| i as f64);
        let plan = make_block_plan(30, 1).unwrap();
        let est = multitaper_spectrum(&x, &plan, 2).unwrap();
        assert!(matches!(
            demean_spectrum(&est),
            Err(Error::DegenerateDemean)
        ));
    }

    #[test]
    fn transfer_weights_normalized_and_decaying() {
        let tt = TaperTransfer::new(200, 9).unwrap();
        assert!((tt.weight(0) - 1.0).abs() < 1e-10);
        // beyond the bandwidth (K+1 bins) the coupling is negligible
        assert!(tt.weight(12) < 0.02);
        assert!(tt.weight(-3) == tt.weight(3));
        // weights are nonnegative
        for m in 0..200 {
            assert!(tt.weight(m as isize) >= 0.0);
        }
    }
}
