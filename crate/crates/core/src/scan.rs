//! The integrated scan statistic and the covariance kernels behind its
//! simulated null distribution.
//!
//! The statistic compares the demeaned spectrum at a target frequency with
//! its average over the scan window just below; a large value indicates the
//! window straddles a band boundary. Its null law is a quadratic functional
//! of zero-mean Gaussian fields whose covariance is assembled here from the
//! estimated kernels, evaluated on a small test grid in the functional
//! domain.

use crate::error::{Error, Result};
use crate::fts::FrequencyGrid;
use crate::multitaper::{DemeanedSpectrum, SpectralEstimate, TaperTransfer};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array3;
use num_complex::Complex64;
use rayon::prelude::*;

/// Pairing of frequencies inside the second (conjugate) product of the
/// covariance kernel `F`.
///
/// The two sources print it differently: the lemma form repeats the second
/// frequency in both factors, while the proof-level display splits the two
/// frequencies across the factors. Both are selectable; they coincide when
/// the frequencies are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConjugatePairing {
    /// Second frequency in both factors (the lemma as printed).
    #[default]
    RepeatedSecond,
    /// First frequency in the first factor, second in the other.
    Split,
}

/// Covariance model used when simulating the Gaussian null fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceModel {
    /// Weight every frequency pair by the taper transfer sums
    /// `|H_{k,l}|^2`: the exact second-moment structure of the multitaper
    /// estimator for Gaussian data. Cross-frequency coupling decays to zero
    /// beyond the taper bandwidth and the conjugate product only survives
    /// near the grid edges.
    TaperWeighted,
    /// Unit weight on every frequency pair (`cross_frequency: true`) or on
    /// the same-frequency diagonal only (`false`), with a selectable
    /// conjugate pairing. These are the printed large-sample forms.
    Unit {
        pairing: ConjugatePairing,
        cross_frequency: bool,
    },
}

impl Default for CovarianceModel {
    fn default() -> Self {
        CovarianceModel::TaperWeighted
    }
}

impl CovarianceModel {
    /// The printed form: unit weights on all pairs, repeated second frequency.
    pub fn printed() -> Self {
        CovarianceModel::Unit {
            pairing: ConjugatePairing::RepeatedSecond,
            cross_frequency: true,
        }
    }

    /// Unit weights restricted to equal frequencies.
    pub fn diagonal() -> Self {
        CovarianceModel::Unit {
            pairing: ConjugatePairing::RepeatedSecond,
            cross_frequency: false,
        }
    }
}

/// A half-open scan window `[omega0, omega0 + delta)` plus its target
/// frequency `omega0 + delta`, all on the Fourier grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanWindow {
    k0: usize,
    len: usize,
    block_len: usize,
}

impl ScanWindow {
    /// Window starting at 1-based frequency index `k0` covering `len`
    /// consecutive frequencies; the target is index `k0 + len`.
    pub fn new(grid: &FrequencyGrid, k0: usize, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidWindow("window must be non-empty".into()));
        }
        if k0 == 0 || k0 + len > grid.n_freq() {
            return Err(Error::InvalidWindow(format!(
                "window [{k0}, {k0}+{len}] exceeds grid of {} frequencies",
                grid.n_freq()
            )));
        }
        Ok(Self {
            k0,
            len,
            block_len: grid.block_len(),
        })
    }

    /// First window frequency index (1-based).
    pub fn k0(&self) -> usize {
        self.k0
    }

    /// Number of Fourier frequencies in the window (`L_delta`).
    pub fn len(&self) -> usize {
        self.len
    }

    /// Windows are never empty.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Target frequency index `k0 + L` (1-based).
    pub fn target_k(&self) -> usize {
        self.k0 + self.len
    }

    /// Left edge `omega0`.
    pub fn omega0(&self) -> f64 {
        self.k0 as f64 / self.block_len as f64
    }

    /// Window width `delta = L / T_B`.
    pub fn delta(&self) -> f64 {
        self.len as f64 / self.block_len as f64
    }

    /// Target frequency `omega0 + delta`.
    pub fn target_freq(&self) -> f64 {
        self.target_k() as f64 / self.block_len as f64
    }

    /// Iterate the 1-based window frequency indices.
    pub fn window_indices(&self) -> std::ops::Range<usize> {
        self.k0..self.k0 + self.len
    }
}

/// Indices of the functional grid points used for null simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestGrid {
    indices: Vec<usize>,
}

impl TestGrid {
    /// Validate an explicit subset of the observed grid (0-based indices).
    pub fn new(indices: Vec<usize>, n_grid: usize) -> Result<Self> {
        if indices.len() < 2 || indices.len() > n_grid {
            return Err(Error::InvalidTestGrid(format!(
                "need between 2 and {n_grid} test points, got {}",
                indices.len()
            )));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidTestGrid(
                    "indices must be strictly increasing".into(),
                ));
            }
        }
        if *indices.last().unwrap() >= n_grid {
            return Err(Error::InvalidTestGrid(format!(
                "index {} outside grid of {n_grid} points",
                indices.last().unwrap()
            )));
        }
        Ok(Self { indices })
    }

    /// `n` approximately equally spaced points out of `n_grid` (capped at
    /// `n_grid`).
    pub fn equally_spaced(n_grid: usize, n: usize) -> Result<Self> {
        let n = n.min(n_grid).max(2);
        let mut indices: Vec<usize> = (0..n)
            .map(|i| ((i * (n_grid - 1)) as f64 / (n - 1) as f64).round() as usize)
            .collect();
        indices.dedup();
        Self::new(indices, n_grid)
    }

    /// The selected 0-based grid indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of test points.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// Test grids carry at least two points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Dimension of the vectorized `(tau, sigma)` field: `len()^2`.
    pub fn field_dim(&self) -> usize {
        self.indices.len() * self.indices.len()
    }
}

/// Average of the demeaned spectrum over the window, one `R x R` matrix per
/// block.
pub fn band_average(g: &DemeanedSpectrum, w: &ScanWindow) -> Result<Array3<Complex64>> {
    if w.target_k() > g.grid().n_freq() {
        return Err(Error::InvalidWindow(
            "window extends beyond the estimate's grid".into(),
        ));
    }
    let b = g.plan().n_blocks();
    let r = g.n_grid();
    let mut out = Array3::<Complex64>::zeros((b, r, r));
    let scale = 1.0 / w.len() as f64;
    for blk in 0..b {
        for k in w.window_indices() {
            let kern = g.kernel(blk, k);
            for i in 0..r {
                for j in 0..r {
                    out[[blk, i, j]] += kern[[i, j]];
                }
            }
        }
    }
    out.mapv_inplace(|v| v * scale);
    Ok(out)
}

/// The integrated scan statistic.
///
/// `Q = sum_b mean_{i,j} |g_hat_{b, target}(tau_i, tau_j) - window average|^2`,
/// the squared modulus integrated by the mean rule over the observed grid.
pub fn scan_statistic(g: &DemeanedSpectrum, w: &ScanWindow) -> Result<f64> {
    if g.plan().n_blocks() < 2 {
        return Err(Error::DegenerateDemean);
    }
    let avg = band_average(g, w)?;
    let b = g.plan().n_blocks();
    let r = g.n_grid();
    let target = w.target_k();
    let mut q = 0.0;
    for blk in 0..b {
        let kern = g.kernel(blk, target);
        let mut acc = 0.0;
        for i in 0..r {
            for j in 0..r {
                acc += (kern[[i, j]] - avg[[blk, i, j]]).norm_sqr();
            }
        }
        q += acc / (r * r) as f64;
    }
    Ok(q)
}

/// Resolved per-pair weights of a covariance model.
pub(crate) struct ModelWeights {
    model: CovarianceModel,
    transfer: Option<TaperTransfer>,
}

impl ModelWeights {
    pub(crate) fn resolve(model: CovarianceModel, s: &SpectralEstimate) -> Result<Self> {
        let transfer = match model {
            CovarianceModel::TaperWeighted => Some(TaperTransfer::new(
                s.plan().block_len(),
                s.n_tapers(),
            )?),
            CovarianceModel::Unit { .. } => None,
        };
        Ok(Self { model, transfer })
    }

    /// (direct weight, conjugate weight, pairing) for a frequency-index pair.
    fn weights(&self, k1: usize, k2: usize) -> (f64, f64, ConjugatePairing) {
        match self.model {
            CovarianceModel::TaperWeighted => {
                let t = self.transfer.as_ref().expect("transfer built in resolve");
                (
                    t.weight(k1 as isize - k2 as isize),
                    t.weight((k1 + k2) as isize),
                    ConjugatePairing::Split,
                )
            }
            CovarianceModel::Unit {
                pairing,
                cross_frequency,
            } => {
                if cross_frequency || k1 == k2 {
                    (1.0, 1.0, pairing)
                } else {
                    (0.0, 0.0, pairing)
                }
            }
        }
    }
}

/// Pointwise `F` kernel from estimated spectra with selectable conjugate
/// pairing.
///
/// `F = f_hat_{b,w1}(tau_{i1}, tau_{i2}) f_hat_{b,w2}(sigma_{j1}, sigma_{j2})
///    + (conjugate product)` where the conjugate product pairs
/// `(tau_{i1}, sigma_{j2})` and `(tau_{i2}, sigma_{j1})` at the frequencies
/// chosen by `pairing`. Indices are 0-based into the observed grid.
#[allow(clippy::too_many_arguments)]
pub fn f_kernel(
    s: &SpectralEstimate,
    block: usize,
    k1: usize,
    k2: usize,
    i1: usize,
    j1: usize,
    i2: usize,
    j2: usize,
    pairing: ConjugatePairing,
) -> Complex64 {
    let direct = s.entry(block, k1, i1, i2) * s.entry(block, k2, j1, j2);
    let conj = match pairing {
        ConjugatePairing::RepeatedSecond => s.entry(block, k2, i1, j2) * s.entry(block, k2, i2, j1),
        ConjugatePairing::Split => s.entry(block, k1, i1, j2) * s.entry(block, k2, i2, j1),
    };
    direct + conj
}

/// Pointwise covariance kernel `C` across blocks.
///
/// Same block: `(1 - 2/B) F(u_b) + (1/B^2) sum_l F(u_l)`. Distinct blocks:
/// `-(1/B) F(u_{b1}) - (1/B) F(u_{b2}) + (1/B^2) sum_l F(u_l)`.
#[allow(clippy::too_many_arguments)]
pub fn c_kernel(
    s: &SpectralEstimate,
    b1: usize,
    b2: usize,
    k1: usize,
    k2: usize,
    i1: usize,
    j1: usize,
    i2: usize,
    j2: usize,
    pairing: ConjugatePairing,
) -> Complex64 {
    let b = s.plan().n_blocks() as f64;
    let mut mean = Complex64::new(0.0, 0.0);
    for l in 0..s.plan().n_blocks() {
        mean += f_kernel(s, l, k1, k2, i1, j1, i2, j2, pairing);
    }
    mean /= b * b;
    if b1 == b2 {
        (1.0 - 2.0 / b) * f_kernel(s, b1, k1, k2, i1, j1, i2, j2, pairing) + mean
    } else {
        let fa = f_kernel(s, b1, k1, k2, i1, j1, i2, j2, pairing);
        let fb = f_kernel(s, b2, k1, k2, i1, j1, i2, j2, pairing);
        -(fa + fb) / b + mean
    }
}

/// Simulable covariance of the null fields on the test grid.
///
/// `blocks[b]` is the projected (real part, symmetrized, eigenvalue-clipped)
/// per-block covariance; `full`, when requested, additionally carries the
/// joint covariance across blocks, projected as a whole. The per-block
/// matrices are computed by the same code path whether or not the full
/// matrix is requested.
#[derive(Debug, Clone)]
pub struct NullCovariance {
    pub blocks: Vec<DMatrix<f64>>,
    pub full: Option<DMatrix<f64>>,
    pub test_grid: TestGrid,
}

/// Take the real part, symmetrize, and clip negative eigenvalues at zero.
pub(crate) fn project_to_psd(raw: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = raw.nrows();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (raw[(i, j)].re + raw[(j, i)].re);
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut vals = eig.eigenvalues;
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let u = eig.eigenvectors;
    &u * DMatrix::from_diagonal(&vals) * u.transpose()
}

/// Evaluates model-weighted `F` matrices over the test grid.
pub(crate) struct FieldEvaluator<'a> {
    s: &'a SpectralEstimate,
    weights: ModelWeights,
    grid_idx: Vec<usize>,
}

impl<'a> FieldEvaluator<'a> {
    pub(crate) fn new(
        s: &'a SpectralEstimate,
        test_grid: &TestGrid,
        model: CovarianceModel,
    ) -> Result<Self> {
        if test_grid.indices().last().copied().unwrap_or(0) >= s.n_grid() {
            return Err(Error::InvalidTestGrid(
                "test grid not a subset of the observed grid".into(),
            ));
        }
        Ok(Self {
            s,
            weights: ModelWeights::resolve(model, s)?,
            grid_idx: test_grid.indices().to_vec(),
        })
    }

    pub(crate) fn field_dim(&self) -> usize {
        self.grid_idx.len() * self.grid_idx.len()
    }

    pub(crate) fn n_blocks(&self) -> usize {
        self.s.plan().n_blocks()
    }

    /// Model-weighted `F` matrix of one block at a frequency-index pair.
    ///
    /// Entry `[(x1, x2)]` with `x = p * m + q` couples the field points
    /// `(tau_p, sigma_q)`.
    pub(crate) fn f_matrix(&self, block: usize, k1: usize, k2: usize) -> DMatrix<Complex64> {
        let m = self.grid_idx.len();
        let dim = m * m;
        let (w_direct, w_conj, pairing) = self.weights.weights(k1, k2);
        let mut out = DMatrix::<Complex64>::zeros(dim, dim);
        if w_direct == 0.0 && w_conj == 0.0 {
            return out;
        }
        let s = self.s;
        for p1 in 0..m {
            let g1 = self.grid_idx[p1];
            for q1 in 0..m {
                let h1 = self.grid_idx[q1];
                let x1 = p1 * m + q1;
                for p2 in 0..m {
                    let g2 = self.grid_idx[p2];
                    for q2 in 0..m {
                        let h2 = self.grid_idx[q2];
                        let x2 = p2 * m + q2;
                        let direct = s.entry(block, k1, g1, g2) * s.entry(block, k2, h1, h2);
                        let conj = match pairing {
                            ConjugatePairing::RepeatedSecond => {
                                s.entry(block, k2, g1, h2) * s.entry(block, k2, g2, h1)
                            }
                            ConjugatePairing::Split => {
                                s.entry(block, k1, g1, h2) * s.entry(block, k2, g2, h1)
                            }
                        };
                        out[(x1, x2)] = w_direct * direct + w_conj * conj;
                    }
                }
            }
        }
        out
    }

    /// `F` matrices of every block at a frequency-index pair.
    pub(crate) fn f_all_blocks(&self, k1: usize, k2: usize) -> Vec<DMatrix<Complex64>> {
        (0..self.n_blocks())
            .map(|b| self.f_matrix(b, k1, k2))
            .collect()
    }
}

/// Combine per-block window-contrast `F` sums into projected covariances.
///
/// `y[b]` must hold `F_b(t,t) + (1/L^2) sum_{j,k in W} F_b(j,k)
/// - (1/L) sum_j [F_b(t,j) + F_b(j,t)]`.
fn covariance_from_contrasts(
    y: &[DMatrix<Complex64>],
    test_grid: &TestGrid,
    include_offdiag: bool,
) -> NullCovariance {
    let b = y.len();
    let bf = b as f64;
    let dim = y[0].nrows();
    let mut ybar = DMatrix::<Complex64>::zeros(dim, dim);
    for yb in y {
        ybar += yb;
    }
    ybar /= Complex64::new(bf * bf, 0.0);

    let raw_diag: Vec<DMatrix<Complex64>> = y
        .iter()
        .map(|yb| yb * Complex64::new(1.0 - 2.0 / bf, 0.0) + &ybar)
        .collect();
    let blocks: Vec<DMatrix<f64>> = raw_diag.par_iter().map(project_to_psd).collect();

    let full = if include_offdiag {
        let mut big = DMatrix::<Complex64>::zeros(b * dim, b * dim);
        for b1 in 0..b {
            for b2 in 0..b {
                let block = if b1 == b2 {
                    raw_diag[b1].clone()
                } else {
                    (&y[b1] + &y[b2]) * Complex64::new(-1.0 / bf, 0.0) + &ybar
                };
                big.view_mut((b1 * dim, b2 * dim), (dim, dim))
                    .copy_from(&block);
            }
        }
        Some(project_to_psd(&big))
    } else {
        None
    };

    NullCovariance {
        blocks,
        full,
        test_grid: test_grid.clone(),
    }
}

/// Covariance of the window-contrast null fields for one scan window.
///
/// Per-block matrix: `C(t,t) + (1/L^2) sum_{j,k in W} C(j,k)
/// - (1/L) sum_j [C(t,j) + C(j,t)]` evaluated on the test grid, then
/// projected. Off-diagonal blocks are assembled analogously when requested
/// and the joint matrix is projected as a whole.
pub fn null_covariance(
    s: &SpectralEstimate,
    w: &ScanWindow,
    test_grid: &TestGrid,
    include_offdiag: bool,
    model: CovarianceModel,
) -> Result<NullCovariance> {
    let eval = FieldEvaluator::new(s, test_grid, model)?;
    if w.target_k() > s.grid().n_freq() {
        return Err(Error::InvalidWindow(
            "window extends beyond the estimate's grid".into(),
        ));
    }
    let b = eval.n_blocks();
    let dim = eval.field_dim();
    let l = w.len() as f64;
    let t = w.target_k();

    let mut y: Vec<DMatrix<Complex64>> = vec![DMatrix::zeros(dim, dim); b];
    // window double sum
    for j in w.window_indices() {
        for k in w.window_indices() {
            let f = eval.f_all_blocks(j, k);
            for (yb, fb) in y.iter_mut().zip(f) {
                *yb += fb * Complex64::new(1.0 / (l * l), 0.0);
            }
        }
    }
    // target diagonal and cross terms
    let f_tt = eval.f_all_blocks(t, t);
    for (yb, fb) in y.iter_mut().zip(f_tt) {
        *yb += fb;
    }
    for j in w.window_indices() {
        let f_tj = eval.f_all_blocks(t, j);
        let f_jt = eval.f_all_blocks(j, t);
        for ((yb, ftj), fjt) in y.iter_mut().zip(f_tj).zip(f_jt) {
            *yb -= (ftj + fjt) * Complex64::new(1.0 / l, 0.0);
        }
    }

    Ok(covariance_from_contrasts(&y, test_grid, include_offdiag))
}

/// Incremental covariance assembly for a batch of windows sharing `omega0`.
///
/// The search tests `delta_k` for consecutive `k`; the window double sum is
/// extended one frequency at a time instead of being rebuilt, so a batch of
/// `n` windows costs `O(n^2)` field evaluations rather than `O(n^3)`.
pub struct WindowCovarianceBuilder<'a> {
    eval: FieldEvaluator<'a>,
    test_grid: TestGrid,
    k0: usize,
    grid_len: usize,
    window_sum: Vec<DMatrix<Complex64>>,
    window_len: usize,
}

impl<'a> WindowCovarianceBuilder<'a> {
    /// Start a batch at 1-based window origin `k0`.
    pub fn new(
        s: &'a SpectralEstimate,
        test_grid: &TestGrid,
        k0: usize,
        model: CovarianceModel,
    ) -> Result<Self> {
        let eval = FieldEvaluator::new(s, test_grid, model)?;
        let dim = eval.field_dim();
        let b = eval.n_blocks();
        Ok(Self {
            eval,
            test_grid: test_grid.clone(),
            k0,
            grid_len: s.grid().n_freq(),
            window_sum: vec![DMatrix::zeros(dim, dim); b],
            window_len: 0,
        })
    }

    /// Extend the window to `len` frequencies and return the covariance for
    /// the window `[k0, k0 + len)` with target `k0 + len`.
    ///
    /// `len` must not decrease across calls.
    pub fn covariance(&mut self, len: usize, include_offdiag: bool) -> Result<NullCovariance> {
        if len < self.window_len {
            return Err(Error::InvalidWindow(
                "batch windows must grow monotonically".into(),
            ));
        }
        if self.k0 + len > self.grid_len {
            return Err(Error::InvalidWindow(
                "window extends beyond the estimate's grid".into(),
            ));
        }
        while self.window_len < len {
            let new = self.k0 + self.window_len;
            // add the new row, column, and diagonal of the double sum
            for j in self.k0..new {
                let f_jn = self.eval.f_all_blocks(j, new);
                let f_nj = self.eval.f_all_blocks(new, j);
                for ((sb, fa), fb) in self.window_sum.iter_mut().zip(f_jn).zip(f_nj) {
                    *sb += fa + fb;
                }
            }
            let f_nn = self.eval.f_all_blocks(new, new);
            for (sb, fb) in self.window_sum.iter_mut().zip(f_nn) {
                *sb += fb;
            }
            self.window_len += 1;
        }

        let l = len as f64;
        let t = self.k0 + len;
        let mut y: Vec<DMatrix<Complex64>> = self
            .window_sum
            .iter()
            .map(|sb| sb * Complex64::new(1.0 / (l * l), 0.0))
            .collect();
        let f_tt = self.eval.f_all_blocks(t, t);
        for (yb, fb) in y.iter_mut().zip(f_tt) {
            *yb += fb;
        }
        for j in self.k0..self.k0 + len {
            let f_tj = self.eval.f_all_blocks(t, j);
            let f_jt = self.eval.f_all_blocks(j, t);
            for ((yb, fa), fb) in y.iter_mut().zip(f_tj).zip(f_jt) {
                *yb -= (fa + fb) * Complex64::new(1.0 / l, 0.0);
            }
        }
        Ok(covariance_from_contrasts(&y, &self.test_grid, include_offdiag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fts::{fourier_grid, make_block_plan};
    use crate::multitaper::DemeanedSpectrum;
    use ndarray::Array4;

    fn demeaned_from(
        b: usize,
        n_freq: usize,
        r: usize,
        f: impl Fn(usize, usize, usize, usize) -> Complex64,
    ) -> DemeanedSpectrum {
        let t_b = (n_freq + 1) * 2;
        let plan = make_block_plan(b * t_b, b).unwrap();
        let grid = fourier_grid(t_b).unwrap();
        let mut kernels = Array4::zeros((b, n_freq, r, r));
        for blk in 0..b {
            for k in 0..n_freq {
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
    fn band_average_of_constant_is_constant() {
        let g = demeaned_from(3, 10, 2, |b, _, i, j| {
            Complex64::new((b + i + j) as f64, 0.0)
        });
        let grid = g.grid().clone();
        let w = ScanWindow::new(&grid, 2, 4).unwrap();
        let avg = band_average(&g, &w).unwrap();
        for b in 0..3 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((avg[[b, i, j]] - Complex64::new((b + i + j) as f64, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn band_average_window_of_one_and_mean() {
        let g = demeaned_from(2, 8, 1, |_, k, _, _| Complex64::new(k as f64, 0.0));
        let grid = g.grid().clone();
        let w1 = ScanWindow::new(&grid, 3, 1).unwrap();
        let avg = band_average(&g, &w1).unwrap();
        assert!((avg[[0, 0, 0]].re - 3.0).abs() < 1e-12);
        // values 1 and 3 average to 2
        let g2 = demeaned_from(2, 8, 1, |_, k, _, _| {
            Complex64::new(if k == 2 { 1.0 } else if k == 3 { 3.0 } else { 0.0 }, 0.0)
        });
        let w2 = ScanWindow::new(&grid, 2, 2).unwrap();
        let avg2 = band_average(&g2, &w2).unwrap();
        assert!((avg2[[0, 0, 0]].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scan_statistic_hand_example() {
        // B=2, R=1, L=1: target values (2, 0), window values (1, 1) -> Q = 2
        let g = demeaned_from(2, 8, 1, |b, k, _, _| {
            if k == 4 {
                Complex64::new(if b == 0 { 2.0 } else { 0.0 }, 0.0)
            } else if k == 3 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let grid = g.grid().clone();
        let w = ScanWindow::new(&grid, 3, 1).unwrap();
        let q = scan_statistic(&g, &w).unwrap();
        assert!((q - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scan_statistic_zero_when_flat_and_quadratic_scaling() {
        let flat = demeaned_from(3, 10, 2, |b, _, i, j| {
            Complex64::new((b * 7 + i + 2 * j) as f64, (b + i) as f64)
        });
        let grid = flat.grid().clone();
        let w = ScanWindow::new(&grid, 2, 5).unwrap();
        assert!(scan_statistic(&flat, &w).unwrap() < 1e-20);

        let g = demeaned_from(3, 10, 2, |b, k, i, j| {
            Complex64::new(((b + k + i) as f64).sin(), ((j + k) as f64).cos())
        });
        let c = 3.0;
        let scaled = demeaned_from(3, 10, 2, |b, k, i, j| {
            Complex64::new(((b + k + i) as f64).sin(), ((j + k) as f64).cos()) * c
        });
        let q1 = scan_statistic(&g, &w).unwrap();
        let q2 = scan_statistic(&scaled, &w).unwrap();
        assert!((q2 - c * c * q1).abs() < 1e-9 * q2.max(1.0));
    }

    #[test]
    fn window_validation() {
        let grid = fourier_grid(40).unwrap(); // N_B = 19
        assert!(ScanWindow::new(&grid, 1, 18).is_ok());
        assert!(ScanWindow::new(&grid, 1, 19).is_err());
        assert!(ScanWindow::new(&grid, 0, 3).is_err());
        assert!(ScanWindow::new(&grid, 4, 0).is_err());
    }

    #[test]
    fn test_grid_selection() {
        let tg = TestGrid::equally_spaced(5, 4).unwrap();
        assert_eq!(tg.indices(), &[0, 1, 3, 4]);
        let tg = TestGrid::equally_spaced(10, 4).unwrap();
        assert_eq!(tg.indices(), &[0, 3, 6, 9]);
        assert!(TestGrid::new(vec![0, 0, 1], 5).is_err());
        assert!(TestGrid::new(vec![0, 7], 5).is_err());
    }
}
