//! Synthetic functional time series with banded, time-varying spectra, and
//! the Rand index for comparing band partitions.
//!
//! Realizations are built by band-modulated filtering: functional white
//! noise is drawn in a B-spline basis, split into frequency bands by DFT
//! masking, and each band is modulated in amplitude by the square root of
//! its time-varying power profile. The target spectrum is the product of
//! the profile and the basis-induced kernel.

use crate::error::{Error, Result};
use crate::fts::{uniform_grid, FunctionalTimeSeries};
use crate::search::BandPartition;
use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Number of B-spline basis functions behind the functional noise.
pub const N_BASIS: usize = 15;

/// The three built-in simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimSetting {
    /// Flat spectrum, single band.
    WhiteNoise,
    /// Linear time trends with cuts at 0.15 and 0.35.
    Linear,
    /// Sinusoidal time dynamics with cuts at 0.15 and 0.35.
    Sinusoidal,
}

impl SimSetting {
    /// True partition points in frequency.
    pub fn true_cuts(&self) -> &'static [f64] {
        match self {
            SimSetting::WhiteNoise => &[],
            SimSetting::Linear | SimSetting::Sinusoidal => &[0.15, 0.35],
        }
    }

    /// Band intervals `(lo, hi)` covering `(0, 0.5)`.
    pub fn bands(&self) -> Vec<(f64, f64)> {
        let mut edges = vec![0.0];
        edges.extend_from_slice(self.true_cuts());
        edges.push(0.5);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Parse from the CLI spelling.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "white-noise" => Ok(SimSetting::WhiteNoise),
            "linear" => Ok(SimSetting::Linear),
            "sinusoidal" => Ok(SimSetting::Sinusoidal),
            other => Err(Error::InvalidArgument(format!(
                "unknown setting '{other}' (expected white-noise, linear, or sinusoidal)"
            ))),
        }
    }

    /// Canonical name.
    pub fn name(&self) -> &'static str {
        match self {
            SimSetting::WhiteNoise => "white-noise",
            SimSetting::Linear => "linear",
            SimSetting::Sinusoidal => "sinusoidal",
        }
    }
}

/// Time-varying power profile `phi(u, omega)` of a setting.
///
/// Piecewise in `omega` across the setting's cuts and continuous in `u`
/// inside each band.
pub fn phi(setting: SimSetting, u: f64, omega: f64) -> f64 {
    match setting {
        SimSetting::WhiteNoise => 1.0,
        SimSetting::Linear => {
            if omega < 0.15 {
                10.0 - 9.0 * u
            } else if omega < 0.35 {
                5.0
            } else {
                1.0 + 9.0 * u
            }
        }
        SimSetting::Sinusoidal => {
            if omega <= 0.15 {
                2.0 + (8.0 * PI * u - PI / 2.0).sin()
            } else if omega <= 0.35 {
                2.0 + (8.0 * PI * u).cos()
            } else {
                2.0 + (16.0 * PI * u).cos()
            }
        }
    }
}

/// Clamped cubic B-spline basis on uniform knots over `[0, 1]`.
///
/// Returns an `R x n_basis` matrix of basis values at the grid points.
/// Entries are nonnegative and every row sums to one.
pub fn bspline_basis(grid: &[f64], n_basis: usize) -> Result<Array2<f64>> {
    const ORDER: usize = 4; // cubic
    if n_basis < ORDER {
        return Err(Error::InvalidArgument(format!(
            "need at least {ORDER} basis functions, got {n_basis}"
        )));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid points".into()));
    }
    let n_interior = n_basis - ORDER;
    let mut knots = Vec::with_capacity(n_basis + ORDER);
    knots.extend(std::iter::repeat(0.0).take(ORDER));
    for i in 1..=n_interior {
        knots.push(i as f64 / (n_interior + 1) as f64);
    }
    knots.extend(std::iter::repeat(1.0).take(ORDER));

    let mut out = Array2::zeros((grid.len(), n_basis));
    let n_knots = knots.len();
    for (row, &x) in grid.iter().enumerate() {
        // degree-0 indicators, closing the final span at x = 1
        let mut n_prev = vec![0.0f64; n_knots - 1];
        for j in 0..n_knots - 1 {
            let last_span = knots[j] < knots[j + 1] && knots[j + 1] >= 1.0;
            if (knots[j] <= x && x < knots[j + 1]) || (last_span && x >= 1.0 && knots[j] <= x) {
                n_prev[j] = 1.0;
            }
        }
        for k in 2..=ORDER {
            let mut n_cur = vec![0.0f64; n_knots - k];
            for j in 0..n_knots - k {
                let mut v = 0.0;
                let d1 = knots[j + k - 1] - knots[j];
                if d1 > 0.0 {
                    v += (x - knots[j]) / d1 * n_prev[j];
                }
                let d2 = knots[j + k] - knots[j + 1];
                if d2 > 0.0 {
                    v += (knots[j + k] - x) / d2 * n_prev[j + 1];
                }
                n_cur[j] = v;
            }
            n_prev = n_cur;
        }
        for j in 0..n_basis {
            out[[row, j]] = n_prev[j];
        }
    }
    Ok(out)
}

/// Synthesize a series whose spectrum is `phi_band(u) * f(tau, sigma)` per
/// band, with `f` induced by the B-spline white-noise construction.
///
/// `phi_of` maps (band index, rescaled time `u`) to the band's power
/// profile. Bands must tile `(0, 0.5)`; the DC bin rides with the first
/// band and the Nyquist bin with the last so the masks partition the whole
/// DFT grid. Deterministic given the seed.
pub fn synthesize_banded(
    bands: &[(f64, f64)],
    phi_of: impl Fn(usize, f64) -> f64,
    t: usize,
    r: usize,
    seed: u64,
) -> Result<FunctionalTimeSeries> {
    if t % 2 != 0 || t < 4 {
        return Err(Error::InvalidArgument("T must be even and >= 4".into()));
    }
    if r < 2 {
        return Err(Error::InvalidArgument("need R >= 2 grid points".into()));
    }
    if bands.is_empty() {
        return Err(Error::InvalidArgument("need at least one band".into()));
    }
    let grid = uniform_grid(r);
    let basis = bspline_basis(&grid, N_BASIS)?;

    // functional white noise in the basis: eps = Z B^T
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Array2::from_shape_simple_fn((t, N_BASIS), || StandardNormal.sample(&mut rng));
    let eps = z.dot(&basis.t());

    // band membership per DFT bin, by absolute frequency
    let band_of_bin: Vec<usize> = (0..t)
        .map(|m| {
            let f = m.min(t - m) as f64 / t as f64;
            if f >= 0.5 - 1e-12 {
                return bands.len() - 1;
            }
            for (p, &(lo, hi)) in bands.iter().enumerate() {
                if f >= lo && f < hi {
                    return p;
                }
            }
            // frequencies below the first band edge ride with band 0
            if f < bands[0].0 {
                0
            } else {
                bands.len() - 1
            }
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(t);
    let ifft = planner.plan_fft_inverse(t);

    let mut x = Array2::<f64>::zeros((t, r));
    for col in 0..r {
        let mut spectrum: Vec<Complex64> = (0..t)
            .map(|i| Complex64::new(eps[[i, col]], 0.0))
            .collect();
        fft.process(&mut spectrum);
        for p in 0..bands.len() {
            let mut masked: Vec<Complex64> = spectrum
                .iter()
                .enumerate()
                .map(|(m, &v)| if band_of_bin[m] == p { v } else { Complex64::new(0.0, 0.0) })
                .collect();
            ifft.process(&mut masked);
            let scale = 1.0 / t as f64;
            for (i, v) in masked.iter().enumerate() {
                let u = (i + 1) as f64 / t as f64;
                let amp = phi_of(p, u).max(0.0).sqrt();
                x[[i, col]] += amp * v.re * scale;
            }
        }
    }
    FunctionalTimeSeries::new(x, grid, None)
}

/// Simulate one of the built-in settings.
pub fn simulate_fts(
    setting: SimSetting,
    t: usize,
    r: usize,
    seed: u64,
) -> Result<FunctionalTimeSeries> {
    let bands = setting.bands();
    let mids: Vec<f64> = bands.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    synthesize_banded(&bands, |p, u| phi(setting, u, mids[p]), t, r, seed)
}

/// Rand index between two band partitions over the same frequency grid.
///
/// `(a + b) / C(N_B, 2)` where `a` counts frequency pairs co-banded in both
/// partitions and `b` pairs separated in both.
pub fn rand_index(estimated: &BandPartition, truth: &BandPartition, n_freq: usize) -> Result<f64> {
    if n_freq < 2 {
        return Err(Error::InvalidArgument(
            "need at least two frequencies".into(),
        ));
    }
    let choose2 = |n: usize| (n * n.saturating_sub(1) / 2) as f64;
    // contingency table over (estimated band, true band)
    let ne = estimated.n_bands();
    let nt = truth.n_bands();
    let mut table = vec![0usize; ne * nt];
    for k in 1..=n_freq {
        let i = estimated.band_of(k);
        let j = truth.band_of(k);
        table[i * nt + j] += 1;
    }
    let a: f64 = table.iter().map(|&n| choose2(n)).sum();
    let same_est: f64 = (0..ne)
        .map(|i| choose2((0..nt).map(|j| table[i * nt + j]).sum()))
        .sum();
    let same_truth: f64 = (0..nt)
        .map(|j| choose2((0..ne).map(|i| table[i * nt + j]).sum()))
        .sum();
    let total = choose2(n_freq);
    let b = total - same_est - same_truth + a;
    Ok((a + b) / total)
}
