//! Monte-Carlo simulation of the limiting null laws (quadratic functionals
//! of Gaussian fields) and p-value computation.
//!
//! Draws are reproducible for any thread count: each (draw, component) pair
//! owns a dedicated counter-based RNG substream, so parallel scheduling
//! cannot reorder the consumed randomness.

use crate::error::{Error, Result};
use crate::scan::NullCovariance;
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Mix a master seed with two tags into an independent substream seed.
pub fn derive_seed(seed: u64, tag1: u64, tag2: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(seed) ^ tag1.wrapping_mul(0xA24B_AED4_963E_E407)) ^ tag2)
}

/// Lower-triangular factor of `M + j I` with the jitter `j` that was needed.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    pub lower: DMatrix<f64>,
    pub jitter_used: f64,
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// Tries `j = 0`, then `j = jitter, 10 jitter, ...` up to `10^6 jitter`,
/// returning the first factor `L` with `L L^T = M + j I`.
pub fn psd_factorize(m: &DMatrix<f64>, jitter: f64) -> Result<PsdFactor> {
    let n = m.nrows();
    let try_jitter = |j: f64| -> Option<PsdFactor> {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += j;
        }
        Cholesky::new(shifted).map(|c| PsdFactor {
            lower: c.l(),
            jitter_used: j,
        })
    };
    if let Some(f) = try_jitter(0.0) {
        return Ok(f);
    }
    if jitter > 0.0 {
        let mut j = jitter;
        while j <= 1e6 * jitter {
            if let Some(f) = try_jitter(j) {
                return Ok(f);
            }
            j *= 10.0;
        }
    }
    Err(Error::Factorization {
        max_jitter: 1e6 * jitter,
    })
}

/// Scale-aware default jitter: `1e-8` times the mean diagonal.
pub fn default_jitter(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mean_diag: f64 = (0..n).map(|i| m[(i, i)].abs()).sum::<f64>() / n as f64;
    1e-8 * mean_diag.max(f64::MIN_POSITIVE)
}

/// Simulated draws from a null distribution.
#[derive(Debug, Clone)]
pub struct NullDraws {
    values: Vec<f64>,
    seed: u64,
    block_diagonal: bool,
}

impl NullDraws {
    pub(crate) fn from_parts(values: Vec<f64>, seed: u64, block_diagonal: bool) -> Self {
        Self {
            values,
            seed,
            block_diagonal,
        }
    }

    /// The simulated values, all nonnegative.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of draws.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Whether the draw vector is empty.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Seed the draws were generated from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Whether cross-block covariance was ignored.
    pub fn block_diagonal(&self) -> bool {
        self.block_diagonal
    }
}

/// One independent Gaussian quadratic-form component of a null draw.
///
/// The component contributes `scale * sum_i lambda_i z_i^2` per draw, which
/// is the squared norm of a field sampled through the spectral factor
/// `U diag(sqrt(lambda))` of its covariance.
#[derive(Debug, Clone)]
pub(crate) struct QuadComponent {
    pub eigenvalues: Vec<f64>,
    pub scale: f64,
}

/// Nonnegative spectrum of a symmetric matrix, tiny negatives clipped.
pub(crate) fn quad_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues
        .iter()
        .map(|&v| if v > 0.0 { v } else { 0.0 })
        .collect()
}

/// Sum of independent Gaussian quadratic forms, one substream per
/// (draw, component).
pub(crate) fn sample_quadform_sums(
    components: &[QuadComponent],
    d0: usize,
    outer_scale: f64,
    seed: u64,
) -> Vec<f64> {
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0f64; d0];
    values
        .par_iter_mut()
        .enumerate()
        .for_each(|(draw, out)| {
            let mut rng = base.clone();
            let mut acc = 0.0;
            for (c, comp) in components.iter().enumerate() {
                rng.set_stream(((draw as u64) << 16) | c as u64);
                rng.set_word_pos(0);
                let mut q = 0.0;
                for &lambda in &comp.eigenvalues {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    q += lambda * z * z;
                }
                acc += comp.scale * q;
            }
            *out = outer_scale * acc;
        });
    values
}

/// Draws from the null law of the scan statistic.
///
/// Each draw is `(1/K) sum_b mean_{(tau,sigma)} G_b(tau, sigma)^2` with the
/// fields sampled through the spectral factor of the projected covariance:
/// independently per block under `block_diagonal` (the default), jointly
/// from the full matrix otherwise.
pub fn draw_null_scan(
    cov: &NullCovariance,
    d0: usize,
    n_tapers: usize,
    seed: u64,
    block_diagonal: bool,
) -> Result<NullDraws> {
    if d0 == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    if n_tapers == 0 {
        return Err(Error::InvalidArgument("taper count must be positive".into()));
    }
    let m = cov.test_grid.field_dim() as f64;
    let components: Vec<QuadComponent> = if block_diagonal {
        cov.blocks
            .iter()
            .map(|b| QuadComponent {
                eigenvalues: quad_spectrum(b),
                scale: 1.0 / m,
            })
            .collect()
    } else {
        let full = cov.full.as_ref().ok_or_else(|| {
            Error::InvalidArgument(
                "full-covariance draws need a covariance built with include_offdiag".into(),
            )
        })?;
        vec![QuadComponent {
            eigenvalues: quad_spectrum(full),
            scale: 1.0 / m,
        }]
    };
    let values = sample_quadform_sums(&components, d0, 1.0 / n_tapers as f64, seed);
    Ok(NullDraws {
        values,
        seed,
        block_diagonal,
    })
}

/// Fraction of draws strictly greater than the observed value.
pub fn p_value(draws: &NullDraws, observed: f64) -> f64 {
    if draws.values.is_empty() {
        return 1.0;
    }
    let above = draws.values.iter().filter(|&&v| v > observed).count();
    above as f64 / draws.values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::TestGrid;

    #[test]
    fn factorize_identity_needs_no_jitter() {
        let m = DMatrix::<f64>::identity(4, 4);
        let f = psd_factorize(&m, 1e-8).unwrap();
        assert_eq!(f.jitter_used, 0.0);
        assert!((&f.lower * f.lower.transpose() - m).norm() < 1e-14);
    }

    #[test]
    fn factorize_hand_cholesky() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = psd_factorize(&m, 1e-8).unwrap();
        assert_eq!(f.jitter_used, 0.0);
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0_f64.sqrt()]);
        assert!((f.lower - expect).norm() < 1e-12);
    }

    #[test]
    fn factorize_rank_deficient_escalates_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        // plain Cholesky fails on the singular matrix
        assert!(Cholesky::new(m.clone()).is_none());
        let f = psd_factorize(&m, 1e-10).unwrap();
        assert_eq!(f.jitter_used, 1e-10);
        // indefinite input with zero jitter fails outright
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_factorize(&indef, 0.0).is_err());
    }

    fn toy_cov(b: usize, dim_grid: usize, scale: f64) -> NullCovariance {
        let m = dim_grid * dim_grid;
        let blocks = (0..b)
            .map(|i| DMatrix::<f64>::identity(m, m) * (scale * (i + 1) as f64))
            .collect();
        NullCovariance {
            blocks,
            full: None,
            test_grid: TestGrid::equally_spaced(dim_grid, dim_grid).unwrap(),
        }
    }

    #[test]
    fn zero_covariance_draws_are_zero() {
        let cov = toy_cov(3, 2, 0.0);
        let draws = draw_null_scan(&cov, 1000, 4, 7, true).unwrap();
        assert!(draws.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn draws_reproducible_from_seed() {
        let cov = toy_cov(3, 2, 0.7);
        let a = draw_null_scan(&cov, 2000, 4, 42, true).unwrap();
        let b = draw_null_scan(&cov, 2000, 4, 42, true).unwrap();
        assert_eq!(a.values(), b.values());
        let c = draw_null_scan(&cov, 2000, 4, 43, true).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn draw_mean_matches_trace_formula() {
        // E[draw] = (1/K) sum_b trace(Cov_b) / m
        let cov = toy_cov(2, 2, 0.5); // traces: 2.0 and 4.0, m = 4
        let k = 5;
        let d0 = 100_000;
        let draws = draw_null_scan(&cov, d0, k, 11, true).unwrap();
        let mean: f64 = draws.values().iter().sum::<f64>() / d0 as f64;
        let expect = (2.0 + 4.0) / 4.0 / k as f64;
        // variance of one draw: (2/K^2) sum_b sum_i (lambda_i/m)^2
        let var = 2.0 / (k * k) as f64 * (4.0 * (0.5f64 / 4.0).powi(2) + 4.0 * (1.0f64 / 4.0).powi(2));
        let se = (var / d0 as f64).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn p_value_counts_strictly_greater() {
        let draws = NullDraws {
            values: vec![1.0, 2.0, 3.0, 4.0],
            seed: 0,
            block_diagonal: true,
        };
        assert_eq!(p_value(&draws, 2.5), 0.5);
        assert_eq!(p_value(&draws, 5.0), 0.0);
        assert_eq!(p_value(&draws, 0.0), 1.0);
        assert_eq!(p_value(&draws, 4.0), 0.0);
    }

    #[test]
    fn all_draws_nonnegative() {
        let cov = toy_cov(4, 3, 1.3);
        let draws = draw_null_scan(&cov, 5000, 3, 99, true).unwrap();
        assert!(draws.values().iter().all(|&v| v >= 0.0));
    }
}
