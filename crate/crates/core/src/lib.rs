//! Data-adaptive frequency band estimation for nonstationary functional
//! time series.
//!
//! The pipeline: estimate the time-varying spectral kernel with local sine
//! multitapers over temporal blocks, demean it across blocks, walk the
//! frequency axis with an integrated scan statistic whose null distribution
//! is simulated from Gaussian quadratic forms, confirm cuts under Hochberg
//! familywise control, and test each resulting band for stationarity.
//!
//! Modules:
//! - [`fts`]: series, block plans, frequency grids
//! - [`multitaper`]: sine tapers, functional DFTs, spectral kernels
//! - [`scan`]: scan statistic and null covariance assembly
//! - [`nullsim`]: Gaussian quadratic-form simulation and p-values
//! - [`search`]: the batched band search with Hochberg control
//! - [`stationarity`]: within-band stationarity test
//! - [`simgen`]: synthetic data generators and the Rand index

pub mod error;
pub mod fts;
pub mod multitaper;
pub mod nullsim;
pub mod scan;
pub mod search;
pub mod simgen;
pub mod stationarity;

pub use error::{Error, Result};
pub use fts::{fourier_grid, make_block_plan, uniform_grid, BlockPlan, FrequencyGrid, FunctionalTimeSeries};
pub use multitaper::{
    bandwidth_for_tapers, demean_spectrum, fdft, multitaper_spectrum, sine_tapers,
    tapers_for_bandwidth, DemeanedSpectrum, SpectralEstimate, TaperTransfer,
};
pub use nullsim::{
    default_jitter, derive_seed, draw_null_scan, p_value, psd_factorize, NullDraws, PsdFactor,
};
pub use scan::{
    band_average, c_kernel, f_kernel, null_covariance, scan_statistic, ConjugatePairing,
    CovarianceModel, NullCovariance, ScanWindow, TestGrid, WindowCovarianceBuilder,
};
pub use search::{
    hochberg, search_partition, BandPartition, PassAction, PassRecord, SearchConfig, SearchTrace,
    TestRecord,
};
pub use simgen::{bspline_basis, phi, rand_index, simulate_fts, synthesize_banded, SimSetting};
pub use stationarity::{
    draw_null_stationarity, stationarity_statistic, stationarity_test, StationarityResult,
    MAX_SIM_FREQS,
};
