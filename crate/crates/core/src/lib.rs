//! Modified likelihood-ratio tests for equality of two high-dimensional
//! covariance matrices.
//!
//! The two statistics are linear spectral statistics of the Beta matrix
//! `B = n1 S1 (n1 S1 + n2 S2)^{-1}` with its structural zeros and ones
//! trimmed away:
//!
//! * `T` (full) sums `c1 log λ + c2 log(1-λ)`,
//! * `T~` (lite) sums `log λ`,
//!
//! each centered and scaled by random-matrix limits so that it is
//! asymptotically standard normal under equality. Both remain valid when
//! `p` exceeds either sample size as long as `p < n1 + n2`.
//!
//! ```
//! use covlrt::{run_test, ObservationMatrix, TestOptions};
//! # use nalgebra::DMatrix;
//! let x = ObservationMatrix::new(DMatrix::from_fn(3, 8, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.1 * j as f64)).unwrap();
//! let y = ObservationMatrix::new(DMatrix::from_fn(3, 9, |i, j| ((i * 5 + j * 2) % 7) as f64 - 0.2 * i as f64)).unwrap();
//! let res = run_test(&x, &y, &TestOptions::default()).unwrap();
//! assert!((0.0..=1.0).contains(&res.p_value));
//! ```

pub mod calibration;
pub mod comparators;
pub mod error;
pub mod io;
pub mod kurtosis;
pub mod linalg;
pub mod simulation;
pub mod stats;
pub mod test_engine;
pub mod warning;

pub use calibration::{
    centering, centering_full, centering_lite, make_ratios, CenteringParams, DesignRatios,
    KurtosisPair, Variant,
};
pub use error::{Error, Result};
pub use kurtosis::{estimate_delta, estimate_delta_lowdim, KurtosisEstimate};
pub use linalg::{beta_spectrum, sample_covariance, spectrum_of, ObservationMatrix, TrimmedSpectrum};
pub use test_engine::{
    lite_statistic, lrt_statistic, run_test, KurtosisOption, Sidedness, TestOptions, TestResult,
};
pub use warning::Warning;
