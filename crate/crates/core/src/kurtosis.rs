//! Moment estimators of the fourth cumulants `Δ1`, `Δ2` built from
//! leave-one-out quadratic forms.
//!
//! For observation `j` of the "own" sample, with `d = z_j - z̄`, the pooled
//! leave-one-out matrix is
//!
//! ```text
//! M_j = c_own S_own,j + c_other S_other = (W - (N/n) d d') / (n1 + n2 - 1)
//! ```
//!
//! where `W = n1 S1 + n2 S2` and `S_own,j` is the ordinary sample covariance
//! (divisor `N_own - 2`) of the remaining observations. The quadratic form
//! `d' M_j^{-1} d` therefore follows from `q = d' W^{-1} d` by one
//! Sherman–Morrison step, so a single factorization of `W` serves all `j`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{checked_cholesky, ObservationMatrix};
use crate::warning::Warning;

/// Estimates below `-2 - KURTOSIS_SLACK` are flagged.
pub const KURTOSIS_SLACK: f64 = 0.5;

/// Sherman–Morrison denominators below this are treated as singular.
const DOWNDATE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMethod {
    /// Inverse of the pooled leave-one-out matrix (valid for `p < n1+n2-1`).
    PooledLeaveOneOut,
    /// Inverse of the own-sample leave-one-out covariance (needs `p < n_own-1`).
    OwnLeaveOneOut,
}

/// How the per-observation inverses are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// One factorization plus a rank-one downdate per observation.
    #[default]
    RankOne,
    /// Rebuild and factor every leave-one-out matrix from scratch.
    Recompute,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KurtosisEstimate {
    pub value: f64,
    pub which_sample: u8,
    pub method: EstimatorMethod,
    pub y_used: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_observation_quadratics: Option<Vec<f64>>,
}

impl KurtosisEstimate {
    pub fn warning(&self) -> Option<Warning> {
        (self.value < -2.0 - KURTOSIS_SLACK).then_some(Warning::KurtosisOutOfRange {
            sample: self.which_sample,
            value: self.value,
        })
    }

    pub fn without_diagnostics(mut self) -> Self {
        self.per_observation_quadratics = None;
        self
    }
}

fn check_which(which: u8) -> Result<()> {
    if which == 1 || which == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("sample index must be 1 or 2, got {which}")))
    }
}

/// Pooled estimator of the fourth cumulant of the `own` sample.
pub fn estimate_delta(
    own: &ObservationMatrix,
    other: &ObservationMatrix,
    which: u8,
) -> Result<KurtosisEstimate> {
    estimate_delta_with(own, other, which, Strategy::RankOne)
}

pub fn estimate_delta_with(
    own: &ObservationMatrix,
    other: &ObservationMatrix,
    which: u8,
    strategy: Strategy,
) -> Result<KurtosisEstimate> {
    check_which(which)?;
    if own.p() != other.p() {
        return Err(Error::DimensionMismatch {
            what: "sample dimensions",
            left: own.p(),
            right: other.p(),
        });
    }
    let p = own.p();
    let (n_own, n_other) = (own.dof(), other.dof());
    let dof = n_own + n_other - 1;
    if p >= dof {
        return Err(Error::Domain(format!(
            "pooled estimator needs p < n1+n2-1 (p={p}, n1+n2-1={dof})"
        )));
    }
    let centered_own = own.centered();
    let centered_other = other.centered();
    let other_scatter = &centered_other * centered_other.transpose();
    let quads = match strategy {
        Strategy::RankOne => {
            let w = &centered_own * centered_own.transpose() + &other_scatter;
            rank_one_quadratics(&w, &centered_own, dof as f64)?
        }
        Strategy::Recompute => recompute_quadratics(own, Some(&other_scatter), dof as f64)?,
    };
    let y = p as f64 / dof as f64;
    Ok(KurtosisEstimate {
        value: moment_estimate(&quads, p, y),
        which_sample: which,
        method: EstimatorMethod::PooledLeaveOneOut,
        y_used: y,
        per_observation_quadratics: Some(quads),
    })
}

/// Own-sample estimator for the low-dimensional case `p < n_own - 1`.
pub fn estimate_delta_lowdim(own: &ObservationMatrix, which: u8) -> Result<KurtosisEstimate> {
    estimate_delta_lowdim_with(own, which, Strategy::RankOne)
}

pub fn estimate_delta_lowdim_with(
    own: &ObservationMatrix,
    which: u8,
    strategy: Strategy,
) -> Result<KurtosisEstimate> {
    check_which(which)?;
    let p = own.p();
    let n_own = own.dof();
    if n_own < 2 || p >= n_own - 1 {
        return Err(Error::Domain(format!(
            "own-sample estimator needs p < n-1 (p={p}, n={n_own})"
        )));
    }
    let dof = n_own - 1;
    let centered = own.centered();
    let quads = match strategy {
        Strategy::RankOne => {
            let w = &centered * centered.transpose();
            rank_one_quadratics(&w, &centered, dof as f64)?
        }
        Strategy::Recompute => recompute_quadratics(own, None, dof as f64)?,
    };
    let y = p as f64 / dof as f64;
    Ok(KurtosisEstimate {
        value: moment_estimate(&quads, p, y),
        which_sample: which,
        method: EstimatorMethod::OwnLeaveOneOut,
        y_used: y,
        per_observation_quadratics: Some(quads),
    })
}

/// `(1-y)^2 Σ (q_j - p/(1-y))^2 / (p N) - 2/(1-y)`, summed in index order.
fn moment_estimate(quads: &[f64], p: usize, y: f64) -> f64 {
    let center = p as f64 / (1.0 - y);
    let sum_sq: f64 = quads.iter().map(|q| (q - center).powi(2)).sum();
    (1.0 - y).powi(2) * sum_sq / (p as f64 * quads.len() as f64) - 2.0 / (1.0 - y)
}

/// `d_j' [(W - k d_j d_j') / dof]^{-1} d_j` for every centered column `d_j`.
fn rank_one_quadratics(w: &DMatrix<f64>, centered: &DMatrix<f64>, dof: f64) -> Result<Vec<f64>> {
    let n_obs = centered.ncols();
    let k = n_obs as f64 / (n_obs - 1) as f64;
    let l = checked_cholesky(w).map_err(|_| Error::LeaveOneOutSingular { j: 0 })?;
    let u = l
        .solve_lower_triangular(centered)
        .ok_or(Error::LeaveOneOutSingular { j: 0 })?;
    u.column_iter()
        .enumerate()
        .map(|(j, col)| {
            let q = col.norm_squared();
            let denom = 1.0 - k * q;
            if denom < DOWNDATE_FLOOR {
                return Err(Error::LeaveOneOutSingular { j });
            }
            Ok(dof * q / denom)
        })
        .collect()
}

/// Explicit rebuild of every leave-one-out matrix.
fn recompute_quadratics(
    own: &ObservationMatrix,
    other_scatter: Option<&DMatrix<f64>>,
    dof: f64,
) -> Result<Vec<f64>> {
    let data = own.data();
    let n_obs = own.n_obs();
    let mean = own.mean();
    (0..n_obs)
        .into_par_iter()
        .map(|j| {
            let rest = data.clone().remove_column(j);
            let rest_mean = rest.column_mean();
            let mut centered = rest;
            for mut c in centered.column_iter_mut() {
                c -= &rest_mean;
            }
            let mut m = &centered * centered.transpose();
            if let Some(s) = other_scatter {
                m += s;
            }
            m /= dof;
            let d = data.column(j) - &mean;
            let chol = m.cholesky().ok_or(Error::LeaveOneOutSingular { j })?;
            Ok(d.dot(&chol.solve(&d)))
        })
        .collect::<Result<Vec<f64>>>()
}
