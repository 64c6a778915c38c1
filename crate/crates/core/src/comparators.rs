//! Benchmark tests: the trace-based U-statistic test of Li and Chen and the
//! maximum-entry test of Cai, Liu and Xia.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ObservationMatrix;
use crate::stats::normal_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparatorName {
    Lc,
    Clx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    StandardNormal,
    ExtremeValueTypeI,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparatorResult {
    pub name: ComparatorName,
    pub statistic: f64,
    pub p_value: f64,
    pub calibration: Calibration,
}

fn same_dimension(obs1: &ObservationMatrix, obs2: &ObservationMatrix) -> Result<()> {
    if obs1.p() != obs2.p() {
        return Err(Error::DimensionMismatch {
            what: "sample dimensions",
            left: obs1.p(),
            right: obs2.p(),
        });
    }
    Ok(())
}

/// Unbiased U-statistic estimate of `tr(Σ²)` from one sample, using sums over
/// distinct index tuples of the Gram matrix.
pub fn trace_sq_estimate(obs: &ObservationMatrix) -> Result<f64> {
    let n = obs.n_obs();
    if n < 4 {
        return Err(Error::DegenerateSample {
            n_obs: n,
            required: 4,
        });
    }
    let x = obs.data();
    let mut a = x.transpose() * x;
    a.fill_diagonal(0.0);
    Ok(within_u_statistic(&a))
}

fn within_u_statistic(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    let s2 = a.norm_squared();
    let row_sums: Vec<f64> = a.row_iter().map(|r| r.sum()).collect();
    let s3 = row_sums.iter().map(|r| r * r).sum::<f64>() - s2;
    let total: f64 = row_sums.iter().sum();
    let s4 = total * total - 4.0 * s3 - 2.0 * s2;
    s2 / (n * (n - 1.0)) - 2.0 * s3 / (n * (n - 1.0) * (n - 2.0))
        + s4 / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
}

/// Unbiased estimate of `tr(Σ1 Σ2)` from the cross products `C = X'Y`.
fn cross_u_statistic(c: &DMatrix<f64>) -> f64 {
    let (n1, n2) = (c.nrows() as f64, c.ncols() as f64);
    let c2 = c.norm_squared();
    let col_sq: f64 = c.column_iter().map(|col| col.sum().powi(2)).sum();
    let row_sq: f64 = c.row_iter().map(|row| row.sum().powi(2)).sum();
    let total = c.sum();
    let col_term = col_sq - c2;
    let row_term = row_sq - c2;
    let four = total * total - col_sq - row_sq + c2;
    c2 / (n1 * n2) - col_term / (n1 * n2 * (n1 - 1.0)) - row_term / (n1 * n2 * (n2 - 1.0))
        + four / (n1 * n2 * (n1 - 1.0) * (n2 - 1.0))
}

/// Li–Chen test. The statistic estimates `‖Σ1 - Σ2‖_F²` and is standardized by
/// its null standard deviation `2 (1/N1 + 1/N2) tr(Σ²)`, with `tr(Σ²)` pooled
/// from the two within-sample estimates. Upper-tail normal p-value.
pub fn li_chen_test(obs1: &ObservationMatrix, obs2: &ObservationMatrix) -> Result<ComparatorResult> {
    same_dimension(obs1, obs2)?;
    let a1 = trace_sq_estimate(obs1)?;
    let a2 = trace_sq_estimate(obs2)?;
    let (x, y) = (obs1.data(), obs2.data());
    let a3 = cross_u_statistic(&(x.transpose() * y));
    let (n1, n2) = (obs1.n_obs() as f64, obs2.n_obs() as f64);
    let distance = a1 + a2 - 2.0 * a3;
    let pooled = (n1 * a1 + n2 * a2) / (n1 + n2);
    let sd = 2.0 * (1.0 / n1 + 1.0 / n2) * pooled;
    if !(sd > 0.0) {
        return Err(Error::Domain(format!(
            "estimated tr(Σ²) = {pooled} is not positive"
        )));
    }
    let statistic = distance / sd;
    Ok(ComparatorResult {
        name: ComparatorName::Lc,
        statistic,
        p_value: normal_sf(statistic),
        calibration: Calibration::StandardNormal,
    })
}

/// Per-entry covariance (divisor `N`) and the variance estimate
/// `θ_ij = mean((z_i z_j - σ_ij)²) = mean(z_i² z_j²) - σ_ij²` of each entry.
fn entry_moments(obs: &ObservationMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let z = obs.centered();
    let n = z.ncols() as f64;
    let sigma = &z * z.transpose() / n;
    let sq = z.map(|v| v * v);
    let fourth = &sq * sq.transpose() / n;
    let theta = fourth.zip_map(&sigma, |f, s| (f - s * s).max(0.0));
    (sigma, theta)
}

/// Cai–Liu–Xia test: the maximum over `i ≤ j` of the standardized squared
/// difference of covariance entries, compared with its type-I extreme value
/// limit `exp(-(8π)^{-1/2} exp(-t/2))` after centering by `4 log p - log log p`.
pub fn clx_test(obs1: &ObservationMatrix, obs2: &ObservationMatrix) -> Result<ComparatorResult> {
    same_dimension(obs1, obs2)?;
    let p = obs1.p();
    if p < 2 {
        return Err(Error::Domain("the max-entry test needs p >= 2".into()));
    }
    let (s1, t1) = entry_moments(obs1);
    let (s2, t2) = entry_moments(obs2);
    let (n1, n2) = (obs1.n_obs() as f64, obs2.n_obs() as f64);
    let mut m = 0.0f64;
    for j in 0..p {
        for i in 0..=j {
            let num = (s1[(i, j)] - s2[(i, j)]).powi(2);
            let den = t1[(i, j)] / n1 + t2[(i, j)] / n2;
            let v = if num == 0.0 {
                0.0
            } else if den > 0.0 {
                num / den
            } else {
                f64::INFINITY
            };
            m = m.max(v);
        }
    }
    let pf = p as f64;
    let t = m - 4.0 * pf.ln() + pf.ln().ln();
    let cdf = (-(8.0 * std::f64::consts::PI).powf(-0.5) * (-t / 2.0).exp()).exp();
    Ok(ComparatorResult {
        name: ComparatorName::Clx,
        statistic: m,
        p_value: (1.0 - cdf).clamp(0.0, 1.0),
        calibration: Calibration::ExtremeValueTypeI,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(p: usize, n: usize, seed: u64) -> ObservationMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ObservationMatrix::new(DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng)))
            .unwrap()
    }

    /// Literal loops over distinct index tuples.
    fn brute_within(x: &DMatrix<f64>) -> f64 {
        let n = x.ncols();
        let g = x.transpose() * x;
        let (mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                t1 += g[(i, j)].powi(2);
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    t2 += g[(i, j)] * g[(j, k)];
                    for l in 0..n {
                        if l == i || l == j || l == k {
                            continue;
                        }
                        t3 += g[(i, j)] * g[(k, l)];
                    }
                }
            }
        }
        let nf = n as f64;
        t1 / (nf * (nf - 1.0)) - 2.0 * t2 / (nf * (nf - 1.0) * (nf - 2.0))
            + t3 / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0))
    }

    fn brute_cross(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let c = x.transpose() * y;
        let (n1, n2) = c.shape();
        let (mut t1, mut t2, mut t3, mut t4) = (0.0, 0.0, 0.0, 0.0);
        for l in 0..n1 {
            for k in 0..n2 {
                t1 += c[(l, k)].powi(2);
                for s in 0..n1 {
                    if s != l {
                        t2 += c[(l, k)] * c[(s, k)];
                    }
                }
                for t in 0..n2 {
                    if t != k {
                        t3 += c[(l, k)] * c[(l, t)];
                    }
                }
                for s in 0..n1 {
                    for t in 0..n2 {
                        if s != l && t != k {
                            t4 += c[(l, k)] * c[(s, t)];
                        }
                    }
                }
            }
        }
        let (a, b) = (n1 as f64, n2 as f64);
        t1 / (a * b) - t2 / (a * b * (a - 1.0)) - t3 / (a * b * (b - 1.0))
            + t4 / (a * b * (a - 1.0) * (b - 1.0))
    }

    #[test]
    fn gram_shortcuts_match_index_loops() {
        let x = gaussian(3, 9, 1);
        let y = gaussian(3, 7, 2);
        let fast = trace_sq_estimate(&x).unwrap();
        let slow = brute_within(x.data());
        assert!((fast - slow).abs() < 1e-10 * slow.abs().max(1.0));
        let fast = cross_u_statistic(&(x.data().transpose() * y.data()));
        let slow = brute_cross(x.data(), y.data());
        assert!((fast - slow).abs() < 1e-10 * slow.abs().max(1.0));
    }

    #[test]
    fn trace_estimator_ignores_location() {
        let x = gaussian(4, 10, 3);
        let shifted = ObservationMatrix::new(x.data().map(|v| v + 5.0)).unwrap();
        let a = trace_sq_estimate(&x).unwrap();
        let b = trace_sq_estimate(&shifted).unwrap();
        assert!((a - b).abs() < 1e-8 * a.abs());
    }

    #[test]
    fn small_samples_rejected() {
        let x = gaussian(3, 3, 4);
        let y = gaussian(3, 10, 5);
        assert!(matches!(li_chen_test(&x, &y), Err(Error::DegenerateSample { required: 4, .. })));
        let one = gaussian(1, 10, 6);
        assert!(clx_test(&one, &one).is_err());
    }

    #[test]
    fn identical_samples_do_not_reject() {
        let x = gaussian(10, 30, 7);
        let lc = li_chen_test(&x, &x).unwrap();
        assert!(lc.p_value > 0.05);
        let clx = clx_test(&x, &x).unwrap();
        assert_eq!(clx.statistic, 0.0);
        assert!(clx.p_value > 0.05);
    }

    #[test]
    fn clx_permutation_invariant() {
        let x = gaussian(6, 20, 8);
        let y = gaussian(6, 25, 9);
        let perm = [3, 0, 5, 1, 4, 2];
        let permute = |o: &ObservationMatrix| {
            ObservationMatrix::new(DMatrix::from_fn(6, o.n_obs(), |i, j| o.data()[(perm[i], j)]))
                .unwrap()
        };
        let a = clx_test(&x, &y).unwrap();
        let b = clx_test(&permute(&x), &permute(&y)).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12 * a.statistic);
    }
}
