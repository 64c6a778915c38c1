//! The standardized statistics `T` (full) and `T~` (lite) and their p-values.

use serde::{Deserialize, Serialize};

use crate::calibration::{centering, make_ratios, CenteringParams, DesignRatios, KurtosisPair, Variant};
use crate::error::{Error, Result};
use crate::kurtosis::{estimate_delta, estimate_delta_lowdim, KurtosisEstimate};
use crate::linalg::{spectrum_of, ObservationMatrix, TrimmedSpectrum};
use crate::stats::{normal_cdf, normal_sf};
use crate::warning::Warning;

/// Rejection region of the standardized statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    /// `p = 2 (1 - Φ(|T|))`.
    #[default]
    TwoSided,
    /// `p = Φ(T)`; small statistics are evidence against equality.
    Lower,
}

impl Sidedness {
    pub fn p_value(self, t: f64) -> f64 {
        match self {
            Sidedness::TwoSided => (2.0 * normal_sf(t.abs())).min(1.0),
            Sidedness::Lower => normal_cdf(t),
        }
    }
}

/// Source of the fourth cumulants fed into the centering constants.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum KurtosisOption {
    #[default]
    Gaussian,
    Known { delta1: f64, delta2: f64 },
    /// Leave-one-out estimates; `prefer_lowdim` switches to the own-sample
    /// estimator when `p < min(n1, n2) - 1`.
    Estimate { prefer_lowdim: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KurtosisSource {
    Known,
    Estimated,
    GaussianAssumed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TestOptions {
    pub variant: Variant,
    pub kurtosis: KurtosisOption,
    pub sidedness: Sidedness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub variant: Variant,
    pub raw_statistic: f64,
    pub standardized: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    pub centering: CenteringParams,
    pub kurtosis_source: KurtosisSource,
    pub kurtosis: KurtosisPair,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub kurtosis_estimates: Vec<KurtosisEstimate>,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub warnings: Vec<Warning>,
}

fn check_spectrum(spec: &TrimmedSpectrum) -> Result<()> {
    debug_assert!(!spec.bulk.is_empty());
    if let Some((i, &v)) = spec
        .bulk
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0 && v < 1.0))
    {
        return Err(Error::SpectrumIntegrity {
            index: spec.zero_count + i,
            value: v,
        });
    }
    Ok(())
}

/// `Σ c1 log λ + c2 log(1-λ)` over the bulk.
pub fn lrt_statistic(spec: &TrimmedSpectrum, r: &DesignRatios) -> Result<f64> {
    if let Some(d) = r.dims {
        for (what, left, right) in [("p", spec.p, d.p), ("n1", spec.n1, d.n1), ("n2", spec.n2, d.n2)] {
            if left != right {
                return Err(Error::DimensionMismatch { what, left, right });
            }
        }
    }
    check_spectrum(spec)?;
    Ok(spec
        .bulk
        .iter()
        .map(|&l| r.c1 * l.ln() + r.c2 * (1.0 - l).ln())
        .sum())
}

/// `Σ log λ` over the bulk.
pub fn lite_statistic(spec: &TrimmedSpectrum) -> Result<f64> {
    check_spectrum(spec)?;
    Ok(spec.bulk.iter().map(|l| l.ln()).sum())
}

pub fn raw_statistic(variant: Variant, spec: &TrimmedSpectrum, r: &DesignRatios) -> Result<f64> {
    match variant {
        Variant::FullLrt => lrt_statistic(spec, r),
        Variant::LiteLrt => lite_statistic(spec),
    }
}

/// Resolves the kurtosis option into a pair plus the estimates behind it.
pub fn resolve_kurtosis(
    obs1: &ObservationMatrix,
    obs2: &ObservationMatrix,
    option: KurtosisOption,
) -> Result<(KurtosisPair, KurtosisSource, Vec<KurtosisEstimate>)> {
    match option {
        KurtosisOption::Gaussian => Ok((KurtosisPair::GAUSSIAN, KurtosisSource::GaussianAssumed, vec![])),
        KurtosisOption::Known { delta1, delta2 } => {
            if !(delta1.is_finite() && delta2.is_finite()) {
                return Err(Error::Config("kurtosis values must be finite".into()));
            }
            Ok((KurtosisPair::new(delta1, delta2), KurtosisSource::Known, vec![]))
        }
        KurtosisOption::Estimate { prefer_lowdim } => {
            let p = obs1.p();
            let lowdim = prefer_lowdim && p + 1 < obs1.dof().min(obs2.dof());
            let (e1, e2) = if lowdim {
                (estimate_delta_lowdim(obs1, 1)?, estimate_delta_lowdim(obs2, 2)?)
            } else {
                (estimate_delta(obs1, obs2, 1)?, estimate_delta(obs2, obs1, 2)?)
            };
            let pair = KurtosisPair::new(e1.value, e2.value);
            Ok((
                pair,
                KurtosisSource::Estimated,
                vec![e1.without_diagnostics(), e2.without_diagnostics()],
            ))
        }
    }
}

/// Full pipeline: covariances, spectrum, statistic, centering, p-value.
pub fn run_test(
    obs1: &ObservationMatrix,
    obs2: &ObservationMatrix,
    options: &TestOptions,
) -> Result<TestResult> {
    if obs1.p() != obs2.p() {
        return Err(Error::DimensionMismatch {
            what: "sample dimensions",
            left: obs1.p(),
            right: obs2.p(),
        });
    }
    let (p, n1, n2) = (obs1.p(), obs1.dof(), obs2.dof());
    let ratios = make_ratios(p, n1, n2)?;
    let spectrum = spectrum_of(obs1, obs2)?;
    let (pair, source, estimates) = resolve_kurtosis(obs1, obs2, options.kurtosis)?;
    evaluate(&spectrum, &ratios, pair, source, estimates, options)
}

/// Statistic and p-value for an already computed spectrum.
pub fn evaluate(
    spectrum: &TrimmedSpectrum,
    ratios: &DesignRatios,
    pair: KurtosisPair,
    source: KurtosisSource,
    estimates: Vec<KurtosisEstimate>,
    options: &TestOptions,
) -> Result<TestResult> {
    let raw = raw_statistic(options.variant, spectrum, ratios)?;
    let params = centering(options.variant, ratios, pair)?;
    let standardized = params.standardize(raw, spectrum.p);
    let p_value = options.sidedness.p_value(standardized);

    let mut warnings = ratios.warnings();
    warnings.extend(spectrum.warnings.iter().cloned());
    warnings.extend(estimates.iter().filter_map(KurtosisEstimate::warning));

    Ok(TestResult {
        variant: options.variant,
        raw_statistic: raw,
        standardized,
        p_value,
        sidedness: options.sidedness,
        centering: params,
        kurtosis_source: source,
        kurtosis: pair,
        kurtosis_estimates: estimates,
        p: spectrum.p,
        n1: spectrum.n1,
        n2: spectrum.n2,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(p: usize, n: usize, seed: u64) -> ObservationMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ObservationMatrix::new(DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng)))
            .unwrap()
    }

    fn synthetic(bulk: Vec<f64>) -> TrimmedSpectrum {
        TrimmedSpectrum::from_raw(bulk, 10, 10).unwrap()
    }

    #[test]
    fn single_term_statistics() {
        let r = DesignRatios::from_ratios(0.5, 0.5).unwrap();
        let s = synthetic(vec![0.5]);
        assert!((lrt_statistic(&s, &r).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        let s = synthetic(vec![0.25, 0.25]);
        assert!((lite_statistic(&s).unwrap() - 2.0 * 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kernel_maximum_at_c1() {
        let r = DesignRatios::from_ratios(0.4, 0.6).unwrap();
        let (c1, c2) = (r.c1, r.c2);
        let s = synthetic(vec![c1; 3]);
        let expect = 3.0 * (c1 * c1.ln() + c2 * c2.ln());
        assert!((lrt_statistic(&s, &r).unwrap() - expect).abs() < 1e-14);
        for delta in [-0.01, 0.01] {
            let other = synthetic(vec![c1 + delta, c1, c1]);
            assert!(lrt_statistic(&other, &r).unwrap() < expect);
        }
    }

    #[test]
    fn lite_is_monotone_in_each_eigenvalue() {
        let base = vec![0.2, 0.4, 0.7];
        let v0 = lite_statistic(&synthetic(base.clone())).unwrap();
        for i in 0..3 {
            let mut b = base.clone();
            b[i] -= 1e-3;
            assert!(lite_statistic(&synthetic(b)).unwrap() < v0);
        }
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let spec = synthetic(vec![0.3]);
        let r = make_ratios(5, 10, 10).unwrap();
        assert!(matches!(lrt_statistic(&spec, &r), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn p_values_follow_sidedness() {
        for t in [-3.0, -0.4, 0.0, 1.2, 5.0] {
            let two = Sidedness::TwoSided.p_value(t);
            let lower = Sidedness::Lower.p_value(t);
            assert!((two - 2.0 * (1.0 - normal_cdf(t.abs()))).abs() < 1e-12);
            assert!((lower - normal_cdf(t)).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&two));
        }
    }

    #[test]
    fn standardization_is_literal() {
        let x = gaussian(30, 41, 1);
        let y = gaussian(30, 51, 2);
        for variant in [Variant::FullLrt, Variant::LiteLrt] {
            let opts = TestOptions { variant, ..Default::default() };
            let res = run_test(&x, &y, &opts).unwrap();
            let c = res.centering;
            assert_eq!(
                res.standardized,
                (res.raw_statistic - 30.0 * c.ell - c.mu) / c.nu2.sqrt()
            );
            assert_eq!(res.kurtosis_source, KurtosisSource::GaussianAssumed);
        }
    }

    #[test]
    fn scale_and_determinism() {
        let x = gaussian(20, 31, 3);
        let y = gaussian(20, 26, 4);
        let opts = TestOptions::default();
        let a = run_test(&x, &y, &opts).unwrap();
        let b = run_test(&x, &y, &opts).unwrap();
        assert_eq!(a, b);
        let s = -3.7;
        let xs = ObservationMatrix::new(x.data() * s).unwrap();
        let ys = ObservationMatrix::new(y.data() * s).unwrap();
        let c = run_test(&xs, &ys, &opts).unwrap();
        assert!((a.raw_statistic - c.raw_statistic).abs() < 1e-10 * a.raw_statistic.abs());
    }

    #[test]
    fn estimate_mode_reports_estimates() {
        let x = gaussian(8, 60, 5);
        let y = gaussian(8, 70, 6);
        let opts = TestOptions {
            kurtosis: KurtosisOption::Estimate { prefer_lowdim: true },
            ..Default::default()
        };
        let res = run_test(&x, &y, &opts).unwrap();
        assert_eq!(res.kurtosis_source, KurtosisSource::Estimated);
        assert_eq!(res.kurtosis_estimates.len(), 2);
        assert_eq!(res.kurtosis.delta1, res.kurtosis_estimates[0].value);
    }

    #[test]
    fn dimensions_assumption_named() {
        let x = gaussian(12, 6, 7);
        let y = gaussian(12, 7, 8);
        let err = run_test(&x, &y, &TestOptions::default()).unwrap_err();
        assert!(err.to_string().contains("Dimensions Assumption p < n1+n2"));
        assert!(err.is_assumption_failure());
    }
}
