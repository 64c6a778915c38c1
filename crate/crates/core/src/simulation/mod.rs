//! Seeded Monte Carlo experiments: empirical sizes and powers, null samples of
//! the standardized statistics, the kurtosis-estimator tables and calibration
//! surfaces.
//!
//! Every replicate draws from its own ChaCha substream addressed by
//! `(master_seed, replicate index)`, and results are reduced in index order,
//! so reports do not depend on the number of worker threads.

mod population;
mod surface;
mod tables;

pub use population::{
    generate_population, replicate_rng, AlternativeScaling, Case, Population, PopulationRoot,
    Role,
};
pub use surface::{calibration_surface, Quantity, Surface, SurfaceSpec};
pub use tables::{
    reproduce_table, table_layout, CellReport, DeltaCell, TableId, TableOptions, TableReport,
    TableResults, ALTERNATIVES, DELTA_GRID, POWER_GRID,
};

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{centering, make_ratios, Variant};
use crate::comparators::{clx_test, li_chen_test};
use crate::error::{Error, Result};
use crate::linalg::spectrum_of;
use crate::stats::Summary;
use crate::test_engine::{raw_statistic, resolve_kurtosis, KurtosisOption, Sidedness};

/// Fraction of failed replicates above which a scenario is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

pub const DEFAULT_REPLICATES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "T")]
    Full,
    #[serde(rename = "T~")]
    Lite,
    #[serde(rename = "lc")]
    LiChen,
    #[serde(rename = "clx")]
    Clx,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [TestKind::Full, TestKind::Lite, TestKind::LiChen, TestKind::Clx];

    pub fn label(self) -> &'static str {
        match self {
            TestKind::Full => "T",
            TestKind::Lite => "T~",
            TestKind::LiChen => "lc",
            TestKind::Clx => "clx",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "T" | "t" | "full" => Some(TestKind::Full),
            "T~" | "t~" | "lite" => Some(TestKind::Lite),
            "lc" => Some(TestKind::LiChen),
            "clx" => Some(TestKind::Clx),
            _ => None,
        }
    }

    fn variant(self) -> Option<Variant> {
        match self {
            TestKind::Full => Some(Variant::FullLrt),
            TestKind::Lite => Some(Variant::LiteLrt),
            _ => None,
        }
    }
}

/// Kurtosis source for the LRT statistics inside a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KurtosisMode {
    /// The population's own fourth cumulant (0 for Case 1, -1.2 otherwise).
    #[default]
    TrueValues,
    Estimated,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub case: Case,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub a: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub level: f64,
    pub tests: Vec<TestKind>,
    pub kurtosis_mode: KurtosisMode,
    pub scaling: AlternativeScaling,
    pub sidedness: Sidedness,
}

impl ScenarioConfig {
    /// Defaults: 2000 replicates, level 0.05, all four tests, true kurtosis.
    pub fn new(case: Case, n1: usize, n2: usize, p: usize, a: f64) -> Self {
        Self {
            case,
            n1,
            n2,
            p,
            a,
            replicates: DEFAULT_REPLICATES,
            master_seed: 0,
            level: 0.05,
            tests: TestKind::ALL.to_vec(),
            kurtosis_mode: KurtosisMode::TrueValues,
            scaling: AlternativeScaling::Amplitude,
            sidedness: Sidedness::TwoSided,
        }
    }

    pub fn with_tests(mut self, tests: &[TestKind]) -> Self {
        self.tests = tests.to_vec();
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} is not in (0,1)", self.level)));
        }
        if self.tests.is_empty() {
            return Err(Error::Config("no tests selected".into()));
        }
        if self.tests.iter().any(|t| t.variant().is_some()) && self.p >= self.n1 + self.n2 {
            return Err(Error::DimensionsAssumption {
                p: self.p,
                n1: self.n1,
                n2: self.n2,
            });
        }
        Ok(())
    }

    pub fn population(&self) -> Result<Population> {
        Population::new(self.case, self.p, self.n1, self.n2, self.a, self.scaling)
    }

    fn kurtosis_option(&self) -> KurtosisOption {
        match self.kurtosis_mode {
            KurtosisMode::TrueValues => {
                let d = self.case.true_delta();
                KurtosisOption::Known { delta1: d, delta2: d }
            }
            KurtosisMode::Estimated => KurtosisOption::Estimate { prefer_lowdim: false },
            KurtosisMode::Gaussian => KurtosisOption::Gaussian,
        }
    }
}

/// Per-test tallies of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestTally {
    pub test: TestKind,
    pub rejections: usize,
    pub completed: usize,
    pub rate: f64,
    /// Standardized statistic for `T`/`T~`, raw statistic for the comparators.
    pub statistic: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub replicates: usize,
    pub failures: usize,
    pub master_seed: u64,
    pub tests: Vec<TestTally>,
    #[serde(skip)]
    pub runtime: Duration,
}

/// Equality ignores the wall-clock runtime.
impl PartialEq for ScenarioReport {
    fn eq(&self, other: &Self) -> bool {
        self.replicates == other.replicates
            && self.failures == other.failures
            && self.master_seed == other.master_seed
            && self.tests == other.tests
    }
}

impl ScenarioReport {
    pub fn rate(&self, test: TestKind) -> Option<f64> {
        self.tests.iter().find(|t| t.test == test).map(|t| t.rate)
    }
}

/// Statistic and p-value of every selected test for one replicate.
type ReplicateOutcome = std::result::Result<Vec<(f64, f64)>, String>;

fn evaluate_replicate(cfg: &ScenarioConfig, pop: &Population, index: u64) -> ReplicateOutcome {
    let (x, y) = pop.draw_pair(cfg.master_seed, index);
    let needs_spectrum = cfg.tests.iter().any(|t| t.variant().is_some());
    let lrt = if needs_spectrum {
        let ratios = make_ratios(cfg.p, cfg.n1, cfg.n2).map_err(|e| e.to_string())?;
        let spectrum = spectrum_of(&x, &y).map_err(|e| e.to_string())?;
        let (pair, _, _) =
            resolve_kurtosis(&x, &y, cfg.kurtosis_option()).map_err(|e| e.to_string())?;
        Some((ratios, spectrum, pair))
    } else {
        None
    };
    cfg.tests
        .iter()
        .map(|test| match (test.variant(), &lrt) {
            (Some(variant), Some((ratios, spectrum, pair))) => {
                let raw = raw_statistic(variant, spectrum, ratios).map_err(|e| e.to_string())?;
                let params = centering(variant, ratios, *pair).map_err(|e| e.to_string())?;
                let t = params.standardize(raw, cfg.p);
                Ok((t, cfg.sidedness.p_value(t)))
            }
            (None, _) => {
                let res = match test {
                    TestKind::LiChen => li_chen_test(&x, &y),
                    _ => clx_test(&x, &y),
                }
                .map_err(|e| e.to_string())?;
                Ok((res.statistic, res.p_value))
            }
            (Some(_), None) => unreachable!("spectrum computed whenever an LRT is selected"),
        })
        .collect()
}

fn outcomes(cfg: &ScenarioConfig, count: usize) -> Result<(Population, Vec<ReplicateOutcome>)> {
    let pop = cfg.population()?;
    let out = (0..count as u64)
        .into_par_iter()
        .map(|r| evaluate_replicate(cfg, &pop, r))
        .collect();
    Ok((pop, out))
}

fn check_failures(failures: usize, replicates: usize, first: Option<&String>) -> Result<()> {
    if failures as f64 > MAX_FAILURE_FRACTION * replicates as f64 {
        return Err(Error::Scenario {
            failures,
            replicates,
            first: first.cloned().unwrap_or_default(),
        });
    }
    Ok(())
}

/// Runs all replicates of a scenario and tallies rejections at `cfg.level`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (_, results) = outcomes(cfg, cfg.replicates)?;

    let failed: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    check_failures(failed.len(), cfg.replicates, failed.first().copied())?;

    let tests = cfg
        .tests
        .iter()
        .enumerate()
        .map(|(k, &test)| {
            let values: Vec<(f64, f64)> = results
                .iter()
                .filter_map(|r| r.as_ref().ok().map(|v| v[k]))
                .collect();
            let rejections = values.iter().filter(|(_, pv)| *pv < cfg.level).count();
            let stats: Vec<f64> = values.iter().map(|(s, _)| *s).collect();
            TestTally {
                test,
                rejections,
                completed: values.len(),
                rate: if values.is_empty() {
                    f64::NAN
                } else {
                    rejections as f64 / values.len() as f64
                },
                statistic: Summary::of(&stats),
            }
        })
        .collect();

    Ok(ScenarioReport {
        replicates: cfg.replicates,
        failures: failed.len(),
        master_seed: cfg.master_seed,
        tests,
        runtime: start.elapsed(),
    })
}

/// `m` standardized values of `T` or `T~` drawn under the configuration
/// (normally with `a = 0`), in replicate order.
pub fn null_distribution_sample(cfg: &ScenarioConfig, variant: Variant, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let kind = match variant {
        Variant::FullLrt => TestKind::Full,
        Variant::LiteLrt => TestKind::Lite,
    };
    let cfg = ScenarioConfig {
        tests: vec![kind],
        replicates: m,
        ..cfg.clone()
    };
    cfg.validate()?;
    let (_, results) = outcomes(&cfg, m)?;
    let failed: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    check_failures(failed.len(), m, failed.first().copied())?;
    Ok(results
        .into_iter()
        .filter_map(|r| r.ok().map(|v| v[0].0))
        .collect())
}

/// Replicated kurtosis estimates of sample 1 (pooled estimator), returning
/// the values in replicate order.
pub fn kurtosis_replicates(
    case: Case,
    n1: usize,
    n2: usize,
    p: usize,
    replicates: usize,
    master_seed: u64,
    lowdim: bool,
) -> Result<Vec<f64>> {
    let pop = Population::new(case, p, n1, n2, 0.0, AlternativeScaling::Amplitude)?;
    let results: Vec<Result<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(master_seed, r);
            let x = pop.draw(Role::Sample1, &mut rng);
            if lowdim {
                crate::kurtosis::estimate_delta_lowdim(&x, 1).map(|e| e.value)
            } else {
                let y = pop.draw(Role::Sample2, &mut rng);
                crate::kurtosis::estimate_delta(&x, &y, 1).map(|e| e.value)
            }
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_err()).count();
    let first = results.iter().find_map(|r| r.as_ref().err().map(|e| e.to_string()));
    check_failures(failures, replicates, first.as_ref())?;
    Ok(results.into_iter().filter_map(|r| r.ok()).collect())
}
