use rand::RngCore;
use serde::Serialize;

use super::{
    kurtosis_replicates, replicate_rng, run_scenario, AlternativeScaling, Case, KurtosisMode,
    ScenarioConfig, ScenarioReport, TestKind,
};
use crate::error::{Error, Result};
use crate::stats::Summary;
use crate::test_engine::Sidedness;

/// The (n1, n2, p) blocks shared by the four size/power tables, grouped by
/// the regimes y1 > 1 & y2 > 1, y1 > 1 & y2 < 1, y1 < 1 & y2 > 1, both < 1.
pub const POWER_GRID: [(usize, usize, usize); 16] = [
    (25, 35, 40),
    (50, 70, 80),
    (100, 140, 160),
    (200, 280, 320),
    (25, 35, 30),
    (50, 70, 60),
    (100, 140, 120),
    (200, 280, 240),
    (35, 25, 30),
    (70, 50, 60),
    (140, 100, 120),
    (280, 200, 240),
    (25, 35, 20),
    (50, 70, 40),
    (100, 140, 80),
    (200, 280, 160),
];

pub const ALTERNATIVES: [f64; 3] = [0.0, 10.0, 20.0];

/// (n1, n2) and the dimensions used by the kurtosis-estimator tables.
pub const DELTA_GRID: [((usize, usize), [usize; 8]); 3] = [
    ((200, 280), [2, 10, 20, 100, 180, 220, 240, 300]),
    ((400, 560), [4, 20, 40, 200, 360, 440, 480, 600]),
    ((800, 1120), [8, 40, 80, 400, 720, 880, 960, 1200]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableId {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "4")]
    Four,
    Del1,
    Del2,
}

impl TableId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(TableId::One),
            "2" => Ok(TableId::Two),
            "3" => Ok(TableId::Three),
            "4" => Ok(TableId::Four),
            "del1" => Ok(TableId::Del1),
            "del2" => Ok(TableId::Del2),
            _ => Err(Error::Config(format!(
                "unknown table {s:?}; expected 1, 2, 3, 4, del1 or del2"
            ))),
        }
    }

    pub fn case(self) -> Case {
        match self {
            TableId::One | TableId::Del1 => Case::GaussianIdentity,
            TableId::Two | TableId::Del2 => Case::UniformIdentity,
            TableId::Three => Case::UniformSpiked,
            TableId::Four => Case::UniformCompound,
        }
    }

    pub fn is_delta(self) -> bool {
        matches!(self, TableId::Del1 | TableId::Del2)
    }

    pub fn default_replicates(self) -> usize {
        if self.is_delta() {
            500
        } else {
            super::DEFAULT_REPLICATES
        }
    }
}

/// Options shared by every cell of a table run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableOptions {
    pub replicates: usize,
    pub master_seed: u64,
    pub level: f64,
    pub tests: Vec<TestKind>,
    pub kurtosis_mode: KurtosisMode,
    pub scaling: AlternativeScaling,
    pub sidedness: Sidedness,
}

impl TableOptions {
    pub fn for_table(table: TableId) -> Self {
        Self {
            replicates: table.default_replicates(),
            master_seed: 0,
            level: 0.05,
            tests: TestKind::ALL.to_vec(),
            kurtosis_mode: KurtosisMode::TrueValues,
            scaling: AlternativeScaling::Amplitude,
            sidedness: Sidedness::TwoSided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub a: f64,
    pub seed: u64,
    pub report: ScenarioReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaCell {
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub seed: u64,
    pub estimate: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TableResults {
    Power(Vec<CellReport>),
    Delta(Vec<DeltaCell>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub table: TableId,
    pub case: Case,
    pub cells: TableResults,
}

/// Seed of block `index`, drawn from a stream that replicate indices never use.
fn block_seed(master_seed: u64, index: usize) -> u64 {
    replicate_rng(master_seed, (1u64 << 63) | index as u64).next_u64()
}

/// `(n1, n2, p)` blocks of a table, in report order.
pub fn table_layout(table: TableId) -> Vec<(usize, usize, usize)> {
    if table.is_delta() {
        DELTA_GRID
            .iter()
            .flat_map(|&((n1, n2), ps)| ps.into_iter().map(move |p| (n1, n2, p)))
            .collect()
    } else {
        POWER_GRID.to_vec()
    }
}

/// Runs every cell of a table. All alternatives of one `(n1, n2, p)` block
/// share the block's seed, so they reuse the same underlying draws.
pub fn reproduce_table(table: TableId, opts: &TableOptions) -> Result<TableReport> {
    let case = table.case();
    let cells = if table.is_delta() {
        let cells = table_layout(table)
            .into_iter()
            .enumerate()
            .map(|(i, (n1, n2, p))| {
                let seed = block_seed(opts.master_seed, i);
                let values = kurtosis_replicates(case, n1, n2, p, opts.replicates, seed, false)?;
                Ok(DeltaCell {
                    n1,
                    n2,
                    p,
                    seed,
                    estimate: Summary::of(&values),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TableResults::Delta(cells)
    } else {
        let mut cells = Vec::new();
        for (i, (n1, n2, p)) in table_layout(table).into_iter().enumerate() {
            let seed = block_seed(opts.master_seed, i);
            for a in ALTERNATIVES {
                let cfg = ScenarioConfig {
                    case,
                    n1,
                    n2,
                    p,
                    a,
                    replicates: opts.replicates,
                    master_seed: seed,
                    level: opts.level,
                    tests: opts.tests.clone(),
                    kurtosis_mode: opts.kurtosis_mode,
                    scaling: opts.scaling,
                    sidedness: opts.sidedness,
                };
                cells.push(CellReport {
                    n1,
                    n2,
                    p,
                    a,
                    seed,
                    report: run_scenario(&cfg)?,
                });
            }
        }
        TableResults::Power(cells)
    };
    Ok(TableReport { table, case, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts() {
        assert_eq!(table_layout(TableId::Three).len(), 16);
        let d = table_layout(TableId::Del2);
        assert_eq!(d.len(), 24);
        assert_eq!(d[1], (200, 280, 10));
        assert_eq!(d[23], (800, 1120, 1200));
        assert!(TableId::parse("5").is_err());
        assert_eq!(TableId::parse("del1").unwrap().case(), Case::GaussianIdentity);
    }

    #[test]
    fn block_seeds_differ() {
        let s: Vec<u64> = (0..16).map(|i| block_seed(7, i)).collect();
        for i in 0..16 {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }

    #[test]
    fn single_replicate_table_is_binary() {
        let mut opts = TableOptions::for_table(TableId::One);
        opts.replicates = 1;
        opts.master_seed = 1;
        opts.tests = vec![TestKind::Full, TestKind::Lite];
        let rep = reproduce_table(TableId::One, &opts).unwrap();
        let TableResults::Power(cells) = rep.cells else {
            panic!("power table expected");
        };
        assert_eq!(cells.len(), 48);
        for c in &cells {
            for t in &c.report.tests {
                assert!(t.rate == 0.0 || t.rate == 1.0);
            }
        }
    }
}
