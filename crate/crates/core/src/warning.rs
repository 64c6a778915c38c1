use std::fmt;

use serde::Serialize;

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// A dimension ratio lies inside the criticality guard band around 1.
    NearCritical { which: u8, ratio: f64 },
    /// Raw generalized eigenvalues were pulled back into [0,1].
    EigenvalueClamped { magnitude: f64 },
    /// A rank-classified structural zero or one is not numerically at 0 or 1.
    StructuralEigenvalue {
        expected: f64,
        index: usize,
        value: f64,
    },
    /// A fourth-cumulant estimate fell well below the -2 lower bound.
    KurtosisOutOfRange { sample: u8, value: f64 },
    /// Rows dropped during price ingestion because of missing cells.
    RowsDropped { count: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NearCritical { which, ratio } => write!(
                f,
                "y{which} = {ratio} is within the criticality guard band around 1; the variance term is large"
            ),
            Warning::EigenvalueClamped { magnitude } => {
                write!(f, "eigenvalues clamped into [0,1] by up to {magnitude:e}")
            }
            Warning::StructuralEigenvalue {
                expected,
                index,
                value,
            } => write!(
                f,
                "eigenvalue #{index} classified as structural {expected} but equals {value:e}"
            ),
            Warning::KurtosisOutOfRange { sample, value } => write!(
                f,
                "kurtosis estimate for sample {sample} is {value}, far below the bound -2"
            ),
            Warning::RowsDropped { count } => {
                write!(f, "{count} row(s) with missing cells dropped")
            }
        }
    }
}
