use serde::{Deserialize, Serialize};

use crate::calibration::{centering, DesignRatios, KurtosisPair, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Ell,
    Mu,
    Nu2,
}

impl Quantity {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ell" => Ok(Quantity::Ell),
            "mu" => Ok(Quantity::Mu),
            "nu2" => Ok(Quantity::Nu2),
            _ => Err(Error::Config(format!("unknown quantity {s:?}; expected ell, mu or nu2"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub y1_range: (f64, f64),
    pub y2_range: (f64, f64),
    pub steps: usize,
    pub quantity: Quantity,
    pub kurtosis: KurtosisPair,
    pub variant: Variant,
}

impl SurfaceSpec {
    pub fn new(y1_range: (f64, f64), y2_range: (f64, f64), steps: usize, quantity: Quantity) -> Self {
        Self {
            y1_range,
            y2_range,
            steps,
            quantity,
            kurtosis: KurtosisPair::GAUSSIAN,
            variant: Variant::FullLrt,
        }
    }
}

/// `values[i][j]` belongs to `(y1[i], y2[j])`; `None` marks infeasible or
/// near-critical cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Surface {
    pub spec: SurfaceSpec,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

fn grid(range: (f64, f64), steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![range.0];
    }
    let width = range.1 - range.0;
    (0..steps)
        .map(|i| range.0 + width * i as f64 / (steps - 1) as f64)
        .collect()
}

fn cell(spec: &SurfaceSpec, y1: f64, y2: f64) -> Option<f64> {
    let r = DesignRatios::from_ratios(y1, y2).ok()?;
    if r.is_near_critical() {
        return None;
    }
    let c = centering(spec.variant, &r, spec.kurtosis).ok()?;
    Some(match spec.quantity {
        Quantity::Ell => c.ell,
        Quantity::Mu => c.mu,
        Quantity::Nu2 => c.nu2,
    })
}

/// Evaluates a centering quantity on an inclusive `steps × steps` grid.
pub fn calibration_surface(spec: &SurfaceSpec) -> Result<Surface> {
    if spec.steps == 0 {
        return Err(Error::Config("grid needs at least one step".into()));
    }
    for (lo, hi) in [spec.y1_range, spec.y2_range] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("invalid range ({lo}, {hi})")));
        }
    }
    let y1 = grid(spec.y1_range, spec.steps);
    let y2 = grid(spec.y2_range, spec.steps);
    let values = y1
        .iter()
        .map(|&a| y2.iter().map(|&b| cell(spec, a, b)).collect())
        .collect();
    Ok(Surface {
        spec: *spec,
        y1,
        y2,
        values,
    })
}
