use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::quadrature::integrate;
use super::DesignRatios;
use crate::error::{Error, Result};

/// Absolute tolerance of the centering oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-9;
const ORACLE_MAX_INTERVALS: usize = 2000;

/// Support `[x_l, x_r]` of the continuous part of the limiting Beta-matrix law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportInterval {
    pub x_l: f64,
    pub x_r: f64,
}

pub fn support(r: &DesignRatios) -> SupportInterval {
    let s = r.y1 + r.y2;
    let scale = r.y2 / (s * s);
    SupportInterval {
        x_l: scale * (r.h - r.y1).powi(2),
        x_r: scale * (r.h + r.y1).powi(2),
    }
}

/// Density of the continuous part; integrates to the bulk fraction
/// `1 - max(0, 1 - 1/y1) - max(0, 1 - 1/y2)`.
pub fn limiting_density(r: &DesignRatios, x: f64) -> f64 {
    let SupportInterval { x_l, x_r } = support(r);
    if !(x > x_l && x < x_r) {
        return 0.0;
    }
    (r.alpha() + 1.0) * ((x_r - x) * (x - x_l)).sqrt() / (2.0 * PI * r.y1 * x * (1.0 - x))
}

/// Integrand applied against the limiting density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// `log x`, whose integral is the lite-LRT limit.
    LogX,
    /// `c1 log x + c2 log(1-x)`, whose integral is the full-LRT limit.
    FullLrt,
    /// Constant 1: the mass of the continuous part.
    Unit,
}

/// Integral of `kernel` against the limiting density, computed by adaptive
/// quadrature after the substitution `x = x_l + (x_r - x_l) sin²θ`, which
/// turns the square-root endpoints into smooth zeros.
pub fn quadrature_centering(r: &DesignRatios, kernel: Kernel) -> Result<f64> {
    let SupportInterval { x_l, x_r } = support(r);
    let width = x_r - x_l;
    if !(width > 0.0 && x_l >= 0.0 && x_r <= 1.0) {
        return Err(Error::Oracle(format!("degenerate support [{x_l}, {x_r}]")));
    }
    let (c1, c2) = (r.y2 / (r.y1 + r.y2), r.y1 / (r.y1 + r.y2));
    let scale = (r.alpha() + 1.0) / (2.0 * PI * r.y1);
    let integrand = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let x = x_l + width * s * s;
        // sqrt((x_r-x)(x-x_l)) dx = 2 width^2 s^2 c^2 dθ
        let weight = scale * 2.0 * width * width * s * s * c * c / (x * (1.0 - x));
        let k = match kernel {
            Kernel::LogX => x.ln(),
            Kernel::FullLrt => c1 * x.ln() + c2 * (1.0 - x).ln(),
            Kernel::Unit => 1.0,
        };
        if weight == 0.0 {
            0.0
        } else {
            k * weight
        }
    };
    let res = integrate(
        integrand,
        0.0,
        FRAC_PI_2,
        ORACLE_TOLERANCE,
        ORACLE_MAX_INTERVALS,
    )?;
    Ok(res.value)
}
