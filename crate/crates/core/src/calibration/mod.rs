//! Centering constants for the trimmed log-likelihood-ratio statistics.
//!
//! Everything here is a deterministic function of the dimension ratios
//! `y1 = p/n1`, `y2 = p/n2` and the fourth cumulants of the two populations.
//! Formulas that are naturally written as powers are evaluated as sums of
//! logarithms so that extreme ratios do not overflow.

mod density;
pub mod quadrature;

pub use density::{limiting_density, quadrature_centering, support, Kernel, SupportInterval};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::warning::Warning;

/// Half-width of the band around 1 in which a ratio is reported as near-critical.
pub const CRITICAL_BAND: f64 = 0.02;

/// Which of the two trimmed statistics a result refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `Σ c1 log λ + c2 log(1-λ)` over the bulk.
    #[default]
    FullLrt,
    /// `Σ log λ` over the bulk.
    LiteLrt,
}

impl Variant {
    pub fn symbol(self) -> &'static str {
        match self {
            Variant::FullLrt => "T",
            Variant::LiteLrt => "T~",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dimensions {
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
}

/// `y1`, `y2` and the derived constants `h`, `c1`, `c2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignRatios {
    pub y1: f64,
    pub y2: f64,
    pub h: f64,
    pub c1: f64,
    pub c2: f64,
    pub dims: Option<Dimensions>,
}

/// Ratios from integer dimensions; fails unless `p < n1 + n2`.
pub fn make_ratios(p: usize, n1: usize, n2: usize) -> Result<DesignRatios> {
    if p == 0 || n1 == 0 || n2 == 0 {
        return Err(Error::Domain(format!(
            "p, n1, n2 must be positive (got {p}, {n1}, {n2})"
        )));
    }
    if p >= n1 + n2 {
        return Err(Error::DimensionsAssumption { p, n1, n2 });
    }
    let mut r = DesignRatios::from_ratios(p as f64 / n1 as f64, p as f64 / n2 as f64)?;
    // exact rational forms for the weights
    r.c1 = n1 as f64 / (n1 + n2) as f64;
    r.c2 = n2 as f64 / (n1 + n2) as f64;
    r.dims = Some(Dimensions { p, n1, n2 });
    Ok(r)
}

impl DesignRatios {
    /// Ratios given directly as reals (used for calibration surfaces).
    pub fn from_ratios(y1: f64, y2: f64) -> Result<Self> {
        if !(y1 > 0.0 && y2 > 0.0 && y1.is_finite() && y2.is_finite()) {
            return Err(Error::Domain(format!(
                "ratios must be positive and finite (got y1={y1}, y2={y2})"
            )));
        }
        let h2 = y1 + y2 - y1 * y2;
        if !(h2 > 0.0) {
            return Err(Error::Domain(format!(
                "h^2 = y1 + y2 - y1*y2 = {h2} is not positive; Dimensions Assumption p < n1+n2 violated"
            )));
        }
        Ok(Self {
            y1,
            y2,
            h: h2.sqrt(),
            c1: y2 / (y1 + y2),
            c2: y1 / (y1 + y2),
            dims: None,
        })
    }

    /// Near-critical diagnostics for `|y_l - 1| < CRITICAL_BAND`.
    pub fn warnings(&self) -> Vec<Warning> {
        [(1u8, self.y1), (2u8, self.y2)]
            .into_iter()
            .filter(|(_, y)| (y - 1.0).abs() < CRITICAL_BAND)
            .map(|(which, ratio)| Warning::NearCritical { which, ratio })
            .collect()
    }

    pub fn is_near_critical(&self) -> bool {
        !self.warnings().is_empty()
    }

    /// `n2/n1 = y1/y2`.
    pub fn alpha(&self) -> f64 {
        self.y1 / self.y2
    }

    fn require_noncritical(&self) -> Result<()> {
        if self.y1 == 1.0 || self.y2 == 1.0 {
            return Err(Error::Domain(format!(
                "y1 = {} and y2 = {} must both differ from 1",
                self.y1, self.y2
            )));
        }
        Ok(())
    }
}

/// Fourth cumulants `Δ_l = E x^4 - 3` of the standardized entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KurtosisPair {
    pub delta1: f64,
    pub delta2: f64,
}

impl KurtosisPair {
    pub const GAUSSIAN: KurtosisPair = KurtosisPair {
        delta1: 0.0,
        delta2: 0.0,
    };

    pub fn new(delta1: f64, delta2: f64) -> Self {
        Self { delta1, delta2 }
    }

    pub fn swapped(self) -> Self {
        Self {
            delta1: self.delta2,
            delta2: self.delta1,
        }
    }
}

/// `(ℓ, μ, ν²)` such that `(stat - p ℓ - μ) / ν` is asymptotically N(0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenteringParams {
    pub ell: f64,
    pub mu: f64,
    pub nu2: f64,
    pub variant: Variant,
}

impl CenteringParams {
    pub fn standardize(&self, raw: f64, p: usize) -> f64 {
        (raw - p as f64 * self.ell - self.mu) / self.nu2.sqrt()
    }

    fn checked(self) -> Result<Self> {
        if !(self.ell.is_finite() && self.mu.is_finite() && self.nu2.is_finite()) {
            return Err(Error::Calibration(format!(
                "non-finite centering constants {self:?}"
            )));
        }
        if self.nu2 <= 0.0 {
            return Err(Error::Calibration(format!(
                "variance {} is not positive; design is too close to critical",
                self.nu2
            )));
        }
        Ok(self)
    }
}

/// Constants `h`, `c1`, `c2` re-derived from an argument pair `(a, b)`, so that
/// swapped calls see swapped weights.
#[derive(Debug, Clone, Copy)]
struct PairConstants {
    h: f64,
    c1: f64,
    c2: f64,
}

fn pair_constants(a: f64, b: f64) -> Result<PairConstants> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "arguments must be positive and finite (got {a}, {b})"
        )));
    }
    let h2 = a + b - a * b;
    if !(h2 > 0.0) {
        return Err(Error::Domain(format!("h^2 = {h2} is not positive for ({a}, {b})")));
    }
    Ok(PairConstants {
        h: h2.sqrt(),
        c1: b / (a + b),
        c2: a / (a + b),
    })
}

/// `l(a, b)`; zero unless `a > 1`.
pub fn scalar_l(a: f64, b: f64) -> Result<f64> {
    let k = pair_constants(a, b)?;
    if a <= 1.0 {
        return Ok(0.0);
    }
    Ok(2.0 * k.c1 * k.h * k.h / (a * b) * k.h.ln()
        - k.c1 * (1.0 + b) / b * a.ln()
        - k.c1 * (1.0 - a) / a * b.ln())
}

/// `u(a, b)`; zero unless `a > 1`.
pub fn scalar_u(a: f64, b: f64) -> Result<f64> {
    let k = pair_constants(a, b)?;
    if a <= 1.0 {
        return Ok(0.0);
    }
    Ok(k.c1 * (a.ln() - k.h.ln()))
}

/// `v(a, b)`; zero unless `a > 1`.
pub fn scalar_v(a: f64, b: f64) -> Result<f64> {
    let k = pair_constants(a, b)?;
    if a <= 1.0 {
        return Ok(0.0);
    }
    Ok(2.0 * k.c1 * a.ln() - 2.0 * k.c1 * (k.c1 + 2.0 * k.c2) * k.h.ln())
}

/// The fourth-moment shape function `Ψ(a, b)` entering the full-LRT mean.
pub fn psi(a: f64, b: f64) -> Result<f64> {
    let k = pair_constants(a, b)?;
    let h2 = k.h * k.h;
    let from_b = if b < 1.0 {
        b.powi(4)
    } else {
        h2 * (2.0 * b * b - h2)
    };
    let from_a = if a < 1.0 {
        a.powi(3) * (a + 2.0 * b)
    } else {
        h2 * (a + b + a * b)
    };
    Ok(k.c2 * a * a * from_b - k.c1 * b * b * from_a)
}

fn indicator(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// `|1 - y| log|1 - y|` scaled by `w / y`; the `x log x` form keeps it finite.
fn abs_log_term(y: f64, w: f64) -> f64 {
    let d = (1.0 - y).abs();
    w * d / y * d.ln()
}

/// Centering for the full trimmed LRT.
pub fn centering_full(r: &DesignRatios, k: KurtosisPair) -> Result<CenteringParams> {
    r.require_noncritical()?;
    let DesignRatios { y1, y2, h, .. } = *r;
    // weights re-derived from the ratios so the formula is symmetric under swap
    let c1 = y2 / (y1 + y2);
    let c2 = y1 / (y1 + y2);
    let s = y1 + y2;
    let ln_h = h.ln();
    let ln_d1 = (1.0 - y1).abs().ln();
    let ln_d2 = (1.0 - y2).abs().ln();
    let above1 = indicator(y1 > 1.0);
    let above2 = indicator(y2 > 1.0);

    let ell = c2 * y1.ln() + c1 * y2.ln() + 2.0 * h * h / (y1 * y2) * ln_h
        - s / (y1 * y2) * s.ln()
        - abs_log_term(y1, c1)
        - abs_log_term(y2, c2)
        - scalar_l(y1, y2)?
        - scalar_l(y2, y1)?;

    let mu = 0.5 * s.ln() + 0.5 * c1 * ln_d1 + 0.5 * c2 * ln_d2
        - ln_h
        - scalar_u(y1, y2)?
        - scalar_u(y2, y1)?
        + k.delta1 * psi(y1, y2)? / (2.0 * y1 * y2 * y2 * s * s)
        + k.delta2 * psi(y2, y1)? / (2.0 * y2 * y1 * y1 * s * s);

    let bracket = (y1 - 1.0) * y2 * y2 * above1 - (y2 - 1.0) * y1 * y1 * above2;
    let nu2 = 4.0 * ln_h - 2.0 * c1 * c1 * ln_d1 - 2.0 * c2 * c2 * ln_d2 - 2.0 * s.ln()
        + 2.0
            * (scalar_v(y1, y2)? + scalar_v(y2, y1)? + 4.0 * c1 * c2 * ln_h * above1 * above2)
        + (y1 * k.delta1 + y2 * k.delta2) / (y1 * y1 * y2 * y2 * s * s) * bracket * bracket;

    CenteringParams {
        ell,
        mu,
        nu2,
        variant: Variant::FullLrt,
    }
    .checked()
}

/// Centering for the lite (log-determinant) trimmed statistic.
pub fn centering_lite(r: &DesignRatios, k: KurtosisPair) -> Result<CenteringParams> {
    r.require_noncritical()?;
    let DesignRatios { y1, y2, h, .. } = *r;
    let s = y1 + y2;
    let h2 = h * h;
    let ln_h = h.ln();
    let ln_d1 = (1.0 - y1).abs().ln();
    let below = indicator(y1 < 1.0);
    let above = indicator(y1 > 1.0);

    let mut ell =
        y2.ln() + 2.0 * h2 / (y1 * y2) * ln_h - s / (y1 * y2) * s.ln() - abs_log_term(y1, 1.0);
    if y1 > 1.0 {
        ell -= 2.0 * h2 / (y1 * y2) * ln_h - (1.0 + y2) / y2 * y1.ln() - (1.0 - y1) / y1 * y2.ln();
    }

    let mu = 0.5 * s.ln() + 0.5 * ln_d1 - ln_h - (y1.ln() - ln_h) * above
        - k.delta1 * (y1.powi(3) * (y1 + 2.0 * y2) * below + h2 * (y1 + y2 + y1 * y2) * above)
            / (2.0 * y1 * s * s)
        + k.delta2 * (y1.powi(4) * y2 * below + h2 * y2 * (2.0 * y1 * y1 - h2) * above)
            / (2.0 * y1 * y1 * s * s);

    let nu2 = 2.0 * (2.0 * ln_h - ln_d1 - s.ln())
        + 2.0 * (2.0 * y1.ln() - 2.0 * ln_h) * above
        + (y1 * k.delta1 + y2 * k.delta2) / (y1 * y1 * s * s)
            * (y1.powi(4) * below + h2 * h2 * above);

    CenteringParams {
        ell,
        mu,
        nu2,
        variant: Variant::LiteLrt,
    }
    .checked()
}

pub fn centering(variant: Variant, r: &DesignRatios, k: KurtosisPair) -> Result<CenteringParams> {
    match variant {
        Variant::FullLrt => centering_full(r, k),
        Variant::LiteLrt => centering_lite(r, k),
    }
}
