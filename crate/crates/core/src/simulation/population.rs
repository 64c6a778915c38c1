use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_sqrt, ObservationMatrix};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Population designs. Case 1 draws standard normal entries, Cases 2-4 draw
/// uniform entries on `(-√3, √3)`; the base covariance `Σ2` is the identity
/// (Cases 1-2), `Diag(p², 1, ..., 1)` (Case 3) or `0.5 I + 0.5 11'` (Case 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Case {
    GaussianIdentity,
    UniformIdentity,
    UniformSpiked,
    UniformCompound,
}

impl Case {
    pub fn id(self) -> u8 {
        match self {
            Case::GaussianIdentity => 1,
            Case::UniformIdentity => 2,
            Case::UniformSpiked => 3,
            Case::UniformCompound => 4,
        }
    }

    pub fn is_gaussian(self) -> bool {
        self == Case::GaussianIdentity
    }

    /// Fourth cumulant of the entries.
    pub fn true_delta(self) -> f64 {
        if self.is_gaussian() {
            0.0
        } else {
            -1.2
        }
    }
}

impl TryFrom<u8> for Case {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Case::GaussianIdentity),
            2 => Ok(Case::UniformIdentity),
            3 => Ok(Case::UniformSpiked),
            4 => Ok(Case::UniformCompound),
            _ => Err(Error::Config(format!("case must be 1, 2, 3 or 4 (got {v})"))),
        }
    }
}

impl From<Case> for u8 {
    fn from(c: Case) -> u8 {
        c.id()
    }
}

/// How the alternative strength `a` enters sample 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlternativeScaling {
    /// Observations of sample 1 multiplied by `1 + a/n1`.
    #[default]
    Amplitude,
    /// Covariance of sample 1 multiplied by `1 + a/n1`.
    Covariance,
}

impl AlternativeScaling {
    pub fn factor(self, a: f64, n1: usize) -> f64 {
        let f = 1.0 + a / n1 as f64;
        match self {
            AlternativeScaling::Amplitude => f,
            AlternativeScaling::Covariance => f.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sample1,
    Sample2,
}

/// Square root of the base covariance `Σ2`.
#[derive(Debug, Clone, PartialEq)]
pub enum PopulationRoot {
    Identity,
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl PopulationRoot {
    pub fn for_case(case: Case, p: usize) -> Self {
        match case {
            Case::GaussianIdentity | Case::UniformIdentity => PopulationRoot::Identity,
            Case::UniformSpiked => {
                let mut d = DVector::from_element(p, 1.0);
                d[0] = p as f64;
                PopulationRoot::Diagonal(d)
            }
            Case::UniformCompound => {
                let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5 });
                PopulationRoot::Dense(symmetric_sqrt(&sigma))
            }
        }
    }

    fn apply(&self, mut x: DMatrix<f64>) -> DMatrix<f64> {
        match self {
            PopulationRoot::Identity => x,
            PopulationRoot::Diagonal(d) => {
                for mut col in x.column_iter_mut() {
                    col.component_mul_assign(d);
                }
                x
            }
            PopulationRoot::Dense(r) => r * x,
        }
    }
}

/// Everything needed to draw the two samples of one scenario.
#[derive(Debug, Clone)]
pub struct Population {
    pub case: Case,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub a: f64,
    pub scaling: AlternativeScaling,
    root: PopulationRoot,
}

impl Population {
    pub fn new(
        case: Case,
        p: usize,
        n1: usize,
        n2: usize,
        a: f64,
        scaling: AlternativeScaling,
    ) -> Result<Self> {
        if p == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::Config(format!(
                "p, n1, n2 must be positive (got {p}, {n1}, {n2})"
            )));
        }
        if !a.is_finite() {
            return Err(Error::Config(format!("alternative strength a = {a} is not finite")));
        }
        Ok(Self {
            case,
            p,
            n1,
            n2,
            a,
            scaling,
            root: PopulationRoot::for_case(case, p),
        })
    }

    pub fn root(&self) -> &PopulationRoot {
        &self.root
    }

    /// Draws `n + 1` observations (so that the covariance divisor is `n`).
    pub fn draw(&self, role: Role, rng: &mut ChaCha8Rng) -> ObservationMatrix {
        let (n, factor) = match role {
            Role::Sample1 => (self.n1, self.scaling.factor(self.a, self.n1)),
            Role::Sample2 => (self.n2, 1.0),
        };
        generate_population(self.case, &self.root, self.p, n + 1, factor, rng)
    }

    /// Both samples of replicate `index`, from its own substream.
    pub fn draw_pair(&self, master_seed: u64, index: u64) -> (ObservationMatrix, ObservationMatrix) {
        let mut rng = replicate_rng(master_seed, index);
        let x = self.draw(Role::Sample1, &mut rng);
        let y = self.draw(Role::Sample2, &mut rng);
        (x, y)
    }
}

/// Substream `index` of the ChaCha generator keyed by `master_seed`; distinct
/// indices address disjoint keystreams.
pub fn replicate_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// `n_obs` i.i.d. columns `factor * Σ^{1/2} x` with standardized entries `x`.
pub fn generate_population(
    case: Case,
    root: &PopulationRoot,
    p: usize,
    n_obs: usize,
    factor: f64,
    rng: &mut ChaCha8Rng,
) -> ObservationMatrix {
    let x = if case.is_gaussian() {
        DMatrix::from_fn(p, n_obs, |_, _| rng.sample::<f64, _>(StandardNormal))
    } else {
        DMatrix::from_fn(p, n_obs, |_, _| SQRT_3 * (2.0 * rng.random::<f64>() - 1.0))
    };
    let mut x = root.apply(x);
    if factor != 1.0 {
        x *= factor;
    }
    ObservationMatrix::new(x).expect("generated samples are finite with N >= 2")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_fourth_moment() {
        let mut rng = replicate_rng(11, 0);
        let x = generate_population(Case::UniformIdentity, &PopulationRoot::Identity, 1, 1_000_000, 1.0, &mut rng);
        let m4 = x.data().iter().map(|v| v.powi(4)).sum::<f64>() / 1e6;
        assert!((1.79..=1.81).contains(&m4), "{m4}");
    }

    #[test]
    fn identity_case_has_unit_variance() {
        let mut rng = replicate_rng(12, 0);
        let n = 10_000;
        let x = generate_population(Case::GaussianIdentity, &PopulationRoot::Identity, 3, n, 1.0, &mut rng);
        let s = crate::linalg::sample_covariance(&x).unwrap();
        // SE of a variance estimate is sqrt(2/n)
        let se = (2.0 / n as f64).sqrt();
        for i in 0..3 {
            assert!((s.matrix()[(i, i)] - 1.0).abs() < 5.0 * se);
        }
    }

    #[test]
    fn compound_root_squares_back() {
        let PopulationRoot::Dense(r) = PopulationRoot::for_case(Case::UniformCompound, 3) else {
            panic!("dense root expected");
        };
        let sigma = &r * &r;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.5 };
                assert!((sigma[(i, j)] - want).abs() < 1e-12);
            }
        }
        let mut ev: Vec<f64> = sigma.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (g, w) in ev.iter().zip([0.5, 0.5, 2.0]) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn compound_sample_covariance_converges() {
        let pop = Population::new(Case::UniformCompound, 3, 20_000, 10, 0.0, AlternativeScaling::Amplitude).unwrap();
        let mut rng = replicate_rng(13, 0);
        let x = pop.draw(Role::Sample1, &mut rng);
        let s = crate::linalg::sample_covariance(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.5 };
                assert!((s.matrix()[(i, j)] - want).abs() < 0.05);
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let pop = Population::new(Case::UniformSpiked, 4, 6, 7, 10.0, AlternativeScaling::Amplitude).unwrap();
        let (a1, b1) = pop.draw_pair(5, 3);
        let (a2, b2) = pop.draw_pair(5, 3);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let (a3, _) = pop.draw_pair(5, 4);
        assert_ne!(a1, a3);
        // spiked coordinate carries scale p
        assert_eq!(b1.n_obs(), 8);
        assert_eq!(a1.n_obs(), 7);
    }

    #[test]
    fn scaling_factors() {
        assert_eq!(AlternativeScaling::Amplitude.factor(10.0, 25), 1.4);
        assert!((AlternativeScaling::Covariance.factor(10.0, 25) - 1.4f64.sqrt()).abs() < 1e-15);
        assert!(Case::try_from(5).is_err());
    }
}
