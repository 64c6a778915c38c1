//! Sample covariances and the trimmed spectrum of the Beta matrix
//! `B = n1*S1 (n1*S1 + n2*S2)^{-1}`.
//!
//! The generalized problem `n1*S1 v = λ (n1*S1 + n2*S2) v` is reduced to a
//! standard symmetric one through a triangular factor of the pooled matrix,
//! which is positive definite whenever `p < n1 + n2` while `n1*S1` alone may
//! be singular.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::warning::Warning;

/// Structural eigenvalues further than this from 0 or 1 raise a warning.
pub const STRUCTURAL_TOLERANCE: f64 = 1e-6;

/// Relative pivot threshold below which the pooled matrix is declared singular.
pub const SINGULAR_POOLED_RTOL: f64 = 1e-10;

/// A p×N block of observations stored column-wise (one observation per column).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    data: DMatrix<f64>,
}

impl ObservationMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Input("observation matrix has no variables".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::DegenerateSample {
                n_obs: data.ncols(),
                required: 2,
            });
        }
        for (col, column) in data.column_iter().enumerate() {
            if let Some(row) = column.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(Self { data })
    }

    /// Builds from column-major values, `p` variables per observation.
    pub fn from_column_slice(p: usize, n_obs: usize, values: &[f64]) -> Result<Self> {
        if values.len() != p * n_obs {
            return Err(Error::DimensionMismatch {
                what: "value count vs p*N",
                left: values.len(),
                right: p * n_obs,
            });
        }
        Self::new(DMatrix::from_column_slice(p, n_obs, values))
    }

    /// Number of variables.
    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    /// Number of observations N.
    pub fn n_obs(&self) -> usize {
        self.data.ncols()
    }

    /// Degrees of freedom n = N - 1.
    pub fn dof(&self) -> usize {
        self.data.ncols() - 1
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn mean(&self) -> DVector<f64> {
        self.data.column_mean()
    }

    /// Observations with the sample mean removed from every column.
    pub fn centered(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut out = self.data.clone();
        for mut col in out.column_iter_mut() {
            col -= &mean;
        }
        out
    }

    /// Applies `z -> A z + b` to every observation.
    pub fn affine(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        if a.ncols() != self.p() || a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                what: "affine map vs p",
                left: a.ncols(),
                right: self.p(),
            });
        }
        let mut out = a * &self.data;
        for mut col in out.column_iter_mut() {
            col += b;
        }
        Self::new(out)
    }
}

/// Unbiased sample covariance `S = (1/n) Σ (z_i - z̄)(z_i - z̄)'` with `n = N - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
    divisor: usize,
    /// Upper bound on the rank: `min(p, n)` for sample covariances, `p` for
    /// matrices supplied directly.
    rank_bound: usize,
}

impl CovarianceMatrix {
    /// Wraps a symmetric matrix that did not come from a sample (for example a
    /// population covariance). It is treated as full rank when trimming.
    pub fn explicit(matrix: DMatrix<f64>, divisor: usize) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                what: "covariance rows vs columns",
                left: matrix.nrows(),
                right: matrix.ncols(),
            });
        }
        if let Some(i) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i % matrix.nrows(),
                col: i / matrix.nrows(),
            });
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Input("covariance matrix is not symmetric".into()));
        }
        let mut matrix = matrix;
        symmetrize(&mut matrix);
        let rank_bound = matrix.nrows();
        Ok(Self {
            matrix,
            divisor,
            rank_bound,
        })
    }

    pub fn rank_bound(&self) -> usize {
        self.rank_bound
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn divisor(&self) -> usize {
        self.divisor
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    /// The scatter matrix `n * S`.
    pub fn scatter(&self) -> DMatrix<f64> {
        &self.matrix * self.divisor as f64
    }
}

pub fn sample_covariance(obs: &ObservationMatrix) -> Result<CovarianceMatrix> {
    let n_obs = obs.n_obs();
    if n_obs < 2 {
        return Err(Error::DegenerateSample { n_obs, required: 2 });
    }
    let centered = obs.centered();
    let divisor = n_obs - 1;
    let mut matrix = &centered * centered.transpose();
    matrix /= divisor as f64;
    symmetrize(&mut matrix);
    let rank_bound = divisor.min(obs.p());
    Ok(CovarianceMatrix {
        matrix,
        divisor,
        rank_bound,
    })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Eigenvalues of the Beta matrix with the structural zeros and ones removed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrimmedSpectrum {
    /// Ascending eigenvalues strictly inside (0,1).
    pub bulk: Vec<f64>,
    pub zero_count: usize,
    pub one_count: usize,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    /// Largest distance any raw eigenvalue was moved by clamping into [0,1].
    pub clamp_magnitude: f64,
    /// All raw eigenvalues (before clamping), ascending.
    #[serde(skip)]
    pub raw: Vec<f64>,
    pub warnings: Vec<Warning>,
}

impl TrimmedSpectrum {
    /// Assembles a spectrum from raw ascending eigenvalues using the rank-based
    /// split: the `max(0, p-n1)` smallest are zeros, the `max(0, p-n2)` largest
    /// are ones.
    pub fn from_raw(raw: Vec<f64>, n1: usize, n2: usize) -> Result<Self> {
        let p = raw.len();
        if p >= n1 + n2 {
            return Err(Error::DimensionsAssumption { p, n1, n2 });
        }
        Self::with_counts(raw, n1, n2, p.saturating_sub(n1), p.saturating_sub(n2))
    }

    /// As [`TrimmedSpectrum::from_raw`] with explicit structural counts.
    pub fn with_counts(
        mut raw: Vec<f64>,
        n1: usize,
        n2: usize,
        zero_count: usize,
        one_count: usize,
    ) -> Result<Self> {
        let p = raw.len();
        if zero_count + one_count >= p {
            return Err(Error::DimensionsAssumption { p, n1, n2 });
        }
        raw.sort_by(f64::total_cmp);

        let mut clamp_magnitude = 0.0f64;
        let clamped: Vec<f64> = raw
            .iter()
            .map(|&v| {
                let c = v.clamp(0.0, 1.0);
                clamp_magnitude = clamp_magnitude.max((c - v).abs());
                c
            })
            .collect();

        let mut warnings = Vec::new();
        if clamp_magnitude > STRUCTURAL_TOLERANCE {
            warnings.push(Warning::EigenvalueClamped {
                magnitude: clamp_magnitude,
            });
        }
        for (index, &value) in clamped.iter().enumerate().take(zero_count) {
            if value > STRUCTURAL_TOLERANCE {
                warnings.push(Warning::StructuralEigenvalue {
                    expected: 0.0,
                    index,
                    value,
                });
            }
        }
        for (index, &value) in clamped.iter().enumerate().skip(p - one_count) {
            if value < 1.0 - STRUCTURAL_TOLERANCE {
                warnings.push(Warning::StructuralEigenvalue {
                    expected: 1.0,
                    index,
                    value,
                });
            }
        }

        let bulk = clamped[zero_count..p - one_count].to_vec();
        if let Some((i, &v)) = bulk
            .iter()
            .enumerate()
            .find(|(_, &v)| v <= 0.0 || v >= 1.0)
        {
            return Err(Error::SpectrumIntegrity {
                index: zero_count + i,
                value: v,
            });
        }

        Ok(Self {
            bulk,
            zero_count,
            one_count,
            p,
            n1,
            n2,
            clamp_magnitude,
            raw,
            warnings,
        })
    }
}

/// Cholesky factor of a symmetric positive definite matrix, rejecting pivots
/// below `SINGULAR_POOLED_RTOL` times the largest diagonal entry.
pub(crate) fn checked_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norm = m.diagonal().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::SingularPooled { pivot: 0.0, norm })?;
    let l = chol.unpack();
    let min_pivot = l
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v * v));
    if !(min_pivot >= SINGULAR_POOLED_RTOL * norm) {
        return Err(Error::SingularPooled {
            pivot: min_pivot,
            norm,
        });
    }
    Ok(l)
}

/// Raw ascending eigenvalues of `a v = λ b v` for symmetric `a` and SPD `b`.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = checked_cholesky(b)?;
    // C = L^{-1} A L^{-T}
    let x = l
        .solve_lower_triangular(a)
        .ok_or(Error::SingularPooled { pivot: 0.0, norm: 0.0 })?;
    let mut c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::SingularPooled { pivot: 0.0, norm: 0.0 })?;
    symmetrize(&mut c);
    let mut ev: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn beta_spectrum(
    s1: &CovarianceMatrix,
    s2: &CovarianceMatrix,
    n1: usize,
    n2: usize,
) -> Result<TrimmedSpectrum> {
    if s1.p() != s2.p() {
        return Err(Error::DimensionMismatch {
            what: "S1 vs S2 dimension",
            left: s1.p(),
            right: s2.p(),
        });
    }
    let p = s1.p();
    // structural multiplicities follow from the rank bounds of the two parts
    let zero_count = p - s1.rank_bound().min(p);
    let one_count = p - s2.rank_bound().min(p);
    if zero_count + one_count >= p {
        return Err(Error::DimensionsAssumption { p, n1, n2 });
    }
    let a = s1.matrix() * n1 as f64;
    let pooled = &a + s2.matrix() * n2 as f64;
    let raw = generalized_eigenvalues(&a, &pooled)?;
    TrimmedSpectrum::with_counts(raw, n1, n2, zero_count, one_count)
}

/// Trimmed spectrum straight from the observations.
///
/// Rather than forming `n1*S1 + n2*S2`, the centered observations of both
/// samples are stacked into `Z' = [Z1'; Z2']` and factored as `Z' = QR`. Then
/// `R'R` is the pooled matrix and the eigenvalues of `B` are those of
/// `Q1'Q1`, where `Q1` holds the rows of `Q` belonging to sample 1. This
/// avoids squaring the condition number of the data, which keeps the
/// statistics invariant under badly conditioned affine maps.
pub fn spectrum_of(obs1: &ObservationMatrix, obs2: &ObservationMatrix) -> Result<TrimmedSpectrum> {
    if obs1.p() != obs2.p() {
        return Err(Error::DimensionMismatch {
            what: "sample dimensions",
            left: obs1.p(),
            right: obs2.p(),
        });
    }
    let p = obs1.p();
    let (n1, n2) = (obs1.dof(), obs2.dof());
    if p >= n1 + n2 {
        return Err(Error::DimensionsAssumption { p, n1, n2 });
    }
    for obs in [obs1, obs2] {
        if obs.n_obs() < 2 {
            return Err(Error::DegenerateSample {
                n_obs: obs.n_obs(),
                required: 2,
            });
        }
    }
    let (m1, m2) = (obs1.n_obs(), obs2.n_obs());
    let mut stacked = DMatrix::zeros(m1 + m2, p);
    stacked.rows_mut(0, m1).copy_from(&obs1.centered().transpose());
    stacked.rows_mut(m1, m2).copy_from(&obs2.centered().transpose());
    let norm = stacked
        .column_iter()
        .fold(0.0f64, |a, c| a.max(c.norm_squared()));

    let qr = stacked.qr();
    let min_pivot = qr
        .r()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v * v));
    if !(min_pivot >= SINGULAR_POOLED_RTOL * norm) {
        return Err(Error::SingularPooled {
            pivot: min_pivot,
            norm,
        });
    }
    let q = qr.q();
    let top = q.rows(0, m1);
    let mut c = top.transpose() * top;
    symmetrize(&mut c);
    let mut raw: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    raw.sort_by(f64::total_cmp);
    TrimmedSpectrum::with_counts(raw, n1, n2, p - n1.min(p), p - n2.min(p))
}

/// Symmetric PSD square root via eigendecomposition.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let mut out = q * d * q.transpose();
    symmetrize(&mut out);
    out
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

    fn cov(m: DMatrix<f64>, divisor: usize) -> CovarianceMatrix {
        CovarianceMatrix::explicit(m, divisor).unwrap()
    }

    #[test]
    fn two_point_covariance() {
        let obs = ObservationMatrix::from_column_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]).unwrap();
        let s = sample_covariance(&obs).unwrap();
        assert_eq!(s.divisor(), 1);
        assert_eq!(s.matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn covariance_matches_pairwise_double_loop() {
        let obs = gaussian(3, 5, 11);
        let s = sample_covariance(&obs).unwrap();
        // (1/(2N(N-1))) Σ_{i,j} (z_i - z_j)(z_i - z_j)' equals the unbiased covariance
        let z = obs.data();
        let n = z.ncols();
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += (z[(a, i)] - z[(a, j)]) * (z[(b, i)] - z[(b, j)]);
                    }
                }
                let brute = acc / (2.0 * (n * (n - 1)) as f64);
                assert!((s.matrix()[(a, b)] - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_observation_rejected() {
        let err = ObservationMatrix::from_column_slice(2, 1, &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample { n_obs: 1, .. }));
    }

    #[test]
    fn non_finite_rejected() {
        let err = ObservationMatrix::from_column_slice(1, 2, &[1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn commuting_diagonal_case() {
        let s1 = cov(DMatrix::identity(2, 2), 1);
        let s2 = cov(DMatrix::identity(2, 2) * 3.0, 1);
        let spec = beta_spectrum(&s1, &s2, 1, 1).unwrap();
        assert_eq!((spec.zero_count, spec.one_count), (0, 0));
        for v in &spec.bulk {
            assert!((v - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_matches_quadratic_formula() {
        // det(A - λ(A + I)) = 0 with A = [[2,1],[1,1]]
        // => (1-λ)^2 det(A) - λ(1-λ) tr(A) + λ^2 = 0
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let spec = beta_spectrum(&cov(a.clone(), 1), &cov(DMatrix::identity(2, 2), 1), 1, 1)
            .unwrap();
        let (det, tr) = (a.determinant(), a.trace());
        // collect as α λ^2 + β λ + γ
        let alpha = det + tr + 1.0;
        let beta = -2.0 * det - tr;
        let gamma = det;
        let disc = (beta * beta - 4.0 * alpha * gamma).sqrt();
        let mut roots = [(-beta - disc) / (2.0 * alpha), (-beta + disc) / (2.0 * alpha)];
        roots.sort_by(f64::total_cmp);
        for (got, want) in spec.bulk.iter().zip(roots) {
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn structural_counts_in_high_dimension() {
        let spec = spectrum_of(&gaussian(40, 26, 1), &gaussian(40, 36, 2)).unwrap();
        assert_eq!(spec.zero_count, 15);
        assert_eq!(spec.one_count, 5);
        assert_eq!(spec.bulk.len(), 20);
        assert!(spec.raw[..15].iter().all(|v| v.abs() < 1e-8));
        assert!(spec.raw[35..].iter().all(|v| (1.0 - v).abs() < 1e-8));
        assert!(spec.warnings.is_empty());
    }

    #[test]
    fn swapping_samples_complements_bulk() {
        let (x, y) = (gaussian(12, 9, 3), gaussian(12, 15, 4));
        let a = spectrum_of(&x, &y).unwrap();
        let b = spectrum_of(&y, &x).unwrap();
        let mut flipped: Vec<f64> = b.bulk.iter().map(|v| 1.0 - v).collect();
        flipped.sort_by(f64::total_cmp);
        assert_eq!(a.bulk.len(), flipped.len());
        for (u, v) in a.bulk.iter().zip(&flipped) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalue_sum_equals_trace_of_beta_matrix() {
        let (x, y) = (gaussian(6, 20, 5), gaussian(6, 25, 6));
        let s1 = sample_covariance(&x).unwrap();
        let s2 = sample_covariance(&y).unwrap();
        let spec = beta_spectrum(&s1, &s2, 19, 24).unwrap();
        let a = s1.scatter();
        let pooled = &a + s2.scatter();
        let b = &a * pooled.try_inverse().unwrap();
        let sum: f64 = spec.raw.iter().sum();
        assert!((sum - b.trace()).abs() < 1e-8 * b.trace().abs());
    }

    #[test]
    fn pooled_singularity_detected() {
        let x = gaussian(10, 4, 7);
        let y = gaussian(10, 4, 8);
        let s1 = sample_covariance(&x).unwrap();
        let s2 = sample_covariance(&y).unwrap();
        // bypass the dimension guard to reach the factorization check
        let a = s1.scatter();
        let pooled = &a + s2.scatter();
        assert!(matches!(
            generalized_eigenvalues(&a, &pooled),
            Err(Error::SingularPooled { .. })
        ));
        assert!(matches!(
            beta_spectrum(&s1, &s2, 3, 3),
            Err(Error::DimensionsAssumption { .. })
        ));
    }

    #[test]
    fn affine_map_preserves_spectrum() {
        let (x, y) = (gaussian(8, 12, 9), gaussian(8, 14, 10));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = DMatrix::from_fn(8, 8, |i, j| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g + if i == j { 3.0 } else { 0.0 }
        });
        let b = DVector::from_fn(8, |i, _| i as f64 - 2.0);
        let base = spectrum_of(&x, &y).unwrap();
        let moved = spectrum_of(&x.affine(&a, &b).unwrap(), &y.affine(&a, &b).unwrap()).unwrap();
        for (u, v) in base.bulk.iter().zip(&moved.bulk) {
            assert!((u - v).abs() <= 1e-8 * u.abs());
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
        let r = symmetric_sqrt(&m);
        assert!((&r * &r - &m).abs().max() < 1e-12);
    }
}
