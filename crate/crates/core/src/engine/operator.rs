//! Dense complex operators and density matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
// shadowed by the inherent methods whenever std ends up in the build graph
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op[(i, i)] = ONE;
        }
        op
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            op[(i, i)] = d;
        }
        op
    }

    /// Builds from row-major entries; `entries.len()` must be a perfect square.
    pub fn from_row_major(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(invalid("operator entries must be finite"));
        }
        Ok(Self { dim, entries })
    }

    /// |ψ⟩⟨ψ|.
    pub fn projector(state: &[C64]) -> Self {
        let dim = state.len();
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                op[(i, j)] = state[i] * state[j].conj();
            }
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.entries
    }

    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &Operator) -> Result<C64> {
        check_dims(self.dim, other.dim)?;
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        Ok(acc)
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        check_dims(self.dim, other.dim)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        Ok(&self.matmul(other)? - &other.matmul(self)?)
    }

    /// Tensor product self ⊗ other; `self` is the slow index.
    pub fn kron(&self, other: &Operator) -> Operator {
        let (p, q) = (self.dim, other.dim);
        let n = p * q;
        let mut out = Self::zeros(n);
        for i in 0..p {
            for j in 0..p {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..q {
                    for l in 0..q {
                        out.entries[(i * q + k) * n + (j * q + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// max |A_ij − conj(A_ji)|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let n = self.dim;
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, z)| **z != ZERO)
            .map(move |(k, &z)| (k / n, k % n, z))
    }

    pub fn is_diagonal(&self) -> bool {
        self.nonzeros().all(|(i, j, _)| i == j)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        Operator {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        Operator {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(C64::new(rhs, 0.0))
    }
}

/// Hermitian, unit-trace operator.
///
/// Construction checks Hermiticity to 1e-10 and trace to 1e-9. Positivity is
/// checked on demand by [`DensityMatrix::min_eigenvalue`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-9;
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        let herm = op.hermiticity_error();
        if herm > HERMITICITY_TOLERANCE {
            return Err(invalid(alloc::format!(
                "density matrix is not Hermitian (max asymmetry {herm:e})"
            )));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > TRACE_TOLERANCE {
            return Err(invalid(alloc::format!(
                "density matrix trace is {} + {}i, expected 1",
                tr.re,
                tr.im
            )));
        }
        Ok(Self(op))
    }

    /// Skips validation; used for integrator output whose invariants are
    /// tracked separately.
    pub(crate) fn new_unchecked(op: Operator) -> Self {
        Self(op)
    }

    pub fn pure(state: &[C64]) -> Result<Self> {
        Self::new(Operator::projector(state))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self((&Operator::identity(dim)) * (1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.0.kron(&other.0))
    }

    /// |Tr ρ − 1|.
    pub fn trace_error(&self) -> f64 {
        (self.0.trace() - ONE).norm()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.0.hermiticity_error()
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        self.0
            .trace_product(&self.0)
            .map(|z| z.re)
            .unwrap_or(f64::NAN)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.0.to_nalgebra();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue() >= -POSITIVITY_TOLERANCE
    }

    /// Tr(obs · ρ).
    pub fn expectation(&self, obs: &Operator) -> Result<C64> {
        expectation(self, obs)
    }
}

/// Tr(obs · ρ). For Hermitian `obs` the imaginary part is roundoff and stays
/// in the returned value for inspection.
pub fn expectation(rho: &DensityMatrix, obs: &Operator) -> Result<C64> {
    obs.trace_product(rho.as_operator())
}
