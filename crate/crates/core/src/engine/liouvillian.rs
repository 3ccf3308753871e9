//! The master-equation generator, both as a dense right-hand side and as a
//! precompiled sparse superoperator.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::model::LindbladTerm;
use super::operator::{check_dims, DensityMatrix, Operator, C64, I, ZERO};
use crate::error::Result;

/// D[L]ρ = (2LρL† − L†Lρ − ρL†L)/2.
pub fn dissipator(collapse: &Operator, rho: &Operator) -> Result<Operator> {
    let l_dag = collapse.dagger();
    let jump = collapse.matmul(rho)?.matmul(&l_dag)?;
    let ldl = l_dag.matmul(collapse)?;
    let anti = &ldl.matmul(rho)? + &rho.matmul(&ldl)?;
    Ok(&jump - &anti.scale(C64::new(0.5, 0.0)))
}

/// dρ/dt = −i[H, ρ] + Σ γ_k D[L_k]ρ with H already divided by ħ.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    hamiltonian: &Operator,
    terms: &[LindbladTerm],
) -> Result<Operator> {
    let rho = rho.as_operator();
    check_dims(hamiltonian.dim(), rho.dim())?;
    let mut out = hamiltonian.commutator(rho)?.scale(-I);
    for term in terms {
        check_dims(term.collapse.dim(), rho.dim())?;
        if term.rate == 0.0 {
            continue;
        }
        let d = dissipator(&term.collapse, rho)?;
        out = &out + &(&d * term.rate);
    }
    Ok(out)
}

/// Sparse superoperator acting on row-major vec(ρ), index `i * dim + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Liouvillian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Liouvillian {
    pub fn new(hamiltonian: &Operator, terms: &[LindbladTerm]) -> Result<Self> {
        let d = hamiltonian.dim();
        for term in terms {
            check_dims(d, term.collapse.dim())?;
        }
        let ident = Operator::identity(d);
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); d * d];
        let mut sandwich = |left: &Operator, right: &Operator| {
            // out_ij += Σ_kl left_ik ρ_kl right_lj
            for (i, k, a) in left.nonzeros() {
                for (l, j, b) in right.nonzeros() {
                    rows[i * d + j].push((k * d + l, a * b));
                }
            }
        };
        sandwich(&hamiltonian.scale(-I), &ident);
        sandwich(&ident, &hamiltonian.scale(I));
        for term in terms {
            if term.rate == 0.0 {
                continue;
            }
            let l = &term.collapse;
            let l_dag = l.dagger();
            let half_ldl = l_dag.matmul(l)?.scale(C64::new(-0.5 * term.rate, 0.0));
            sandwich(&l.scale(C64::new(term.rate, 0.0)), &l_dag);
            sandwich(&half_ldl, &ident);
            sandwich(&ident, &half_ldl);
        }

        let mut row_ptr = Vec::with_capacity(d * d + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != ZERO {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            dim: d,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Hilbert-space dimension (the superoperator is `dim² × dim²`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// out = L · x.
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim * self.dim);
        for (r, slot) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = ZERO;
            for k in lo..hi {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *slot = acc;
        }
    }

    pub fn apply_to(&self, rho: &Operator) -> Result<Operator> {
        check_dims(self.dim, rho.dim())?;
        let mut out = vec![ZERO; self.dim * self.dim];
        self.apply(rho.as_slice(), &mut out);
        Operator::from_row_major(self.dim, out)
    }

    pub(crate) fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim * self.dim;
        let mut m = DMatrix::from_element(n, n, ZERO);
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::hilbert::HilbertConfig;
    use crate::engine::model::{build_hamiltonian, Frame, SystemRates};
    use proptest::prelude::*;

    fn thermal_terms(h: &HilbertConfig, kappa: f64, n_th: f64) -> Vec<LindbladTerm> {
        alloc::vec![
            LindbladTerm::new("loss", h.a(), kappa * (n_th + 1.0)).unwrap(),
            LindbladTerm::new("gain", h.a_dag(), kappa * n_th).unwrap(),
        ]
    }

    fn fock_state(h: &HilbertConfig, qubit: usize, photons: usize) -> DensityMatrix {
        let mut psi = vec![ZERO; h.dim()];
        psi[h.index(qubit, photons)] = C64::new(1.0, 0.0);
        DensityMatrix::pure(&psi).unwrap()
    }

    #[test]
    fn identity_state_is_stationary_without_dissipation() {
        let h = HilbertConfig::new(4).unwrap();
        let rates = SystemRates {
            omega_cavity: 3.0,
            omega_qubit: 2.0,
            chi: 0.4,
        };
        let ham = build_hamiltonian(&rates, &h, Frame::Lab).unwrap();
        let rho = DensityMatrix::maximally_mixed(h.dim());
        let d = lindblad_rhs(&rho, &ham, &[]).unwrap();
        assert_eq!(d.norm(), 0.0);
    }

    #[test]
    fn single_photon_loss_rate() {
        let h = HilbertConfig::new(4).unwrap();
        let kappa = 2.5;
        let terms = [LindbladTerm::new("loss", h.a(), kappa).unwrap()];
        let rho = fock_state(&h, 0, 1);
        let d = lindblad_rhs(&rho, &Operator::zeros(h.dim()), &terms).unwrap();
        let dn = h.number().trace_product(&d).unwrap();
        assert!((dn.re + kappa).abs() < 1e-14);
    }

    #[test]
    fn thermal_relaxation_toward_occupation() {
        let h = HilbertConfig::new(8).unwrap();
        let (kappa, n_th) = (1.7, 0.1);
        let terms = thermal_terms(&h, kappa, n_th);
        for photons in [0usize, 1, 2] {
            let rho = fock_state(&h, 1, photons);
            let d = lindblad_rhs(&rho, &Operator::zeros(h.dim()), &terms).unwrap();
            let dn = h.number().trace_product(&d).unwrap().re;
            let expected = -kappa * (photons as f64 - n_th);
            assert!((dn - expected).abs() < 1e-13, "{dn} vs {expected}");
        }
    }

    #[test]
    fn dissipator_is_phase_invariant() {
        let h = HilbertConfig::new(5).unwrap();
        let rho = mixed_state(&h, 3);
        let rotated = h.a().scale(C64::from_polar(1.0, 0.83));
        let d1 = dissipator(&h.a(), rho.as_operator()).unwrap();
        let d2 = dissipator(&rotated, rho.as_operator()).unwrap();
        assert!(d1.max_abs_diff(&d2) < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let h = HilbertConfig::new(3).unwrap();
        let rho = DensityMatrix::maximally_mixed(4);
        assert!(lindblad_rhs(&rho, &Operator::zeros(h.dim()), &[]).is_err());
    }

    /// A generic full-rank state built from a deterministic pseudo-random matrix.
    fn mixed_state(h: &HilbertConfig, seed: u64) -> DensityMatrix {
        let n = h.dim();
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut m = Operator::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = C64::new(next(), next());
            }
        }
        let p = m.matmul(&m.dagger()).unwrap();
        let tr = p.trace().re;
        DensityMatrix::new(&p * (1.0 / tr)).unwrap()
    }

    proptest! {
        #[test]
        fn sparse_superoperator_matches_dense_rhs(
            seed in 1u64..10_000,
            chi in -2.0f64..2.0,
            kappa in 0.0f64..3.0,
            n_th in 0.0f64..0.5,
            gamma1 in 0.0f64..1.0,
        ) {
            let h = HilbertConfig::new(4).unwrap();
            let rho = mixed_state(&h, seed);
            let rates = SystemRates { omega_cavity: 5.0, omega_qubit: 3.0, chi };
            let ham = build_hamiltonian(&rates, &h, Frame::Lab).unwrap();
            let mut terms = thermal_terms(&h, kappa, n_th);
            terms.push(LindbladTerm::new("t1", h.sigma_minus(), gamma1).unwrap());
            terms.push(LindbladTerm::new("phi", h.sigma_z(), 0.3).unwrap());
            let dense = lindblad_rhs(&rho, &ham, &terms).unwrap();
            let sparse = Liouvillian::new(&ham, &terms).unwrap().apply_to(rho.as_operator()).unwrap();
            prop_assert!(dense.max_abs_diff(&sparse) < 1e-12);
            prop_assert!(dense.trace().norm() <= 1e-12 * rho.as_operator().norm());
            prop_assert!(dense.hermiticity_error() < 1e-12);
        }
    }
}
