//! Stationary states from a direct solve on the vectorized Liouvillian.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::liouvillian::Liouvillian;
use super::model::LindbladTerm;
use super::operator::{DensityMatrix, Operator, C64, ONE, ZERO};
use crate::error::{invalid, Error, Result};

/// Relative size of an R-diagonal entry, in the column-pivoted QR of the
/// Liouvillian, below which it counts toward the null space.
pub const NULL_SPACE_TOLERANCE: f64 = 1e-8;

/// The unique ρ with Lρ = 0 and Tr ρ = 1.
///
/// Fails with [`Error::AmbiguousSteadyState`] when the null space of the
/// Liouvillian is more than one-dimensional, e.g. when the qubit has only
/// dispersive coupling and no relaxation channel.
pub fn steady_state(hamiltonian: &Operator, terms: &[LindbladTerm]) -> Result<DensityMatrix> {
    if !terms.iter().any(|t| t.rate > 0.0) {
        return Err(invalid(
            "steady state needs at least one dissipator with positive rate",
        ));
    }
    let generator = Liouvillian::new(hamiltonian, terms)?;
    steady_state_of(&generator)
}

pub fn steady_state_of(generator: &Liouvillian) -> Result<DensityMatrix> {
    let d = generator.dim();
    let n = d * d;
    let mut lmat = generator.to_dense();
    let scale = lmat.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::AmbiguousSteadyState { null_dimension: n });
    }
    lmat.scale_mut(1.0 / scale);

    let null_dimension = null_space_dimension(&lmat);
    if null_dimension > 1 {
        return Err(Error::AmbiguousSteadyState { null_dimension });
    }

    // Replace the ρ_00 equation by the trace condition; the trace functional
    // is the left null vector, so this removes exactly one redundant row.
    for col in 0..n {
        lmat[(0, col)] = ZERO;
    }
    for i in 0..d {
        lmat[(0, i * d + i)] = ONE;
    }
    let mut rhs = DVector::from_element(n, ZERO);
    rhs[0] = ONE;
    let x = lmat
        .lu()
        .solve(&rhs)
        .ok_or(Error::AmbiguousSteadyState { null_dimension: 2 })?;

    let entries: Vec<C64> = x.iter().copied().collect();
    let raw = Operator::from_row_major(d, entries)?;
    let herm = (&raw + &raw.dagger()).scale(C64::new(0.5, 0.0));
    let tr = herm.trace().re;
    DensityMatrix::new(&herm * (1.0 / tr))
}

fn null_space_dimension(lmat: &DMatrix<C64>) -> usize {
    let qr = lmat.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].norm())
        .collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    diag.iter()
        .filter(|&&v| v <= NULL_SPACE_TOLERANCE * largest)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::hilbert::{annihilation, number, HilbertConfig};
    use crate::engine::model::{build_hamiltonian, Frame, SystemRates};

    fn bare_thermal_terms(n: usize, kappa: f64, n_th: f64) -> Vec<LindbladTerm> {
        let a = annihilation(n);
        alloc::vec![
            LindbladTerm::new("loss", a.clone(), kappa * (n_th + 1.0)).unwrap(),
            LindbladTerm::new("gain", a.dagger(), kappa * n_th).unwrap(),
        ]
    }

    #[test]
    fn thermal_cavity_occupation() {
        let n_th = 0.05;
        let n = 10;
        let rho = steady_state(&Operator::zeros(n), &bare_thermal_terms(n, 2.0, n_th)).unwrap();
        let occ = rho.expectation(&number(n)).unwrap().re;
        assert!((occ - n_th).abs() < 1e-8);
        // geometric populations p_k ∝ r^k
        let r = n_th / (1.0 + n_th);
        let p0 = rho.as_operator()[(0, 0)].re;
        let p1 = rho.as_operator()[(1, 1)].re;
        assert!((p1 / p0 - r).abs() < 1e-12);
    }

    #[test]
    fn dispersive_qubit_without_relaxation_is_ambiguous() {
        let h = HilbertConfig::new(4).unwrap();
        let rates = SystemRates {
            omega_cavity: 0.0,
            omega_qubit: 0.0,
            chi: 0.3,
        };
        let ham = build_hamiltonian(&rates, &h, Frame::DoublyRotating).unwrap();
        let terms = [LindbladTerm::new("loss", h.a(), 1.0).unwrap()];
        // |g0⟩⟨g0|, |e0⟩⟨e0| and both vacuum coherences are stationary
        assert!(matches!(
            steady_state(&ham, &terms),
            Err(Error::AmbiguousSteadyState { null_dimension: 4 })
        ));
    }

    #[test]
    fn zero_temperature_is_ground_vacuum() {
        let h = HilbertConfig::new(4).unwrap();
        let rates = SystemRates {
            omega_cavity: 0.0,
            omega_qubit: 0.0,
            chi: 0.3,
        };
        let ham = build_hamiltonian(&rates, &h, Frame::DoublyRotating).unwrap();
        let terms = [
            LindbladTerm::new("loss", h.a(), 1.0).unwrap(),
            LindbladTerm::new("t1", h.sigma_minus(), 0.01).unwrap(),
        ];
        let rho = steady_state(&ham, &terms).unwrap();
        let g0 = h.index(0, 0);
        assert!((rho.as_operator()[(g0, g0)] - ONE).norm() < 1e-10);
    }

    #[test]
    fn requires_a_dissipator() {
        assert!(steady_state(&Operator::zeros(2), &[]).is_err());
    }
}
