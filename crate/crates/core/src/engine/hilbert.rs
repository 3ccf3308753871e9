//! Truncated qubit ⊗ cavity Hilbert space.
//!
//! Basis ordering is qubit ⊗ cavity with the qubit as the slow index, so for
//! cutoff N the state |q, n⟩ sits at index `q * N + n`. Qubit index 0 is |g⟩
//! and 1 is |e⟩, with σz|g⟩ = +|g⟩.

#[allow(unused_imports)]
use num_traits::Float;

use super::operator::{Operator, C64, I, ONE};
use crate::error::{invalid, Result};

/// Tail mass Σ_{n≥N} p_n allowed by [`fock_cutoff_for_occupation`].
pub const CUTOFF_TAIL_TOLERANCE: f64 = 1e-10;
/// Smallest cutoff the rule will pick.
pub const MIN_AUTO_CUTOFF: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertConfig {
    fock_cutoff: usize,
}

impl HilbertConfig {
    pub const QUBIT_LEVELS: usize = 2;

    pub fn new(fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff < 2 {
            return Err(invalid("fock_cutoff must be >= 2"));
        }
        Ok(Self { fock_cutoff })
    }

    /// Cutoff chosen by [`fock_cutoff_for_occupation`].
    pub fn for_occupation(n_th: f64) -> Result<Self> {
        Self::new(fock_cutoff_for_occupation(n_th)?)
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn dim(&self) -> usize {
        Self::QUBIT_LEVELS * self.fock_cutoff
    }

    /// Same space with `extra` more Fock levels.
    pub fn enlarged(&self, extra: usize) -> Self {
        Self {
            fock_cutoff: self.fock_cutoff + extra,
        }
    }

    pub fn index(&self, qubit: usize, photons: usize) -> usize {
        qubit * self.fock_cutoff + photons
    }

    pub fn cavity_identity(&self) -> Operator {
        Operator::identity(self.fock_cutoff)
    }

    pub fn qubit_identity(&self) -> Operator {
        Operator::identity(Self::QUBIT_LEVELS)
    }

    fn on_cavity(&self, op: &Operator) -> Operator {
        self.qubit_identity().kron(op)
    }

    fn on_qubit(&self, op: &Operator) -> Operator {
        op.kron(&self.cavity_identity())
    }

    pub fn identity(&self) -> Operator {
        Operator::identity(self.dim())
    }

    /// Cavity annihilation a.
    pub fn a(&self) -> Operator {
        self.on_cavity(&annihilation(self.fock_cutoff))
    }

    pub fn a_dag(&self) -> Operator {
        self.a().dagger()
    }

    /// a†a.
    pub fn number(&self) -> Operator {
        self.on_cavity(&number(self.fock_cutoff))
    }

    pub fn sigma_z(&self) -> Operator {
        self.on_qubit(&pauli_z())
    }

    pub fn sigma_x(&self) -> Operator {
        self.on_qubit(&pauli_x())
    }

    pub fn sigma_y(&self) -> Operator {
        self.on_qubit(&pauli_y())
    }

    /// σ− = |g⟩⟨e|.
    pub fn sigma_minus(&self) -> Operator {
        self.on_qubit(&lowering())
    }

    /// |e⟩⟨e|.
    pub fn excited_projector(&self) -> Operator {
        let mut p = Operator::zeros(2);
        p[(1, 1)] = ONE;
        self.on_qubit(&p)
    }
}

/// Fock-space annihilation operator on `n` levels.
pub fn annihilation(n: usize) -> Operator {
    let mut a = Operator::zeros(n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// Fock-space number operator on `n` levels.
pub fn number(n: usize) -> Operator {
    let diag: alloc::vec::Vec<C64> = (0..n).map(|k| C64::new(k as f64, 0.0)).collect();
    Operator::from_diagonal(&diag)
}

pub fn pauli_z() -> Operator {
    Operator::from_diagonal(&[ONE, -ONE])
}

pub fn pauli_x() -> Operator {
    let mut x = Operator::zeros(2);
    x[(0, 1)] = ONE;
    x[(1, 0)] = ONE;
    x
}

pub fn pauli_y() -> Operator {
    let mut y = Operator::zeros(2);
    y[(0, 1)] = -I;
    y[(1, 0)] = I;
    y
}

/// |g⟩⟨e|.
pub fn lowering() -> Operator {
    let mut s = Operator::zeros(2);
    s[(0, 1)] = ONE;
    s
}

/// Smallest N ≥ 4 with Bose–Einstein tail (n/(1+n))^N below 1e-10.
pub fn fock_cutoff_for_occupation(n_th: f64) -> Result<usize> {
    if !(n_th.is_finite() && n_th >= 0.0) {
        return Err(invalid("occupation must be finite and >= 0"));
    }
    if n_th == 0.0 {
        return Ok(MIN_AUTO_CUTOFF);
    }
    let ratio = n_th / (1.0 + n_th);
    let mut n = MIN_AUTO_CUTOFF;
    while ratio.powi(n as i32) >= CUTOFF_TAIL_TOLERANCE {
        n += 1;
        if n > 10_000 {
            return Err(invalid("occupation too large for a dense Fock truncation"));
        }
    }
    Ok(n)
}
