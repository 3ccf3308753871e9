//! Dense open-system dynamics on the truncated qubit ⊗ cavity space.

pub mod hilbert;
pub mod integrate;
pub mod liouvillian;
pub mod model;
pub mod operator;
pub mod steady;

pub use hilbert::{fock_cutoff_for_occupation, HilbertConfig};
pub use integrate::{evolve, evolve_with, Evolution, EvolveDiagnostics, EvolveOptions, Observable};
pub use liouvillian::{dissipator, lindblad_rhs, Liouvillian};
pub use model::{
    build_dissipators, build_hamiltonian, cavity_terms, qubit_detuning_term, Frame, LindbladTerm,
    SystemRates,
};
pub use operator::{expectation, DensityMatrix, Operator, C64};
pub use steady::steady_state;
