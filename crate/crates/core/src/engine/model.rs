//! Dispersive Hamiltonian and the thermal cavity dissipators.

use alloc::string::String;
use alloc::vec::Vec;

use super::hilbert::HilbertConfig;
use super::operator::{Operator, C64};
use crate::device::{thermal_occupation, DissipationSource};
use crate::error::{invalid, Result};

/// Angular rates entering the dispersive Hamiltonian [rad/s].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemRates {
    pub omega_cavity: f64,
    pub omega_qubit: f64,
    pub chi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Frame {
    Lab,
    /// Rotating at ω_c for the cavity and ω01 for the qubit.
    #[default]
    DoublyRotating,
}

/// H/ħ = ω_c a†a − (ω01/2)σz − χ a†a σz in the lab frame; only the
/// −χ a†a σz term survives in the doubly rotating frame. Every term is
/// diagonal in the number/σz basis, so both frames are exact.
pub fn build_hamiltonian(
    rates: &SystemRates,
    hilbert: &HilbertConfig,
    frame: Frame,
) -> Result<Operator> {
    if !(rates.chi.is_finite() && rates.omega_cavity.is_finite() && rates.omega_qubit.is_finite()) {
        return Err(invalid("Hamiltonian rates must be finite"));
    }
    let n = hilbert.fock_cutoff();
    let mut diag = Vec::with_capacity(hilbert.dim());
    for q in 0..HilbertConfig::QUBIT_LEVELS {
        let sz = if q == 0 { 1.0 } else { -1.0 };
        for photons in 0..n {
            let np = photons as f64;
            let mut e = -rates.chi * np * sz;
            if frame == Frame::Lab {
                e += rates.omega_cavity * np - 0.5 * rates.omega_qubit * sz;
            }
            diag.push(C64::new(e, 0.0));
        }
    }
    Ok(Operator::from_diagonal(&diag))
}

/// −(δ/2)σz, added to the rotating-frame Hamiltonian to move into a frame
/// detuned by `detuning_rad_s` from the qubit.
pub fn qubit_detuning_term(detuning_rad_s: f64, hilbert: &HilbertConfig) -> Operator {
    hilbert
        .sigma_z()
        .scale(C64::new(-0.5 * detuning_rad_s, 0.0))
}

/// Collapse operator L with rate γ contributing γ·D[L]ρ.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladTerm {
    pub label: String,
    pub collapse: Operator,
    pub rate: f64,
}

impl LindbladTerm {
    pub fn new(label: impl Into<String>, collapse: Operator, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(invalid("Lindblad rate must be finite and >= 0"));
        }
        Ok(Self {
            label: label.into(),
            collapse,
            rate,
        })
    }
}

/// Thermal damping pairs (κ_j(n_j+1), a) and (κ_j n_j, a†) for each source,
/// with `a` supplied by the caller so that this works on the bare cavity as
/// well as on the joint space. Zero-rate terms are dropped.
pub fn cavity_terms(
    sources: &[DissipationSource],
    f_occupation_hz: f64,
    a: &Operator,
) -> Result<Vec<LindbladTerm>> {
    let a_dag = a.dagger();
    let mut terms = Vec::new();
    for source in sources {
        source.validate()?;
        let n_th = thermal_occupation(f_occupation_hz, source.temperature_k)?;
        let down = source.kappa_rad_s * (n_th + 1.0);
        let up = source.kappa_rad_s * n_th;
        if down > 0.0 {
            terms.push(LindbladTerm::new(
                alloc::format!("{}:loss", source.label),
                a.clone(),
                down,
            )?);
        }
        if up > 0.0 {
            terms.push(LindbladTerm::new(
                alloc::format!("{}:gain", source.label),
                a_dag.clone(),
                up,
            )?);
        }
    }
    Ok(terms)
}

/// All dissipators of the joint system: the cavity channels of every source,
/// then (γ1, σ−) and (γφ/2, σz) when those rates are nonzero.
///
/// `f_occupation_hz` is the frequency used in the Bose factor of every
/// source; callers normally pass the cavity frequency.
pub fn build_dissipators(
    sources: &[DissipationSource],
    f_occupation_hz: f64,
    gamma1: f64,
    gamma_phi: f64,
    hilbert: &HilbertConfig,
) -> Result<Vec<LindbladTerm>> {
    if !(gamma1.is_finite() && gamma1 >= 0.0 && gamma_phi.is_finite() && gamma_phi >= 0.0) {
        return Err(invalid("qubit rates must be finite and >= 0"));
    }
    let mut terms = cavity_terms(sources, f_occupation_hz, &hilbert.a())?;
    if gamma1 > 0.0 {
        terms.push(LindbladTerm::new(
            "qubit:relaxation",
            hilbert.sigma_minus(),
            gamma1,
        )?);
    }
    if gamma_phi > 0.0 {
        terms.push(LindbladTerm::new(
            "qubit:dephasing",
            hilbert.sigma_z(),
            0.5 * gamma_phi,
        )?);
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::operator::ZERO;

    #[test]
    fn lab_frame_diagonal_n2() {
        let h = HilbertConfig::new(2).unwrap();
        let rates = SystemRates {
            omega_cavity: 7.0,
            omega_qubit: 3.0,
            chi: 0.25,
        };
        let ham = build_hamiltonian(&rates, &h, Frame::Lab).unwrap();
        // independent expansion of ω_c a†a − (ω01/2)σz − χ a†aσz from the
        // operator builders
        let expanded = &(&h.number().scale(C64::new(rates.omega_cavity, 0.0))
            - &h.sigma_z().scale(C64::new(0.5 * rates.omega_qubit, 0.0)))
            - &h.number()
                .matmul(&h.sigma_z())
                .unwrap()
                .scale(C64::new(rates.chi, 0.0));
        assert!(ham.max_abs_diff(&expanded) < 1e-14);
        let diag: Vec<f64> = (0..4).map(|i| ham[(i, i)].re).collect();
        assert_eq!(diag, [-1.5, 7.0 - 1.5 - 0.25, 1.5, 7.0 + 1.5 + 0.25]);
        assert_eq!(ham.dagger(), ham);
    }

    #[test]
    fn rotating_frame() {
        let h = HilbertConfig::new(4).unwrap();
        let zero = SystemRates {
            omega_cavity: 10.0,
            omega_qubit: 5.0,
            chi: 0.0,
        };
        let ham = build_hamiltonian(&zero, &h, Frame::DoublyRotating).unwrap();
        assert!(ham.as_slice().iter().all(|&z| z == ZERO));
    }

    #[test]
    fn dissipator_counts() {
        let h = HilbertConfig::new(4).unwrap();
        let cold = DissipationSource::new("walls", 1e6, 0.0).unwrap();
        let terms = build_dissipators(core::slice::from_ref(&cold), 12e9, 0.0, 0.0, &h).unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].rate, 1e6);
        assert_eq!(terms[0].collapse, h.a());

        let hot = DissipationSource::new("line", 3e5, 0.08).unwrap();
        let terms = build_dissipators(&[cold, hot.clone()], 12e9, 0.0, 0.0, &h).unwrap();
        assert_eq!(terms.len(), 3);
        let n = thermal_occupation(12e9, 0.08).unwrap();
        assert_eq!(terms[1].rate, 3e5 * (n + 1.0));
        assert_eq!(terms[2].rate, 3e5 * n);
        assert_eq!(terms[2].collapse, h.a_dag());

        let two_hot = build_dissipators(&[hot.clone(), hot], 12e9, 0.0, 0.0, &h).unwrap();
        assert_eq!(two_hot.len(), 4);

        let qubit = build_dissipators(&[], 12e9, 1.0 / 70e-6, 2e3, &h).unwrap();
        assert_eq!(qubit.len(), 2);
        assert_eq!(qubit[0].collapse, h.sigma_minus());
        assert_eq!(qubit[1].rate, 1e3);
    }

    #[test]
    fn negative_rates_rejected() {
        let h = HilbertConfig::new(3).unwrap();
        assert!(build_dissipators(&[], 1e9, -1.0, 0.0, &h).is_err());
        let bad = DissipationSource {
            label: "x".into(),
            kappa_rad_s: -1.0,
            temperature_k: 0.0,
            port: Default::default(),
        };
        assert!(build_dissipators(&[bad], 1e9, 0.0, 0.0, &h).is_err());
        assert!(LindbladTerm::new("x", h.a(), -2.0).is_err());
    }
}
