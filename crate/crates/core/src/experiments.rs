//! Simulated T1 and Ramsey experiments and the fits that read coherence
//! times back out of them.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::constants::TAU;
use crate::dephasing::{predict, predict_t2, DephasingInput, DephasingPrediction};
use crate::device::{DeviceParams, DissipationSource};
use crate::engine::hilbert::annihilation;
use crate::engine::model::cavity_terms;
use crate::engine::operator::{ONE, ZERO};
use crate::engine::steady::steady_state;
use crate::engine::{
    build_dissipators, build_hamiltonian, evolve, qubit_detuning_term, DensityMatrix,
    EvolveDiagnostics, EvolveOptions, Frame, HilbertConfig, Observable, Operator, SystemRates, C64,
};
use crate::error::{invalid, Result};
use crate::fit::{fit_decaying_cosine, fit_exponential, FitResult};
use crate::series::TimeSeries;

/// Ramsey fits start at this many cavity lifetimes 1/κ_tot by default.
pub const DEFAULT_WINDOW_CAVITY_LIFETIMES: f64 = 5.0;

/// A device with its cavity baths, ready to simulate.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub device: DeviceParams,
    pub sources: Vec<DissipationSource>,
    /// Explicit truncation; chosen from the hottest bath when `None`.
    pub hilbert: Option<HilbertConfig>,
    /// Frequency in the Bose factor of every bath; the cavity frequency when `None`.
    pub f_occupation_hz: Option<f64>,
}

impl Scenario {
    pub fn new(device: DeviceParams, sources: Vec<DissipationSource>) -> Result<Self> {
        device.validate()?;
        for s in &sources {
            s.validate()?;
        }
        Ok(Self {
            device,
            sources,
            hilbert: None,
            f_occupation_hz: None,
        })
    }

    pub fn with_hilbert(mut self, hilbert: HilbertConfig) -> Self {
        self.hilbert = Some(hilbert);
        self
    }

    pub fn f_occupation_hz(&self) -> f64 {
        self.f_occupation_hz.unwrap_or(self.device.f_cavity_hz)
    }

    pub fn max_occupation(&self) -> Result<f64> {
        let f = self.f_occupation_hz();
        self.sources
            .iter()
            .try_fold(0.0f64, |m, s| Ok(m.max(s.occupation(f)?)))
    }

    pub fn resolved_hilbert(&self) -> Result<HilbertConfig> {
        match self.hilbert {
            Some(h) => Ok(h),
            None => HilbertConfig::for_occupation(self.max_occupation()?),
        }
    }

    /// Σκ_j [rad/s].
    pub fn kappa_tot(&self) -> f64 {
        self.sources.iter().map(|s| s.kappa_rad_s).sum()
    }

    pub fn chi_rad_s(&self) -> Result<f64> {
        Ok(self.device.resolve_chi()?.chi_rad_s)
    }

    /// γ1 = 1/T1 [s⁻¹], zero without an intrinsic T1.
    pub fn gamma1(&self) -> f64 {
        self.device.t1_intrinsic_s.map_or(0.0, |t| 1.0 / t)
    }

    /// Intrinsic γφ = 1/Tφ [s⁻¹].
    pub fn gamma_phi(&self) -> f64 {
        self.device.tphi_intrinsic_s.map_or(0.0, |t| 1.0 / t)
    }

    pub fn dephasing_input(&self) -> Result<DephasingInput> {
        DephasingInput::from_sources(self.chi_rad_s()?, &self.sources, self.f_occupation_hz())
    }

    /// Stationary state of the cavity under its baths alone, on `cutoff`
    /// levels; vacuum when no bath is attached.
    pub fn cavity_thermal_state(&self, cutoff: usize) -> Result<DensityMatrix> {
        let terms = cavity_terms(&self.sources, self.f_occupation_hz(), &annihilation(cutoff))?;
        if terms.is_empty() {
            let mut vac = alloc::vec![ZERO; cutoff];
            vac[0] = ONE;
            return DensityMatrix::pure(&vac);
        }
        steady_state(&Operator::zeros(cutoff), &terms)
    }

    fn system(
        &self,
        extra_detuning_rad_s: f64,
    ) -> Result<(HilbertConfig, Operator, Vec<crate::engine::LindbladTerm>)> {
        let hilbert = self.resolved_hilbert()?;
        let rates = SystemRates {
            omega_cavity: TAU * self.device.f_cavity_hz,
            omega_qubit: TAU * self.device.f_qubit_hz,
            chi: self.chi_rad_s()?,
        };
        let mut ham = build_hamiltonian(&rates, &hilbert, Frame::DoublyRotating)?;
        if extra_detuning_rad_s != 0.0 {
            ham = &ham + &qubit_detuning_term(extra_detuning_rad_s, &hilbert);
        }
        let terms = build_dissipators(
            &self.sources,
            self.f_occupation_hz(),
            self.gamma1(),
            self.gamma_phi(),
            &hilbert,
        )?;
        Ok((hilbert, ham, terms))
    }
}

/// Output of one simulated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub series: TimeSeries,
    pub final_state: DensityMatrix,
    pub diagnostics: EvolveDiagnostics,
    pub hilbert: HilbertConfig,
}

/// Excited qubit ⊗ thermal cavity, free evolution, P_e(t) = (1 − ⟨σz⟩)/2.
pub fn simulate_t1(scenario: &Scenario, opts: &EvolveOptions) -> Result<Simulation> {
    if scenario.device.t1_intrinsic_s.is_none() {
        return Err(invalid("T1 simulation needs device.t1_intrinsic_s"));
    }
    let (hilbert, ham, terms) = scenario.system(0.0)?;
    let qubit = DensityMatrix::pure(&[ZERO, ONE])?;
    let rho0 = qubit.kron(&scenario.cavity_thermal_state(hilbert.fock_cutoff())?);
    let observables = [Observable::new("p_excited", hilbert.excited_projector())];
    let run = evolve(&rho0, &ham, &terms, opts, &observables)?;
    finish(run, hilbert, "t1")
}

/// (|g⟩ + |e⟩)/√2 ⊗ thermal cavity after an ideal π/2 pulse, evolved in a
/// frame detuned by `detuning_hz` from the qubit; records ⟨σx⟩ and ⟨σy⟩.
///
/// Detunings at or above the Nyquist frequency of the sample grid are
/// rejected, since the fringes would alias.
pub fn simulate_ramsey(
    scenario: &Scenario,
    detuning_hz: f64,
    opts: &EvolveOptions,
) -> Result<Simulation> {
    opts.validate()?;
    if !detuning_hz.is_finite() {
        return Err(invalid("detuning must be finite"));
    }
    let nyquist = 0.5 * (opts.sample_count - 1) as f64 / opts.t_final;
    if detuning_hz.abs() >= nyquist {
        return Err(invalid(alloc::format!(
            "detuning {detuning_hz:e} Hz aliases on this grid (Nyquist {nyquist:e} Hz)"
        )));
    }
    let (hilbert, ham, terms) = scenario.system(TAU * detuning_hz)?;
    let amp = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    let qubit = DensityMatrix::pure(&[amp, amp])?;
    let rho0 = qubit.kron(&scenario.cavity_thermal_state(hilbert.fock_cutoff())?);
    let observables = [
        Observable::new("sigma_x", hilbert.sigma_x()),
        Observable::new("sigma_y", hilbert.sigma_y()),
    ];
    let run = evolve(&rho0, &ham, &terms, opts, &observables)?;
    finish(run, hilbert, "ramsey")
}

fn finish(
    run: crate::engine::Evolution,
    hilbert: HilbertConfig,
    protocol: &str,
) -> Result<Simulation> {
    let mut series = run.series;
    series.metadata.notes.push(alloc::format!(
        "protocol={protocol} fock_cutoff={} frame=doubly_rotating",
        hilbert.fock_cutoff()
    ));
    Ok(Simulation {
        series,
        final_state: run.final_state,
        diagnostics: run.diagnostics,
        hilbert,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    T1,
    Ramsey,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractOptions {
    pub evolve: EvolveOptions,
    /// Ramsey detuning δ [Hz].
    pub detuning_hz: f64,
    /// Start of the Ramsey fit window [s]; 5/κ_tot when `None`.
    pub fit_window_start_s: Option<f64>,
    /// Also report the small-χ rate with its factor read literally.
    pub include_as_printed: bool,
}

impl ExtractOptions {
    pub fn new(evolve: EvolveOptions) -> Self {
        Self {
            evolve,
            detuning_hz: 0.0,
            fit_window_start_s: None,
            include_as_printed: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coherence {
    pub protocol: Protocol,
    pub simulation: Simulation,
    pub fit: FitResult,
    /// Absent when no cavity bath has a positive rate.
    pub prediction: Option<DephasingPrediction>,
    /// T2 implied by the intrinsic T1, intrinsic γφ and the thermal rate.
    pub predicted_t2_s: Option<f64>,
    /// First time included in the fit [s].
    pub fit_window_start_s: f64,
    pub notes: Vec<String>,
}

impl Coherence {
    /// Pure dephasing 1/T2 − 1/(2T1) implied by the fit, using the intrinsic T1.
    pub fn fitted_pure_dephasing(&self, t1_s: Option<f64>) -> f64 {
        self.fit.decay_rate() - t1_s.map_or(0.0, |t| 0.5 / t)
    }
}

/// Runs the evolution for `protocol` without fitting it.
pub fn run_protocol(
    scenario: &Scenario,
    protocol: Protocol,
    opts: &ExtractOptions,
) -> Result<Simulation> {
    match protocol {
        Protocol::T1 => simulate_t1(scenario, &opts.evolve),
        Protocol::Ramsey => simulate_ramsey(scenario, opts.detuning_hz, &opts.evolve),
    }
}

/// Runs `protocol`, fits the primary observable, and pairs the fit with the
/// analytic thermal-photon prediction.
pub fn extract_coherence(
    scenario: &Scenario,
    protocol: Protocol,
    opts: &ExtractOptions,
) -> Result<Coherence> {
    let simulation = run_protocol(scenario, protocol, opts)?;
    analyze(scenario, protocol, simulation, opts)
}

/// Fits a finished (possibly noisy) simulation of `protocol`.
pub fn analyze(
    scenario: &Scenario,
    protocol: Protocol,
    simulation: Simulation,
    opts: &ExtractOptions,
) -> Result<Coherence> {
    let prediction = if scenario.kappa_tot() > 0.0 {
        Some(predict(
            &scenario.dephasing_input()?,
            opts.include_as_printed,
        )?)
    } else {
        None
    };
    let thermal = prediction.map_or(0.0, |p| p.gamma_exact);
    let gamma_phi_total = thermal + scenario.gamma_phi();
    let predicted_t2_s = match scenario.device.t1_intrinsic_s {
        Some(t1) => Some(predict_t2(t1, gamma_phi_total)?),
        None if gamma_phi_total > 0.0 => Some(1.0 / gamma_phi_total),
        None => None,
    };
    let mut notes = Vec::new();
    let (window, fit) = match protocol {
        Protocol::T1 => (
            0.0,
            fit_exponential(&simulation.series.select("p_excited")?)?,
        ),
        Protocol::Ramsey => {
            let window = match opts.fit_window_start_s {
                Some(w) => w,
                None if scenario.kappa_tot() > 0.0 => {
                    DEFAULT_WINDOW_CAVITY_LIFETIMES / scenario.kappa_tot()
                }
                None => 0.0,
            };
            let t_end = simulation.series.times().last().copied().unwrap_or(0.0);
            if !(window >= 0.0 && window < t_end) {
                return Err(invalid("fit window starts after the end of the simulation"));
            }
            let series = simulation.series.select("sigma_x")?.window_from(window);
            notes.push(String::from("ramsey envelope fitted as exponential"));
            (window, fit_decaying_cosine(&series)?)
        }
    };
    notes.push(alloc::format!("fit_window_start_s={window:e}"));
    Ok(Coherence {
        protocol,
        simulation,
        fit,
        prediction,
        predicted_t2_s,
        fit_window_start_s: window,
        notes,
    })
}

/// Largest change of any recorded expectation when the run is repeated with
/// `extra` more Fock levels, relative to each column's largest magnitude.
pub fn cutoff_sensitivity<F>(scenario: &Scenario, extra: usize, run: F) -> Result<f64>
where
    F: Fn(&Scenario) -> Result<Simulation>,
{
    let base = run(scenario)?;
    let bigger = scenario.clone().with_hilbert(base.hilbert.enlarged(extra));
    let other = run(&bigger)?;
    let mut worst = 0.0f64;
    for (a, b) in base.series.columns().iter().zip(other.series.columns()) {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    Ok(worst)
}
