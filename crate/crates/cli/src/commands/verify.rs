//! Analytic limits, steady states, invariants and simulated-vs-analytic
//! rates on a configurable grid.

use std::f64::consts::TAU;

use cqed_core::dephasing::{
    gamma_thermal_exact, gamma_thermal_saturation, gamma_thermal_small_chi, DephasingInput,
};
use cqed_core::device::{temperature_for_occupation, DeviceParams, DissipationSource};
use cqed_core::engine::{
    build_dissipators, build_hamiltonian, steady_state, EvolveOptions, Frame, HilbertConfig,
    SystemRates,
};
use cqed_core::experiments::{
    analyze, cutoff_sensitivity, simulate_ramsey, ExtractOptions, Protocol, Scenario,
};
use cqed_core::fit::{fit_decaying_cosine, fit_exponential};
use cqed_core::TimeSeries;
use rayon::prelude::*;
use serde_json::json;

use super::Report;
use crate::config::{RunConfig, VerifyConfig};
use crate::error::CliError;
use crate::output::{json_f64, Cell, Summary, Table};

/// Occupations above this are outside the range where the closed-form rate
/// has been checked against simulation.
pub const VALIDATED_MAX_N_TH: f64 = 0.05;
pub const MAX_FOCK_CUTOFF: usize = 15;

const F_CAVITY_HZ: f64 = 12.1e9;
const F_QUBIT_HZ: f64 = 4.2e9;
const RATE_TOLERANCE: f64 = 0.05;
const SMALL_CHI_TOLERANCE: f64 = 0.01;
const SATURATION_TOLERANCE: f64 = 0.02;
const STEADY_TOLERANCE: f64 = 1e-6;
const TRACE_TOLERANCE: f64 = 1e-9;
const HERMITICITY_TOLERANCE: f64 = 1e-9;
const POSITIVITY_TOLERANCE: f64 = 1e-8;
const CUTOFF_TOLERANCE: f64 = 1e-6;
const FIT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    OutOfRegime,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::OutOfRegime => "out_of_validated_regime",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn bound(
        name: impl Into<String>,
        value: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        let status = if value <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name: name.into(),
            status,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Fail,
            value: f64::NAN,
            tolerance,
            detail: detail.into(),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn limit_checks() -> Vec<Check> {
    let kappa = 1.0e7;
    let ratios = [100.0, 200.0, 500.0, 1e3, 1e4];
    let mut small = 0.0f64;
    let mut sat = 0.0f64;
    for r in ratios {
        for n in [1e-4, 1e-3, 1e-2] {
            let Ok(input) = DephasingInput::single(kappa / r, kappa, n) else {
                return vec![Check::failed(
                    "small_chi_limit",
                    SMALL_CHI_TOLERANCE,
                    "invalid grid point",
                )];
            };
            if let Ok(exact) = gamma_thermal_exact(&input) {
                small = small.max(rel(gamma_thermal_small_chi(&input), exact));
            }
        }
        for n in [1e-3, 1e-2, 5e-2] {
            if let Ok(input) = DephasingInput::single(r * kappa, kappa, n) {
                if let Ok(exact) = gamma_thermal_exact(&input) {
                    sat = sat.max(rel(gamma_thermal_saturation(&input), exact));
                }
            }
        }
    }
    vec![
        Check::bound(
            "small_chi_limit",
            small,
            SMALL_CHI_TOLERANCE,
            "kappa/chi >= 100, mean n <= 1e-2",
        ),
        Check::bound(
            "saturation_limit",
            sat,
            SATURATION_TOLERANCE,
            "chi/kappa >= 100, n <= 5e-2",
        ),
    ]
}

fn grid_scenario(kappa: f64, chi_over_kappa: f64, n_th: f64) -> Result<Scenario, CliError> {
    let device = DeviceParams {
        f_qubit_hz: F_QUBIT_HZ,
        f_cavity_hz: F_CAVITY_HZ,
        g_over_2pi_hz: 0.0,
        c_sigma_f: None,
        e_j_over_h_hz: None,
        chi_over_2pi_hz: Some(chi_over_kappa * kappa / TAU),
        q_total: TAU * F_CAVITY_HZ / kappa,
        coupling_ratio: 1.0,
        t1_intrinsic_s: None,
        tphi_intrinsic_s: None,
    };
    let source = DissipationSource::new(
        "line",
        kappa,
        temperature_for_occupation(F_CAVITY_HZ, n_th)?,
    )?;
    Ok(Scenario::new(device, vec![source])?)
}

fn ramsey_checks(kappa: f64, x: f64, n: f64) -> Vec<Check> {
    let label = format!("chi/kappa={x:e},n_th={n:e}");
    let validated = n <= VALIDATED_MAX_N_TH;
    let rate_name = format!("ramsey_rate[{label}]");
    let attempt = || -> Result<Vec<Check>, CliError> {
        let scenario = grid_scenario(kappa, x, n)?;
        let exact = gamma_thermal_exact(&scenario.dephasing_input()?)?;
        let t_final = 5.0 / kappa + 3.0 / exact;
        let mut opts = ExtractOptions::new(EvolveOptions::new(t_final, 401));
        opts.detuning_hz = 10.0 / t_final;
        let sim = simulate_ramsey(&scenario, opts.detuning_hz, &opts.evolve)?;
        let cutoff = sim.hilbert.fock_cutoff();
        let mut checks = vec![
            Check::bound(
                format!("trace[{label}]"),
                sim.diagnostics.max_trace_error,
                TRACE_TOLERANCE,
                "",
            ),
            Check::bound(
                format!("hermiticity[{label}]"),
                sim.diagnostics.max_hermiticity_error,
                HERMITICITY_TOLERANCE,
                "",
            ),
            Check::bound(
                format!("positivity[{label}]"),
                (-sim.final_state.min_eigenvalue()).max(0.0),
                POSITIVITY_TOLERANCE,
                "most negative eigenvalue of the final state",
            ),
        ];
        let run = |s: &Scenario| simulate_ramsey(s, opts.detuning_hz, &opts.evolve);
        let change = cutoff_sensitivity(&scenario, 3, run)?;
        checks.push(Check::bound(
            format!("cutoff_convergence[{label}]"),
            change,
            CUTOFF_TOLERANCE,
            format!("N={cutoff} vs N+3"),
        ));
        let rate = match analyze(&scenario, Protocol::Ramsey, sim.clone(), &opts) {
            Ok(c) => {
                let mut check = Check::bound(
                    rate_name.clone(),
                    rel(c.fit.decay_rate(), exact),
                    RATE_TOLERANCE,
                    format!(
                        "fitted {:e} vs closed form {exact:e} 1/s, N={cutoff}",
                        c.fit.decay_rate()
                    ),
                );
                if validated && cutoff > MAX_FOCK_CUTOFF {
                    check.status = Status::Fail;
                    check.detail.push_str(" (cutoff above limit)");
                }
                check
            }
            Err(e) => Check::failed(rate_name.clone(), RATE_TOLERANCE, e.to_string()),
        };
        checks.push(rate);
        Ok(checks)
    };
    let mut checks = attempt().unwrap_or_else(|e| {
        vec![Check::failed(
            rate_name.clone(),
            RATE_TOLERANCE,
            e.to_string(),
        )]
    });
    if !validated {
        for c in checks.iter_mut().filter(|c| c.name == rate_name) {
            c.status = Status::OutOfRegime;
        }
    }
    checks
}

fn steady_checks(kappa: f64) -> Vec<Check> {
    let cases = [
        (0.75, 0.0, 0.25, 0.05),
        (0.5, 0.005, 0.5, 0.05),
        (0.9, 0.002, 0.1, 0.2),
    ];
    cases
        .iter()
        .map(|&(w1, n1, w2, n2)| {
            let name = format!("steady_state[n=({n1:e},{n2:e})]");
            let expected = w1 * n1 + w2 * n2;
            let solve = || -> Result<f64, CliError> {
                let h = HilbertConfig::for_occupation(f64::max(n1, n2))?.enlarged(4);
                let sources = vec![
                    DissipationSource::new(
                        "wall",
                        w1 * kappa,
                        temperature_for_occupation(F_CAVITY_HZ, n1)?,
                    )?,
                    DissipationSource::new(
                        "line",
                        w2 * kappa,
                        temperature_for_occupation(F_CAVITY_HZ, n2)?,
                    )?,
                ];
                let rates = SystemRates {
                    omega_cavity: TAU * F_CAVITY_HZ,
                    omega_qubit: TAU * F_QUBIT_HZ,
                    chi: 0.5 * kappa,
                };
                let ham = build_hamiltonian(&rates, &h, Frame::DoublyRotating)?;
                // qubit relaxation makes the joint steady state unique
                let terms = build_dissipators(&sources, F_CAVITY_HZ, 0.05 * kappa, 0.0, &h)?;
                let ss = steady_state(&ham, &terms)?;
                Ok(ss.expectation(&h.number())?.re)
            };
            match solve() {
                Ok(n_ss) => Check::bound(
                    name,
                    (n_ss - expected).abs(),
                    STEADY_TOLERANCE,
                    format!("<a+a> = {n_ss:e}, expected {expected:e}"),
                ),
                Err(e) => Check::failed(name, STEADY_TOLERANCE, e.to_string()),
            }
        })
        .collect()
}

fn fit_checks() -> Vec<Check> {
    let times: Vec<f64> = (0..401).map(|i| 300e-6 * i as f64 / 400.0).collect();
    let make = |f: &dyn Fn(f64) -> f64| {
        TimeSeries::single(times.clone(), "y", times.iter().map(|&t| f(t)).collect())
    };
    let (a, tau, b) = (0.92, 70e-6, 0.03);
    let exp = make(&|t| a * (-t / tau).exp() + b);
    let exp_check = match exp.and_then(|s| fit_exponential(&s)) {
        Ok(fit) => {
            let gap = [
                rel(fit.params.amplitude, a),
                rel(fit.params.decay_time, tau),
                rel(fit.params.offset, b),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            Check::bound(
                "fit_exponential",
                gap,
                FIT_TOLERANCE,
                "noiseless synthetic input",
            )
        }
        Err(e) => Check::failed("fit_exponential", FIT_TOLERANCE, e.to_string()),
    };
    let (ca, t2, f, phi, cb) = (0.5, 95e-6, 40e3, 0.25, 0.5);
    let cos = make(&|t| ca * (-t / t2).exp() * (TAU * f * t + phi).cos() + cb);
    let cos_check = match cos.and_then(|s| fit_decaying_cosine(&s)) {
        Ok(fit) => {
            let gap = [
                rel(fit.params.amplitude, ca),
                rel(fit.params.decay_time, t2),
                rel(fit.params.frequency, f),
                rel(fit.params.phase, phi),
                rel(fit.params.offset, cb),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            Check::bound(
                "fit_decaying_cosine",
                gap,
                FIT_TOLERANCE,
                "noiseless synthetic input",
            )
        }
        Err(e) => Check::failed("fit_decaying_cosine", FIT_TOLERANCE, e.to_string()),
    };
    vec![exp_check, cos_check]
}

pub fn checks(v: &VerifyConfig) -> Vec<Check> {
    let kappa = TAU * v.kappa_over_2pi_hz;
    let grid: Vec<(f64, f64)> = v
        .chi_over_kappa
        .iter()
        .flat_map(|&x| v.n_th.iter().map(move |&n| (x, n)))
        .collect();
    let mut all = limit_checks();
    all.extend(steady_checks(kappa));
    all.extend(fit_checks());
    let ramsey: Vec<Vec<Check>> = grid
        .par_iter()
        .map(|&(x, n)| ramsey_checks(kappa, x, n))
        .collect();
    all.extend(ramsey.into_iter().flatten());
    all
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let v = cfg.verify();
    if !(v.kappa_over_2pi_hz > 0.0) {
        return Err(CliError::Config(
            "verify.kappa_over_2pi_hz must be > 0".into(),
        ));
    }
    if v.chi_over_kappa.iter().any(|&x| !(x > 0.0)) || v.n_th.iter().any(|&n| !(n > 0.0)) {
        return Err(CliError::Config("verify grid values must be > 0".into()));
    }
    let checks = checks(&v);
    let mut summary = Summary::new("verify");
    let mut table = Table::new(["check", "status", "value", "tolerance", "detail"]);
    let mut failures = 0;
    for c in &checks {
        if c.status == Status::Fail {
            failures += 1;
        }
        table.push(vec![
            Cell::from(c.name.as_str()),
            Cell::from(c.status.as_str()),
            Cell::Num(c.value),
            Cell::Num(c.tolerance),
            Cell::from(c.detail.as_str()),
        ]);
        summary.checks.push(json!({
            "name": c.name,
            "status": c.status.as_str(),
            "value": json_f64(c.value),
            "tolerance": c.tolerance,
            "detail": c.detail,
        }));
    }
    summary.derived.insert("checks".into(), json!(checks.len()));
    summary.derived.insert("failed".into(), json!(failures));
    summary
        .derived
        .insert("kappa_over_2pi_hz".into(), json_f64(v.kappa_over_2pi_hz));
    summary
        .derived
        .insert("chi_over_kappa".into(), json!(v.chi_over_kappa));
    summary.derived.insert("n_th".into(), json!(v.n_th));
    let status = (failures > 0).then_some(CliError::Verification(failures));
    Ok(Report {
        summary,
        table,
        table_file: "verify.csv",
        status,
    })
}
