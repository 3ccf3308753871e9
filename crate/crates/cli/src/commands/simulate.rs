//! Master-equation experiments and their fits.

use cqed_core::experiments::{
    analyze, run_protocol, Coherence, ExtractOptions, Protocol, Simulation,
};
use cqed_core::noise::add_gaussian_noise;
use serde_json::{json, Value as Json};

use super::{scenario, Report};
use crate::config::{ProtocolChoice, RunConfig};
use crate::error::CliError;
use crate::output::{json_f64, json_opt, Cell, Summary, Table};

pub struct Outcome {
    pub protocol: Protocol,
    pub simulation: Simulation,
    pub analysis: Result<Coherence, CliError>,
    /// Decay rate the fit should reproduce [1/s].
    pub expected_rate: Option<f64>,
}

impl Outcome {
    pub fn fitted_rate(&self) -> Option<f64> {
        self.analysis.as_ref().ok().map(|c| c.fit.decay_rate())
    }

    pub fn discrepancy_pct(&self) -> Option<f64> {
        let (fit, expected) = (self.fitted_rate()?, self.expected_rate?);
        Some(100.0 * (fit - expected).abs() / expected)
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let scenario = scenario(cfg)?;
    let exp = cfg.experiment()?;
    let protocol = match exp.protocol {
        ProtocolChoice::T1 => Protocol::T1,
        ProtocolChoice::Ramsey => Protocol::Ramsey,
    };
    let opts = ExtractOptions {
        evolve: exp.evolve,
        detuning_hz: exp.detuning_hz,
        fit_window_start_s: exp.fit_window_start_s,
        include_as_printed: cfg.as_printed(),
    };
    let mut simulation = run_protocol(&scenario, protocol, &opts)?;
    if exp.noise_sigma > 0.0 {
        add_gaussian_noise(&mut simulation.series, exp.noise_sigma, exp.noise_seed)?;
    }
    let analysis = analyze(&scenario, protocol, simulation.clone(), &opts).map_err(CliError::from);
    let expected_rate = match (protocol, &analysis) {
        (Protocol::T1, _) => scenario.device.t1_intrinsic_s.map(|t| 1.0 / t),
        (Protocol::Ramsey, Ok(c)) => c.predicted_t2_s.map(|t| 1.0 / t),
        (Protocol::Ramsey, Err(_)) => None,
    };
    Ok(Outcome {
        protocol,
        simulation,
        analysis,
        expected_rate,
    })
}

/// Per-point values for sweeps.
pub fn values(outcome: &Outcome) -> Vec<(String, Cell)> {
    let fit = outcome.analysis.as_ref().ok().map(|c| &c.fit);
    vec![
        (
            "fitted_decay_time_s".into(),
            Cell::Num(fit.map_or(f64::NAN, |f| f.params.decay_time)),
        ),
        (
            "fitted_decay_rate_s_inv".into(),
            Cell::Num(outcome.fitted_rate().unwrap_or(f64::NAN)),
        ),
        (
            "expected_decay_rate_s_inv".into(),
            Cell::Num(outcome.expected_rate.unwrap_or(f64::NAN)),
        ),
        (
            "discrepancy_pct".into(),
            Cell::Num(outcome.discrepancy_pct().unwrap_or(f64::NAN)),
        ),
        (
            "residual_rms".into(),
            Cell::Num(fit.map_or(f64::NAN, |f| f.residual_rms)),
        ),
    ]
}

pub fn series_table(sim: &Simulation) -> Table {
    let series = &sim.series;
    let mut table =
        Table::new(std::iter::once("t_s".to_string()).chain(series.labels().iter().cloned()));
    for (i, &t) in series.times().iter().enumerate() {
        let mut row = vec![Cell::Num(t)];
        row.extend(series.columns().iter().map(|c| Cell::Num(c[i])));
        table.push(row);
    }
    table
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let outcome = execute(cfg)?;
    let discrepancy = outcome.discrepancy_pct();
    let Outcome {
        protocol,
        simulation: sim,
        analysis,
        expected_rate,
    } = outcome;
    let mut summary = Summary::new("simulate");
    let protocol = match protocol {
        Protocol::T1 => "t1",
        Protocol::Ramsey => "ramsey",
    };
    summary
        .derived
        .insert("protocol".into(), Json::from(protocol));
    summary
        .derived
        .insert("fock_cutoff".into(), Json::from(sim.hilbert.fock_cutoff()));
    summary.derived.insert(
        "accepted_steps".into(),
        Json::from(sim.diagnostics.accepted_steps),
    );
    summary.derived.insert(
        "rejected_steps".into(),
        Json::from(sim.diagnostics.rejected_steps),
    );
    summary
        .derived
        .insert("expected_decay_rate_s_inv".into(), json_opt(expected_rate));
    summary
        .derived
        .insert("discrepancy_pct".into(), json_opt(discrepancy));
    if let Some(seed) = sim.series.metadata.noise_seed {
        summary
            .derived
            .insert("noise_seed".into(), Json::from(seed));
    }
    summary
        .derived
        .insert("series_notes".into(), json!(sim.series.metadata.notes));

    summary
        .checks
        .push(check("trace_error", sim.diagnostics.max_trace_error, 1e-9));
    summary.checks.push(check(
        "hermiticity_error",
        sim.diagnostics.max_hermiticity_error,
        1e-9,
    ));
    summary.checks.push(check(
        "negative_eigenvalue",
        (-sim.final_state.min_eigenvalue()).max(0.0),
        1e-8,
    ));

    let status = match analysis {
        Ok(c) => {
            if let Some(p) = &c.prediction {
                summary
                    .prediction
                    .insert("gamma_thermal_s_inv".into(), json_f64(p.gamma_exact));
                summary
                    .prediction
                    .insert("gamma_small_chi_s_inv".into(), json_f64(p.gamma_small_chi));
                summary.prediction.insert(
                    "gamma_saturation_s_inv".into(),
                    json_f64(p.gamma_saturation),
                );
                summary
                    .prediction
                    .insert("regime".into(), Json::from(p.regime.as_str()));
                if let Some(a) = p.gamma_small_chi_as_printed {
                    summary
                        .prediction
                        .insert("gamma_small_chi_as_printed".into(), json_f64(a));
                }
            }
            summary
                .prediction
                .insert("t2_predicted_s".into(), json_opt(c.predicted_t2_s));
            let f = &c.fit;
            for (name, value) in f.params.named() {
                summary.fit.insert(name.into(), json_f64(value));
            }
            for (name, var) in f.covariance_diag.named() {
                summary
                    .fit
                    .insert(format!("{name}_stderr"), json_f64(var.sqrt()));
            }
            summary
                .fit
                .insert("decay_rate_s_inv".into(), json_f64(f.decay_rate()));
            summary
                .fit
                .insert("residual_rms".into(), json_f64(f.residual_rms));
            summary
                .fit
                .insert("converged".into(), Json::from(f.converged));
            summary
                .fit
                .insert("iterations".into(), Json::from(f.iterations));
            summary
                .fit
                .insert("window_start_s".into(), json_f64(c.fit_window_start_s));
            summary.fit.insert("notes".into(), json!(c.notes));
            summary.warnings.extend(f.warnings.iter().cloned());
            None
        }
        Err(e) => {
            summary
                .fit
                .insert("error".into(), Json::from(e.to_string()));
            Some(e)
        }
    };
    Ok(Report {
        summary,
        table: series_table(&sim),
        table_file: "timeseries.csv",
        status,
    })
}

fn check(name: &str, value: f64, tolerance: f64) -> Json {
    json!({
        "name": name,
        "status": if value <= tolerance { "pass" } else { "fail" },
        "value": json_f64(value),
        "tolerance": tolerance,
    })
}
