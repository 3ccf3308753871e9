//! Closed-form thermal-photon dephasing.

use std::f64::consts::TAU;

use cqed_core::dephasing::{predict, predict_t2};
use serde_json::Value as Json;

use super::{scenario, Report};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{json_f64, Cell, Summary, Table};

/// Named values of one prediction, in output column order.
pub fn values(cfg: &RunConfig, summary: &mut Summary) -> Result<Vec<(String, Cell)>, CliError> {
    let scenario = scenario(cfg)?;
    if scenario.sources.is_empty() {
        return Err(CliError::Config("predict needs at least one source".into()));
    }
    let chi = scenario.device.resolve_chi()?;
    if let Some(w) = chi.warning {
        summary.warnings.push(w);
    }
    let input = scenario.dephasing_input()?;
    let p = predict(&input, cfg.as_printed())?;
    let kappa = input.kappa_tot();
    let mut out: Vec<(String, Cell)> = vec![
        ("chi_over_2pi_hz".into(), Cell::Num(input.chi_rad_s() / TAU)),
        ("kappa_tot_over_2pi_hz".into(), Cell::Num(kappa / TAU)),
        (
            "chi_over_kappa".into(),
            Cell::Num(input.chi_rad_s() / kappa),
        ),
        ("mean_n_th".into(), Cell::Num(input.mean_occupation())),
        ("regime".into(), Cell::from(p.regime.as_str())),
        ("gamma_thermal_s_inv".into(), Cell::Num(p.gamma_exact)),
        ("gamma_small_chi_s_inv".into(), Cell::Num(p.gamma_small_chi)),
        (
            "gamma_saturation_s_inv".into(),
            Cell::Num(p.gamma_saturation),
        ),
    ];
    if let Some(a) = p.gamma_small_chi_as_printed {
        out.push(("gamma_small_chi_as_printed".into(), Cell::Num(a)));
    }
    if let Some(t1) = scenario.device.t1_intrinsic_s {
        let total = p.gamma_exact + scenario.gamma_phi();
        out.push(("gamma_phi_total_s_inv".into(), Cell::Num(total)));
        out.push(("t2_predicted_s".into(), Cell::Num(predict_t2(t1, total)?)));
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut summary = Summary::new("predict");
    let vals = values(cfg, &mut summary)?;
    if cfg.as_printed() {
        summary
            .warnings
            .push("gamma_small_chi_as_printed adds a rate to a photon number and is shown for comparison only".into());
    }
    let mut table = Table::new(vals.iter().map(|(k, _)| k.clone()));
    for (k, v) in &vals {
        let j = match v {
            Cell::Num(x) => json_f64(*x),
            Cell::Text(s) => Json::from(s.as_str()),
        };
        summary.prediction.insert(k.clone(), j);
    }
    table.push(vals.into_iter().map(|(_, v)| v).collect());
    Ok(Report::ok(summary, table, "predict.csv"))
}
