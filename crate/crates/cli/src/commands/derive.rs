//! Derived device quantities.

use std::f64::consts::TAU;

use cqed_core::device::{coupling_efficiency, modes_coupled_at_center, quality_factors, Port};
use serde_json::{json, Map, Value as Json};

use super::Report;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{json_f64, json_opt, Cell, Summary, Table};

const MODES_REPORTED: usize = 2;

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let device = cfg.device()?;
    let sources = cfg.sources()?;
    let f_occ = cfg.f_occupation_hz()?;
    let mut summary = Summary::new("derive");
    let mut table = Table::new(["quantity", "value", "unit"]);
    let mut put = |d: &mut Map<String, Json>, key: &str, value: f64, unit: &str| {
        d.insert(key.to_string(), json_f64(value));
        table.push(vec![Cell::from(key), Cell::Num(value), Cell::from(unit)]);
    };
    let d = &mut summary.derived;

    if let Some(ec) = device.charging_energy_hz() {
        put(d, "e_c_over_h_hz", ec?, "Hz");
    }
    let chi = device.resolve_chi()?;
    if let Some(derived) = chi.derived_rad_s {
        put(d, "chi_derived_over_2pi_hz", derived / TAU, "Hz");
    }
    if let Some(o) = chi.override_rad_s {
        put(d, "chi_override_over_2pi_hz", o / TAU, "Hz");
    }
    put(d, "chi_over_2pi_hz", chi.chi_rad_s / TAU, "Hz");
    if let Some(w) = chi.warning {
        summary.warnings.push(w);
    }
    put(d, "delta_over_2pi_hz", device.detuning_rad_s() / TAU, "Hz");
    let kappa_q = device.kappa_total_rad_s()?;
    put(d, "kappa_tot_over_2pi_hz", kappa_q / TAU, "Hz");
    let (k_ext, k_int) = device.kappa_split_rad_s()?;
    put(d, "kappa_ext_over_2pi_hz", k_ext / TAU, "Hz");
    put(d, "kappa_int_over_2pi_hz", k_int / TAU, "Hz");
    put(d, "purcell_t1_s", device.purcell_t1_s()?, "s");

    // With explicit baths the port tags decide the efficiency; otherwise the
    // quality-factor split does.
    let efficiency = if sources.is_empty() {
        coupling_efficiency(k_ext, k_int)?
    } else {
        let ext: f64 = sources
            .iter()
            .filter(|s| s.port == Port::External)
            .map(|s| s.kappa_rad_s)
            .sum();
        let int: f64 = sources
            .iter()
            .filter(|s| s.port == Port::Internal)
            .map(|s| s.kappa_rad_s)
            .sum();
        let sum = ext + int;
        if ((sum - kappa_q) / kappa_q).abs() > 0.05 {
            summary.warnings.push(format!(
                "sum of source kappas {:.4e} Hz differs from f_cavity/q_total = {:.4e} Hz",
                sum / TAU,
                kappa_q / TAU
            ));
        }
        coupling_efficiency(ext, int)?
    };
    put(d, "coupling_efficiency", efficiency, "1");

    if !sources.is_empty() {
        let mut occupations = Map::new();
        for s in &sources {
            let n = s.occupation(f_occ)?;
            occupations.insert(s.label.clone(), json_f64(n));
            table.push(vec![
                Cell::from(format!("n_th.{}", s.label)),
                Cell::Num(n),
                Cell::from("1"),
            ]);
        }
        d.insert("n_th".into(), Json::Object(occupations));
    }

    let records = cfg.coherence_records()?;
    if !records.is_empty() {
        let mut quality = Map::new();
        for (label, rec) in &records {
            let (q1, q2) = quality_factors(device.f_qubit_hz, rec)?;
            quality.insert(
                label.clone(),
                json!({ "q1": json_f64(q1), "q2": json_f64(q2) }),
            );
            table.push(vec![
                Cell::from(format!("q1.{label}")),
                Cell::Num(q1),
                Cell::from("1"),
            ]);
            table.push(vec![
                Cell::from(format!("q2.{label}")),
                Cell::Num(q2),
                Cell::from("1"),
            ]);
            if rec.exceeds_relaxation_limit() {
                summary
                    .warnings
                    .push(format!("coherence record `{label}` has T2* > 2 T1"));
            }
        }
        d.insert("quality_factors".into(), Json::Object(quality));
    }

    if let Some((geom, max_index)) = cfg.geometry()? {
        let modes = modes_coupled_at_center(&geom, max_index)?;
        let mut listed = Vec::new();
        for m in modes.iter().take(MODES_REPORTED) {
            let (i, j, k) = m.index;
            let name = format!("mode_te{i}{j}{k}_hz");
            listed.push(json!({ "index": [i, j, k], "freq_hz": json_f64(m.freq_hz) }));
            table.push(vec![
                Cell::from(name),
                Cell::Num(m.freq_hz),
                Cell::from("Hz"),
            ]);
        }
        summary
            .derived
            .insert("center_coupled_modes".into(), Json::Array(listed));
        if let Some(first) = modes.first() {
            summary.derived.insert(
                "fundamental_gap_to_cavity_hz".into(),
                json_opt(Some(first.freq_hz - device.f_cavity_hz)),
            );
        }
    }
    Ok(Report::ok(summary, table, "derive.csv"))
}
