//! Cartesian parameter sweeps over `predict` or `simulate`.

use rayon::prelude::*;
use serde_json::{json, Value as Json};

use super::{predict, simulate, Report};
use crate::config::{RunConfig, SweepAxis};
use crate::error::CliError;
use crate::output::{Cell, Summary, Table};

/// Grid points in index order; the last axis varies fastest.
pub fn grid(axes: &[SweepAxis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

type PointResult = Result<(Vec<(String, Cell)>, Vec<String>), CliError>;

fn run_point(cfg: &RunConfig, axes: &[SweepAxis], point: &[f64]) -> PointResult {
    let mut local = cfg.clone();
    for (axis, &v) in axes.iter().zip(point) {
        local = local.with_value(&axis.path, v)?;
    }
    if cfg.sweep_simulates() {
        let outcome = simulate::execute(&local)?;
        let vals = simulate::values(&outcome);
        match outcome.analysis {
            Ok(c) => Ok((vals, c.fit.warnings)),
            Err(e) => Err(e),
        }
    } else {
        let mut s = Summary::new("predict");
        let vals = predict::values(&local, &mut s)?;
        Ok((vals, s.warnings))
    }
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let axes = cfg.sweep_axes()?;
    if axes.is_empty() {
        return Err(CliError::Config(
            "sweep needs at least one sweep.axis.<name> section".into(),
        ));
    }
    let points = grid(&axes);
    // Evaluated in parallel; collect keeps index order.
    let results: Vec<PointResult> = points
        .par_iter()
        .map(|p| run_point(cfg, &axes, p))
        .collect();

    let columns: Vec<String> = results
        .iter()
        .find_map(|r| r.as_ref().ok())
        .map(|(vals, _)| vals.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let header = std::iter::once("index".to_string())
        .chain(axes.iter().map(|a| a.path.clone()))
        .chain(std::iter::once("status".to_string()))
        .chain(columns.iter().cloned());
    let mut table = Table::new(header);
    let mut summary = Summary::new("sweep");
    let mut status = None;
    let mut failed = 0usize;
    for (index, (point, result)) in points.iter().zip(results).enumerate() {
        let mut row = vec![Cell::Text(index.to_string())];
        row.extend(point.iter().map(|&v| Cell::Num(v)));
        match result {
            Ok((vals, warnings)) => {
                row.push(Cell::from("ok"));
                row.extend(vals.into_iter().map(|(_, v)| v));
                summary
                    .warnings
                    .extend(warnings.into_iter().map(|w| format!("point {index}: {w}")));
            }
            Err(e) => {
                failed += 1;
                row.push(Cell::from(e.to_string()));
                row.extend(columns.iter().map(|_| Cell::Num(f64::NAN)));
                status.get_or_insert(e);
            }
        }
        table.push(row);
    }
    summary.warnings.dedup();
    summary
        .derived
        .insert("points".into(), Json::from(points.len()));
    summary
        .derived
        .insert("failed_points".into(), Json::from(failed));
    summary.derived.insert(
        "axes".into(),
        Json::Array(
            axes.iter()
                .map(|a| json!({ "name": a.name, "path": a.path, "values": a.values }))
                .collect(),
        ),
    );
    summary.derived.insert(
        "command".into(),
        Json::from(if cfg.sweep_simulates() {
            "simulate"
        } else {
            "predict"
        }),
    );
    Ok(Report {
        summary,
        table,
        table_file: "sweep.csv",
        status,
    })
}
