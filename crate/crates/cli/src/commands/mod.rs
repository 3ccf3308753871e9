use cqed_core::experiments::Scenario;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Summary, Table};

pub mod derive;
pub mod predict;
pub mod simulate;
pub mod sweep;
pub mod verify;

/// What a command produced. `status` carries a failure that must still be
/// reported through the exit code after the outputs are written.
#[derive(Debug)]
pub struct Report {
    pub summary: Summary,
    pub table: Table,
    pub table_file: &'static str,
    pub status: Option<CliError>,
}

impl Report {
    pub fn ok(summary: Summary, table: Table, table_file: &'static str) -> Self {
        Self {
            summary,
            table,
            table_file,
            status: None,
        }
    }
}

pub fn scenario(cfg: &RunConfig) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::new(cfg.device()?, cfg.sources()?)?;
    if let Some(h) = cfg.hilbert()? {
        scenario = scenario.with_hilbert(h);
    }
    scenario.f_occupation_hz = Some(cfg.f_occupation_hz()?);
    Ok(scenario)
}
