//! Report files: SolveReport JSON and residual-history CSV.

use crate::error::{PfemError, Result};
use pfem_core::fem::SolveReport;
use std::path::Path;

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| PfemError::Json { file: path.display().to_string(), source })?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_solve_report(path: &Path, report: &SolveReport) -> Result<()> {
    write_json(path, report)
}

/// Residual history as `iteration,norm` rows.
pub fn residual_history_csv(path: &Path, report: &SolveReport) -> Result<()> {
    let mut text = String::from("iteration,norm\n");
    for (i, r) in report.residual_history.iter().enumerate() {
        text.push_str(&format!("{i},{r:e}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}
