//! `gramevo compare`: Mann–Whitney U comparison of the final best train
//! fitness recorded in two result directories' summary files. The
//! comparison is informational, so a successful run always exits 0
//! regardless of the p-value.

use std::fs;
use std::path::Path;

use gramevo::stats::mann_whitney_u;

use crate::{io_error, CliError};

/// Extracts the `best_fitness_train` column from a summary.csv, skipping
/// `#` comment lines.
fn read_summary_column(dir: &Path) -> Result<Vec<f64>, CliError> {
    let path = dir.join("summary.csv");
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| CliError::Usage(format!("{}: missing header row", path.display())))?;
    let column = header
        .split(',')
        .position(|name| name.trim() == "best_fitness_train")
        .ok_or_else(|| {
            CliError::Usage(format!(
                "{}: no `best_fitness_train` column in the header",
                path.display()
            ))
        })?;
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cell = line.split(',').nth(column).ok_or_else(|| {
            CliError::Usage(format!("{}: row {} is too short", path.display(), i + 1))
        })?;
        let value: f64 = cell.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "{}: row {}: `{}` is not a number",
                path.display(),
                i + 1,
                cell.trim()
            ))
        })?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: summary contains no runs",
            path.display()
        )));
    }
    Ok(values)
}

pub fn cmd_compare(dir_a: &Path, dir_b: &Path) -> Result<(), CliError> {
    let a = read_summary_column(dir_a)?;
    let b = read_summary_column(dir_b)?;
    let result = mann_whitney_u(&a, &b).map_err(|e| CliError::Usage(e.to_string()))?;
    outln!("samples: {} vs {}", result.n_samples.0, result.n_samples.1);
    outln!("medians: {} vs {}", result.medians.0, result.medians.1);
    outln!("U = {}", result.u_statistic);
    outln!("p (two-sided) = {}", result.p_value);
    Ok(())
}
