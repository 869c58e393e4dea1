//! Library surface of the scenario runner, used by the binary and by the
//! integration tests.

pub mod catalog;
pub mod config;
pub mod report;
pub mod scenarios;

pub use config::{validate_config, ScenarioConfig};
pub use report::{CheckRow, Overall, RowVerdict, RunReport};
pub use scenarios::{all_ids, lookup, run_scenario, SCENARIOS};

use std::path::Path;

/// Writes `report.csv` and `verdicts.csv` into the output directory.
pub fn write_outputs(report: &RunReport, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut report_file = std::fs::File::create(dir.join("report.csv"))?;
    report.write_report_csv(&mut report_file)?;
    let mut verdicts_file = std::fs::File::create(dir.join("verdicts.csv"))?;
    report.write_verdicts_csv(&mut verdicts_file)?;
    Ok(())
}
