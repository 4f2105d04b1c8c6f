//! Scenario files in, reports out.

mod report;
mod scenario;

pub use report::{emit_report, run_scenario, Format, HarnessError, Report, RunBlock};
pub use scenario::{parse_scenario, Scenario, ScenarioError, TransferLine};
