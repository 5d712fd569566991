//! Reference problems, convergence studies and report emission.

mod problems;
mod rate;
mod report;
mod study;

pub use problems::{builtin_problem, BUILTIN_PROBLEMS};
pub use rate::{fit_convergence_rate, ROUND_OFF_FLOOR};
pub use report::{emit_report, render_csv, render_json, ReportFormat};
pub use study::{
    integral_reference, run_convergence_study, ConvergenceReport, ReportKind, ReportRow, SchemeRates,
    SchemeSpec, StudyOptions, StudySpec, StudyTarget,
};
