//! Forecast scoring and rolling-window evaluation.

mod crps;
mod report;

pub use crps::{crps_ensemble, crps_gaussian, crps_sorted, mae};
pub use report::{
    evaluate_windows, EvaluationReport, Forecaster, LeadScore, ReportCell, WindowEvaluation,
    WindowFailure,
};
