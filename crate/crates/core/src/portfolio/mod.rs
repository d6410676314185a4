mod frontier;
mod ga;
mod objective;
mod partition;
mod selection;
mod tuning;

pub use frontier::{
    build_frontier, gated_forecast, out_of_sample_plan, read_frontier_csv, Approach,
    ApproachSummary, CellFailure, Frontier, FrontierConfig, FrontierPoint, FrontierRow,
    FRONTIER_CSV_HEADER,
};
pub use ga::{
    ga_optimize, ga_optimize_relaxed, ga_optimize_seeded, random_feasible_selection, GaConfig,
    GaResult,
};
pub use objective::{
    household_dispersion, objective_fv, objective_sr, objective_ss, validation_crps,
    FixedParameterForecaster, FvConfig, FvLeadObjective, FvObjective, HouseholdDispersion,
    Memoized, Objective, RsdDenominator, SrObjective, SsObjective, SsWeighting,
    ValidationForecaster,
};
pub use partition::{
    household_point_forecasts, partition_demand_range, partition_reachable, Partition,
    PointFallback, PointForecasts,
};
pub use selection::{SelectionMode, SelectionVector};
pub use tuning::{default_ss_grid, tune_ss_weight, LeadProblem, SsCandidate, SsConfig, SsTuning};
