//! Shared inputs for the benchmarks.

use demand_frontier::data::{impute_missing, synthesize_population, SyntheticPopulationConfig};
use demand_frontier::Panel;

/// A small synthetic panel for benchmarking.
pub fn bench_panel(households: usize, hours: usize) -> Panel {
    let cfg = SyntheticPopulationConfig {
        n_households: households,
        n_hours: hours,
        seed: 7,
        ..Default::default()
    };
    impute_missing(&synthesize_population(&cfg).expect("valid synthetic config"))
        .expect("complete panel")
}
