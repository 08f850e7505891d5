//! Randomized deployments, Monte Carlo experiments and CSV export.

pub mod experiments;
pub mod export;
pub mod scenario;

pub use experiments::{run_experiment, ExperimentSpec, Figure, Overrides, TrialRecord};
pub use export::{export_results, ResultTable, Value};
pub use scenario::{draw_scenario, trial_rng, Scenario, ScenarioConfig};
