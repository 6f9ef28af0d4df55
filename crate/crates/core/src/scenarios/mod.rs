//! Experiment campaigns: scenario configuration, synthetic populations,
//! multi-realization rollouts and parameter sweeps.

mod config;
mod population;
pub mod presets;
mod runner;
mod sweeps;

pub use config::{
    apply_overrides, BudgetConfig, BudgetSchedule, DriftConfig, DriftSpec, GraphSpec,
    LowerBoundSpec, PopulationSpec, Scenario, ScenarioConfig, StatusQuoSpec, SCHEMA_VERSION,
};
pub use population::{drifted_model, generate_population, maps_at, scalar_population};
pub use runner::{
    aggregate, median, metric, run_scenario, steady_sup, PolicyAggregate, PolicySeries,
    RealizationResult, RunResult, SeriesStats,
};
pub use sweeps::{pareto_sweep, quadrant, rho_sweep, ParetoRow, Quadrant, RhoRow};
