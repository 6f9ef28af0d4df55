//! Shipped scenario configurations.
//!
//! The nine-country health campaign is a synthetic replicate: gains and
//! status-quo spending approximate the published point clouds, and the
//! adjacency is a geographic reading of the region.

use serde::{Deserialize, Serialize};

use crate::dynamics::FeedbackMode;
use crate::error::Result;

use super::config::{DriftConfig, ScenarioConfig};

pub const NINE_COUNTRY_JSON: &str = include_str!("../../data/nine_country.json");
pub const MALAWI_JSON: &str = include_str!("../../data/malawi.json");
/// Synthetic 1985-2015 expenditure/life-expectancy history of the nine countries.
pub const NINE_COUNTRY_HISTORY_CSV: &str = include_str!("../../data/nine_country_history.csv");

/// Static gain the drifting maps move towards.
pub const DRIFT_TARGET_GAIN: f64 = 4.0;

/// Variants of the nine-country campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HealthScenario {
    /// Exact dynamics, no noise.
    Nominal,
    /// Multiplicative feedback noise with the given standard deviation.
    FeedbackNoise { std: f64 },
    /// Map estimates with the given relative error.
    EstimateError { rel_std: f64 },
    /// Estimate error plus a linear drift of every map towards the target gain.
    Drift { rel_std: f64 },
}

pub fn nine_country() -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(NINE_COUNTRY_JSON)
}

pub fn nine_country_with(scenario: HealthScenario) -> Result<ScenarioConfig> {
    let mut cfg = nine_country()?;
    match scenario {
        HealthScenario::Nominal => {}
        HealthScenario::FeedbackNoise { std } => {
            cfg.noise.feedback_std = std;
            cfg.noise.feedback_mode = FeedbackMode::Multiplicative;
        }
        HealthScenario::EstimateError { rel_std } => cfg.estimate_error = rel_std,
        HealthScenario::Drift { rel_std } => {
            cfg.estimate_error = rel_std;
            cfg.drift = Some(DriftConfig {
                target_g: vec![vec![vec![DRIFT_TARGET_GAIN]]],
            });
        }
    }
    Ok(cfg)
}

pub fn malawi() -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(MALAWI_JSON)
}

/// Malawi setting used for the equality/equitability/preference trade-off:
/// exact maps and a single realization.
pub fn malawi_pareto() -> Result<ScenarioConfig> {
    let mut cfg = malawi()?;
    cfg.estimate_error = 0.0;
    cfg.n_realizations = 1;
    Ok(cfg)
}

/// `{0, 0.1, ..., 1.0}`.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}
