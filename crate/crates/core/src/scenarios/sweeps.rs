use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::CostSpec;
use crate::policies::{PolicyConfig, PolicyKind};

use super::config::ScenarioConfig;
use super::runner::{run_scenario, RunResult};

/// End-of-horizon values of a SOL run at one equal-allocation weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub rho: f64,
    /// Final equitability violation over its year-0 value.
    pub equitability_ratio: f64,
    /// Final equal-allocation violation over its year-0 value.
    pub equal_allocation_ratio: f64,
    /// Mean final outcome across communities, per indicator.
    pub mean_outcome: Vec<f64>,
    /// Standard deviation of final outcomes across communities, per indicator.
    pub outcome_std: Vec<f64>,
}

/// Position of a normalized point relative to the year-0 values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    /// Both metrics improved.
    I,
    /// Equitability improved, equal allocation did not.
    II,
    /// Both metrics worsened or stayed.
    III,
    /// Equal allocation improved, equitability did not.
    IV,
}

pub fn quadrant(equitability_ratio: f64, equal_allocation_ratio: f64) -> Quadrant {
    match (equitability_ratio < 1.0, equal_allocation_ratio < 1.0) {
        (true, true) => Quadrant::I,
        (true, false) => Quadrant::II,
        (false, false) => Quadrant::III,
        (false, true) => Quadrant::IV,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRow {
    pub rho: f64,
    pub sigma: f64,
    pub equitability_ratio: f64,
    pub equal_allocation_ratio: f64,
    pub quadrant: Quadrant,
}

fn sol_only(config: &ScenarioConfig) -> Vec<PolicyConfig> {
    let sol = config
        .policies
        .iter()
        .find(|p| p.kind == PolicyKind::Sol)
        .cloned()
        .unwrap_or_else(|| PolicyConfig::new(PolicyKind::Sol));
    vec![sol]
}

fn ratio(series: &[f64], what: &str) -> Result<f64> {
    let first = series[0];
    if first == 0.0 || !first.is_finite() {
        return Err(Error::Numerical(format!(
            "{what} is zero at year 0; ratio undefined"
        )));
    }
    Ok(series[series.len() - 1] / first)
}

/// Mean over realizations of the end-over-start ratios of both metrics.
fn mean_ratios(result: &RunResult) -> Result<(f64, f64)> {
    let mut eq = 0.0;
    let mut ea = 0.0;
    for r in &result.realizations {
        let s = &r.series[0];
        eq += ratio(&s.equitability, "equitability violation")?;
        ea += ratio(&s.equal_allocation, "equal-allocation violation")?;
    }
    let n = result.realizations.len() as f64;
    Ok((eq / n, ea / n))
}

fn check_horizon(config: &ScenarioConfig) -> Result<()> {
    if config.horizon == 0 {
        return Err(Error::Config(
            "sweeps need a horizon of at least one period".into(),
        ));
    }
    Ok(())
}

/// SOL runs over equal-allocation weights with the equitability weight held.
pub fn rho_sweep(config: &ScenarioConfig, rho_values: &[f64]) -> Result<Vec<RhoRow>> {
    check_horizon(config)?;
    let mut rows = Vec::with_capacity(rho_values.len());
    for &rho in rho_values {
        let mut cfg = config.clone();
        cfg.cost.rho = rho;
        cfg.policies = sol_only(config);
        let result = run_scenario(&cfg)?;
        let (equitability_ratio, equal_allocation_ratio) = mean_ratios(&result)?;
        let p = result.realizations[0].series[0].outcomes[0].dim();
        let mut mean_outcome = vec![0.0; p];
        let mut outcome_std = vec![0.0; p];
        for r in &result.realizations {
            let y = r.series[0].outcomes.last().expect("horizon >= 1");
            let n = y.n_nodes() as f64;
            for d in 0..p {
                let m = y.rows().map(|row| row[d]).sum::<f64>() / n;
                let var = y.rows().map(|row| (row[d] - m).powi(2)).sum::<f64>() / n;
                mean_outcome[d] += m;
                outcome_std[d] += var.sqrt();
            }
        }
        let nr = result.realizations.len() as f64;
        mean_outcome.iter_mut().for_each(|v| *v /= nr);
        outcome_std.iter_mut().for_each(|v| *v /= nr);
        rows.push(RhoRow {
            rho,
            equitability_ratio,
            equal_allocation_ratio,
            mean_outcome,
            outcome_std,
        });
    }
    Ok(rows)
}

/// SOL runs over the grid with the democratic cost: equitability weight
/// `1 - rho`, equal-allocation weight `rho`, dissatisfaction weight `sigma`
/// and the configured per-community preference weights.
pub fn pareto_sweep(
    config: &ScenarioConfig,
    rho_values: &[f64],
    sigma_values: &[f64],
) -> Result<Vec<ParetoRow>> {
    check_horizon(config)?;
    let mut rows = Vec::with_capacity(rho_values.len() * sigma_values.len());
    for &sigma in sigma_values {
        for &rho in rho_values {
            let mut cfg = config.clone();
            cfg.cost = CostSpec {
                metric: config.cost.metric,
                ..CostSpec::democratic(
                    rho,
                    sigma,
                    config.cost.omega_u.clone(),
                    config.cost.omega_y.clone(),
                )
            };
            cfg.policies = sol_only(config);
            let result = run_scenario(&cfg)?;
            let (equitability_ratio, equal_allocation_ratio) = mean_ratios(&result)?;
            rows.push(ParetoRow {
                rho,
                sigma,
                equitability_ratio,
                equal_allocation_ratio,
                quadrant: quadrant(equitability_ratio, equal_allocation_ratio),
            });
        }
    }
    Ok(rows)
}
