use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::CommunityModel;
use crate::error::{Error, Result};
use crate::estimation::{perturb_estimate, MapEstimate};
use crate::objectives::{
    equal_allocation_cost, equitability_violation, predict_outcomes, total_cost,
};
use crate::policies::{
    dcl_step, dclplus_step, default_start, relearn_all, sol_iterate, sol_solve_from, PolicyConfig,
    PolicyKind, PolicyState,
};
use crate::profile::Profile;
use crate::rng::{derive_seed, rng_for, stream};

use super::config::{Scenario, ScenarioConfig};
use super::population::{drifted_model, maps_at};

/// Metric names used in series, CSV output and aggregates.
pub mod metric {
    pub const EQUITABILITY: &str = "equitability";
    pub const REALIZED_EQUITABILITY: &str = "realized_equitability";
    pub const EQUAL_ALLOCATION: &str = "equal_allocation";
    pub const TOTAL_COST: &str = "total_cost";
    pub const MAP_ERROR: &str = "map_error";
    pub const TRACKING_ERROR: &str = "tracking_error";
}

/// Per-period record of one policy in one realization.
///
/// Entry `k` describes the start of funding period `k`, when the allocation
/// in force is the previous decision (the status quo for `k = 0`):
///
/// * `outcomes[k]` is the long-run outcome `G(k) u` of that allocation under
///   the true maps; `equitability`, `equal_allocation` and `total_cost` are
///   evaluated on it.
/// * `realized_outcomes[k]` is the noise-free plant output at that time and
///   `realized_equitability[k]` its violation.
/// * `allocations[k]` is the decision taken in period `k`, `map_error[k]` the
///   Frobenius distance between the estimates held after it and the true
///   maps, and `tracking_error[k]` its distance to the SOL decision under
///   the true maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySeries {
    pub policy: PolicyKind,
    pub equitability: Vec<f64>,
    pub realized_equitability: Vec<f64>,
    pub equal_allocation: Vec<f64>,
    pub total_cost: Vec<f64>,
    pub map_error: Vec<f64>,
    pub tracking_error: Option<Vec<f64>>,
    pub allocations: Vec<Profile>,
    pub outcomes: Vec<Profile>,
    pub realized_outcomes: Vec<Profile>,
}

impl PolicySeries {
    fn new(policy: PolicyKind, horizon: usize, tracking: bool) -> Self {
        PolicySeries {
            policy,
            equitability: Vec::with_capacity(horizon),
            realized_equitability: Vec::with_capacity(horizon),
            equal_allocation: Vec::with_capacity(horizon),
            total_cost: Vec::with_capacity(horizon),
            map_error: Vec::with_capacity(horizon),
            tracking_error: tracking.then(|| Vec::with_capacity(horizon)),
            allocations: Vec::with_capacity(horizon),
            outcomes: Vec::with_capacity(horizon),
            realized_outcomes: Vec::with_capacity(horizon),
        }
    }

    pub fn metric(&self, name: &str) -> Option<&[f64]> {
        match name {
            metric::EQUITABILITY => Some(&self.equitability),
            metric::REALIZED_EQUITABILITY => Some(&self.realized_equitability),
            metric::EQUAL_ALLOCATION => Some(&self.equal_allocation),
            metric::TOTAL_COST => Some(&self.total_cost),
            metric::MAP_ERROR => Some(&self.map_error),
            metric::TRACKING_ERROR => self.tracking_error.as_deref(),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.equitability.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equitability.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub realization: usize,
    pub seed: u64,
    pub series: Vec<PolicySeries>,
}

/// Mean and sample standard deviation per period across realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl SeriesStats {
    pub fn from_series(series: &[&[f64]]) -> Self {
        let len = series.first().map_or(0, |s| s.len());
        let n = series.len() as f64;
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for k in 0..len {
            let m = series.iter().map(|s| s[k]).sum::<f64>() / n;
            mean[k] = m;
            if series.len() > 1 {
                let var = series.iter().map(|s| (s[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
                std[k] = var.sqrt();
            }
        }
        SeriesStats { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAggregate {
    pub policy: PolicyKind,
    pub metrics: Vec<(String, SeriesStats)>,
}

impl PolicyAggregate {
    pub fn stats(&self, name: &str) -> Option<&SeriesStats> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub name: String,
    pub seed: u64,
    pub horizon: usize,
    pub n_realizations: usize,
    pub policies: Vec<PolicyKind>,
    pub realizations: Vec<RealizationResult>,
    pub aggregates: Vec<PolicyAggregate>,
}

impl RunResult {
    pub fn series(&self, realization: usize, policy: PolicyKind) -> Option<&PolicySeries> {
        self.realizations
            .get(realization)?
            .series
            .iter()
            .find(|s| s.policy == policy)
    }

    /// Last value of `metric` for `policy`, one entry per realization.
    pub fn final_values(&self, policy: PolicyKind, name: &str) -> Vec<f64> {
        self.realizations
            .iter()
            .filter_map(|r| r.series.iter().find(|s| s.policy == policy))
            .filter_map(|s| s.metric(name).and_then(|v| v.last().copied()))
            .collect()
    }

    pub fn median_final(&self, policy: PolicyKind, name: &str) -> Option<f64> {
        median(&self.final_values(policy, name))
    }

    pub fn aggregate(&self, policy: PolicyKind) -> Option<&PolicyAggregate> {
        self.aggregates.iter().find(|a| a.policy == policy)
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Largest value over the second half of a series (`k >= K / 2`).
pub fn steady_sup(series: &[f64]) -> f64 {
    series[series.len() / 2..]
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Recomputes the per-policy aggregates from the realizations.
pub fn aggregate(
    policies: &[PolicyKind],
    realizations: &[RealizationResult],
) -> Vec<PolicyAggregate> {
    policies
        .iter()
        .map(|&policy| {
            let runs: Vec<&PolicySeries> = realizations
                .iter()
                .filter_map(|r| r.series.iter().find(|s| s.policy == policy))
                .collect();
            let mut metrics = Vec::new();
            for name in [
                metric::EQUITABILITY,
                metric::REALIZED_EQUITABILITY,
                metric::EQUAL_ALLOCATION,
                metric::TOTAL_COST,
                metric::MAP_ERROR,
                metric::TRACKING_ERROR,
            ] {
                let series: Option<Vec<&[f64]>> = runs.iter().map(|s| s.metric(name)).collect();
                if let Some(series) = series.filter(|s| !s.is_empty()) {
                    metrics.push((name.to_string(), SeriesStats::from_series(&series)));
                }
            }
            PolicyAggregate { policy, metrics }
        })
        .collect()
}

fn outputs(plants: &[CommunityModel]) -> Result<Profile> {
    let p = plants[0].c().nrows();
    Profile::from_flat(
        p,
        plants
            .iter()
            .flat_map(|m| m.output().iter().copied().collect::<Vec<_>>())
            .collect(),
    )
}

fn map_error(estimates: &[DMatrix<f64>], truth: &[DMatrix<f64>]) -> f64 {
    estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Data shared by every realization of a run.
struct Shared<'a> {
    scenario: &'a Scenario,
    /// Plants with drifted output matrices, per period (empty without drift).
    drifted: Vec<Vec<CommunityModel>>,
    true_maps: Vec<Vec<DMatrix<f64>>>,
    optimum: Option<Vec<Profile>>,
}

impl Scenario {
    /// Initial estimates of realization `realization`: the true maps with
    /// the configured relative error.
    pub fn initial_estimates(&self, realization: usize) -> Result<Vec<MapEstimate>> {
        let rel = self.config.estimate_error;
        let seed_r = derive_seed(self.config.seed, &[realization as u64]);
        self.true_maps
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if rel == 0.0 {
                    Ok(MapEstimate::from_matrix(g.clone()))
                } else {
                    perturb_estimate(g, rel, derive_seed(seed_r, &[i as u64]))
                }
            })
            .collect()
    }

    pub fn budget_at(&self, k: usize) -> crate::feasible::BudgetSet {
        self.base_set.with_s_max(self.schedule.at(k))
    }

    /// SOL decisions under the true maps for every period.
    pub fn optimum_path(&self) -> Result<Vec<Profile>> {
        let cfg = PolicyConfig::new(PolicyKind::Sol);
        let mut out = Vec::with_capacity(self.config.horizon);
        let mut start: Option<Profile> = None;
        for k in 0..self.config.horizon {
            let maps = maps_at(&self.models, self.drift.as_ref(), k)?;
            let set = self.budget_at(k + 1);
            let from = match start.take() {
                Some(u) => u,
                None => default_start(&set, self.graph.n_nodes())?,
            };
            let report = sol_solve_from(&self.graph, &maps, &self.config.cost, &set, &cfg, &from)?;
            out.push(report.u.clone());
            start = Some(report.u);
        }
        Ok(out)
    }

    pub fn run(&self) -> Result<RunResult> {
        let cfg = &self.config;
        let horizon = cfg.horizon;
        let drifted = match &self.drift {
            Some(d) => (0..horizon)
                .map(|k| {
                    self.models
                        .iter()
                        .map(|m| drifted_model(m, d, k))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let true_maps = (0..horizon)
            .map(|k| maps_at(&self.models, self.drift.as_ref(), k))
            .collect::<Result<Vec<_>>>()?;
        let optimum = if cfg.track_optimum {
            Some(self.optimum_path()?)
        } else {
            None
        };
        let shared = Shared {
            scenario: self,
            drifted,
            true_maps,
            optimum,
        };
        let realizations = (0..cfg.n_realizations)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(cfg.seed, &[r as u64]);
                run_realization(&shared, r, seed).map_err(|e| Error::Realization {
                    realization: r,
                    seed,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let policies: Vec<PolicyKind> = cfg.policies.iter().map(|p| p.kind).collect();
        let aggregates = aggregate(&policies, &realizations);
        Ok(RunResult {
            name: cfg.name.clone(),
            seed: cfg.seed,
            horizon,
            n_realizations: cfg.n_realizations,
            policies,
            realizations,
            aggregates,
        })
    }
}

/// Validates `config` and runs every realization.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResult> {
    config.build()?.run()
}

fn run_realization(
    shared: &Shared<'_>,
    realization: usize,
    seed: u64,
) -> Result<RealizationResult> {
    let estimates = shared.scenario.initial_estimates(realization)?;
    let series = shared
        .scenario
        .config
        .policies
        .iter()
        .map(|policy| run_policy(shared, policy, &estimates, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(RealizationResult {
        realization,
        seed,
        series,
    })
}

fn run_policy(
    shared: &Shared<'_>,
    policy: &PolicyConfig,
    estimates: &[MapEstimate],
    seed: u64,
) -> Result<PolicySeries> {
    let sc = shared.scenario;
    let cfg = &sc.config;
    let spec = &cfg.cost;
    let graph = &sc.graph;
    let horizon = cfg.horizon;
    let mut out = PolicySeries::new(policy.kind, horizon, shared.optimum.is_some());
    // Every policy sees the same noise draws within a realization.
    let mut feedback_rng = rng_for(seed, &[stream::FEEDBACK]);
    let mut process_rng = rng_for(seed, &[stream::PROCESS]);
    let mut plants = sc.models.clone();
    let mut in_force = sc.status_quo.clone();

    let fixed_maps: Vec<DMatrix<f64>> = estimates.iter().map(|e| e.g_hat.clone()).collect();
    let sol_gamma = if policy.kind == PolicyKind::Sol && horizon > 0 {
        policy.resolve_gamma(graph, &fixed_maps, spec)?
    } else {
        0.0
    };
    let mut sol_u: Option<Profile> = None;
    let mut state: Option<PolicyState> = None;

    for k in 0..horizon {
        if let Some(models_k) = shared.drifted.get(k) {
            for (plant, base) in plants.iter_mut().zip(models_k) {
                let x = std::mem::replace(&mut plant.state, base.state.clone());
                *plant = base.clone();
                plant.state = x;
            }
        }
        let y_true = outputs(&plants)?;
        let y_measured = {
            let p = y_true.dim();
            let mut flat = Vec::with_capacity(plants.len() * p);
            for plant in &plants {
                flat.extend(
                    plant
                        .measure(&cfg.noise, &mut feedback_rng)?
                        .iter()
                        .copied(),
                );
            }
            Profile::from_flat(p, flat)?
        };
        let y_long_run = predict_outcomes(&shared.true_maps[k], &in_force)?;
        out.equitability
            .push(equitability_violation(spec.metric, graph, &y_long_run)?);
        out.realized_equitability
            .push(equitability_violation(spec.metric, graph, &y_true)?);
        out.equal_allocation.push(equal_allocation_cost(&in_force));
        out.total_cost
            .push(total_cost(spec, graph, &in_force, &y_long_run)?);
        out.outcomes.push(y_long_run);
        out.realized_outcomes.push(y_true);

        let set = sc.budget_at(k + 1);
        let decision = match policy.kind {
            PolicyKind::Sol => {
                let start = match sol_u.take() {
                    Some(u) => u,
                    None => default_start(&set, graph.n_nodes())?,
                };
                let report =
                    sol_iterate(graph, &fixed_maps, spec, &set, policy, &start, sol_gamma)?;
                out.map_error
                    .push(map_error(&fixed_maps, &shared.true_maps[k]));
                sol_u = Some(report.u.clone());
                report.u
            }
            PolicyKind::Dcl | PolicyKind::DclPlus => {
                let next = match state.take() {
                    None => {
                        let mut s =
                            PolicyState::warm_start(graph, estimates.to_vec(), spec, &set, policy)?;
                        if policy.kind == PolicyKind::DclPlus {
                            relearn_all(&mut s, &in_force, &y_measured, 0, graph, spec, policy)?;
                        }
                        s
                    }
                    Some(s) if policy.kind == PolicyKind::Dcl => {
                        dcl_step(&s, &y_measured, graph, spec, &set)?
                    }
                    Some(s) => dclplus_step(&s, &y_measured, graph, spec, &set, policy)?,
                };
                out.map_error
                    .push(map_error(&next.maps(), &shared.true_maps[k]));
                let u = next.current_u.clone();
                state = Some(next);
                u
            }
        };
        if let (Some(track), Some(opt)) = (out.tracking_error.as_mut(), shared.optimum.as_ref()) {
            track.push(decision.distance(&opt[k]));
        }
        for (i, plant) in plants.iter_mut().enumerate() {
            plant.advance(decision.node(i), &cfg.noise, &mut process_rng)?;
        }
        out.allocations.push(decision.clone());
        in_force = decision;
    }
    Ok(out)
}
