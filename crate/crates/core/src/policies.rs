//! Allocation policies.
//!
//! * **SOL** solves the equilibrium problem offline by projected gradient
//!   descent on the estimated static maps.
//! * **DCL** takes one projected gradient step per funding period, evaluating
//!   the outcome part of the gradient at the measured community feedback.
//! * **DCL+** is DCL followed by a least-squares refit of each community's
//!   static map on the data gathered so far.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{relearn_step, IoRecord, MapEstimate};
use crate::feasible::BudgetSet;
use crate::objectives::{CostModel, CostSpec};
use crate::profile::Profile;
use crate::rng::rng_for;
use crate::topology::NeighborhoodGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "SOL", alias = "sol")]
    Sol,
    #[serde(rename = "DCL", alias = "dcl")]
    Dcl,
    #[serde(rename = "DCL+", alias = "dcl_plus", alias = "DCLPlus")]
    DclPlus,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Sol => "SOL",
            PolicyKind::Dcl => "DCL",
            PolicyKind::DclPlus => "DCL+",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SOL" | "sol" => Ok(PolicyKind::Sol),
            "DCL" | "dcl" => Ok(PolicyKind::Dcl),
            "DCL+" | "dcl+" | "dcl_plus" => Ok(PolicyKind::DclPlus),
            other => Err(invalid(format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Step size, used when `auto_gamma` is off.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Use `1 / L` with `L` estimated from the current static maps.
    #[serde(default = "yes")]
    pub auto_gamma: bool,
    /// Iteration cap of the SOL inner solve.
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    /// SOL stops early once an iterate moves less than this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Most recent records used when DCL+ refits; `None` keeps all.
    #[serde(default)]
    pub relearn_window: Option<usize>,
}

fn default_gamma() -> f64 {
    1e-3
}
fn yes() -> bool {
    true
}
fn default_l_max() -> usize {
    50_000
}
fn default_tol() -> f64 {
    1e-10
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyConfig {
            kind,
            gamma: default_gamma(),
            auto_gamma: true,
            l_max: default_l_max(),
            tol: default_tol(),
            relearn_window: None,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self.auto_gamma = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.auto_gamma && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma must be positive"));
        }
        if self.kind == PolicyKind::Sol && self.l_max < 1 {
            return Err(invalid("l_max must be at least 1"));
        }
        if self.relearn_window == Some(0) {
            return Err(invalid("relearn window must be at least 1"));
        }
        Ok(())
    }

    /// Step size for the given maps.
    pub fn resolve_gamma(
        &self,
        graph: &NeighborhoodGraph,
        maps: &[DMatrix<f64>],
        spec: &CostSpec,
    ) -> Result<f64> {
        if self.auto_gamma {
            Ok(1.0 / lipschitz_estimate(graph, maps, spec)?)
        } else {
            Ok(self.gamma)
        }
    }
}

/// Result of an SOL solve.
#[derive(Debug, Clone)]
pub struct SolReport {
    pub u: Profile,
    pub gamma: f64,
    pub iterations: usize,
    /// Norm of the last iterate displacement.
    pub displacement: f64,
    /// Cost at the start point followed by the cost after every iteration.
    pub cost_trace: Vec<f64>,
}

impl SolReport {
    pub fn final_cost(&self) -> f64 {
        *self.cost_trace.last().expect("trace holds the start cost")
    }
}

pub fn maps_of(estimates: &[MapEstimate]) -> Vec<DMatrix<f64>> {
    estimates.iter().map(|e| e.g_hat.clone()).collect()
}

/// Equal split of each activity budget, raised to the lower bounds and
/// projected into the set.
pub fn default_start(set: &BudgetSet, n_nodes: usize) -> Result<Profile> {
    let m = set.n_activities();
    let mut u = Profile::zeros(n_nodes, m);
    for i in 0..n_nodes {
        for a in 0..m {
            u.node_mut(i)[a] = (set.s_max[a] / n_nodes as f64).max(set.lower_bound(i, a));
        }
    }
    set.project(&u)
}

/// SOL from the default start.
pub fn sol_solve(
    graph: &NeighborhoodGraph,
    maps: &[DMatrix<f64>],
    spec: &CostSpec,
    set: &BudgetSet,
    config: &PolicyConfig,
) -> Result<SolReport> {
    let start = default_start(set, graph.n_nodes())?;
    sol_solve_from(graph, maps, spec, set, config, &start)
}

/// Runs up to `l_max` projected gradient iterations from `start`.
pub fn sol_solve_from(
    graph: &NeighborhoodGraph,
    maps: &[DMatrix<f64>],
    spec: &CostSpec,
    set: &BudgetSet,
    config: &PolicyConfig,
    start: &Profile,
) -> Result<SolReport> {
    config.validate()?;
    let gamma = config.resolve_gamma(graph, maps, spec)?;
    sol_iterate(graph, maps, spec, set, config, start, gamma)
}

pub(crate) fn sol_iterate(
    graph: &NeighborhoodGraph,
    maps: &[DMatrix<f64>],
    spec: &CostSpec,
    set: &BudgetSet,
    config: &PolicyConfig,
    start: &Profile,
    gamma: f64,
) -> Result<SolReport> {
    let mut model = CostModel::new(spec, graph, maps)?;
    let mut u = set.project(start)?;
    let mut grad = Profile::zeros(u.n_nodes(), u.dim());
    let mut next = u.clone();
    let mut cost = model.cost(&u)?;
    let mut cost_trace = vec![cost];
    let mut displacement = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.l_max {
        model.gradient_into(&u, &mut grad)?;
        next.as_mut_slice().copy_from_slice(u.as_slice());
        next.axpy(-gamma, &grad);
        set.project_in_place(&mut next)?;
        displacement = next.distance(&u);
        let new_cost = model.cost(&next)?;
        iterations += 1;
        if new_cost > cost + 1e-9 * cost.abs().max(1.0) {
            return Err(Error::StepSize(format!(
                "cost rose from {cost} to {new_cost} at iteration {iterations}; use a smaller gamma (now {gamma})"
            )));
        }
        std::mem::swap(&mut u, &mut next);
        cost = new_cost;
        cost_trace.push(cost);
        if displacement < config.tol {
            break;
        }
    }
    Ok(SolReport {
        u,
        gamma,
        iterations,
        displacement,
        cost_trace,
    })
}

/// Largest eigenvalue of the (constant) Hessian of the cost under `y = G u`,
/// by power iteration on the Hessian-vector product.
pub fn lipschitz_estimate(
    graph: &NeighborhoodGraph,
    maps: &[DMatrix<f64>],
    spec: &CostSpec,
) -> Result<f64> {
    const MAX_ITERS: usize = 200_000;
    let mut model = CostModel::new(spec, graph, maps)?;
    let n = graph.n_nodes();
    let m = model.input_dim();
    let mut rng = rng_for(0x5eed, &[crate::rng::stream::SOLVER]);
    // The gradient is linear in u with no offset, so it is the Hessian product.
    let mut v = Profile::from_flat(m, (0..n * m).map(|_| rng.random::<f64>() - 0.5).collect())?;
    v.scale(1.0 / v.norm());
    let mut hv = Profile::zeros(n, m);
    for _ in 0..MAX_ITERS {
        model.gradient_into(&v, &mut hv)?;
        let lambda = v.dot(&hv);
        let hv_norm = hv.norm();
        if hv_norm == 0.0 {
            return Err(Error::Estimation("cost has zero curvature".into()));
        }
        let mut resid = hv.clone();
        resid.axpy(-lambda, &v);
        if resid.norm() <= 1e-9 * lambda.abs() {
            if lambda <= 0.0 {
                return Err(Error::Estimation("nonpositive curvature estimate".into()));
            }
            return Ok(lambda);
        }
        std::mem::swap(&mut v, &mut hv);
        v.scale(1.0 / hv_norm);
    }
    Err(Error::Estimation(format!(
        "power iteration did not converge in {MAX_ITERS} iterations"
    )))
}

/// Mutable state of a feedback policy between funding periods.
#[derive(Debug, Clone)]
pub struct PolicyState {
    pub current_u: Profile,
    pub estimates: Vec<MapEstimate>,
    pub period: usize,
    pub gamma: f64,
}

impl PolicyState {
    /// DCL/DCL+ warm start: the SOL solution under the current estimates.
    pub fn warm_start(
        graph: &NeighborhoodGraph,
        estimates: Vec<MapEstimate>,
        spec: &CostSpec,
        set: &BudgetSet,
        config: &PolicyConfig,
    ) -> Result<Self> {
        let maps = maps_of(&estimates);
        let report = sol_solve(graph, &maps, spec, set, config)?;
        Ok(PolicyState {
            current_u: report.u,
            estimates,
            period: 0,
            gamma: report.gamma,
        })
    }

    pub fn maps(&self) -> Vec<DMatrix<f64>> {
        maps_of(&self.estimates)
    }
}

/// One projected feedback step `u+ = P(u - gamma * grad(u, y_measured))`.
pub fn dcl_step(
    state: &PolicyState,
    y_measured: &Profile,
    graph: &NeighborhoodGraph,
    spec: &CostSpec,
    set: &BudgetSet,
) -> Result<PolicyState> {
    let maps = state.maps();
    let mut model = CostModel::new(spec, graph, &maps)?;
    let mut grad = Profile::zeros(state.current_u.n_nodes(), state.current_u.dim());
    model.feedback_gradient_into(&state.current_u, y_measured, &mut grad)?;
    let mut next = state.current_u.clone();
    next.axpy(-state.gamma, &grad);
    if !next.is_finite() {
        return Err(Error::Numerical("nonfinite DCL iterate".into()));
    }
    set.project_in_place(&mut next)?;
    Ok(PolicyState {
        current_u: next,
        estimates: state.estimates.clone(),
        period: state.period + 1,
        gamma: state.gamma,
    })
}

/// Adds the record `(u, y)` of every community to its history, refits, and
/// adopts each refit whose inputs span the input space. With `auto_gamma`
/// the step size is re-derived when any map changed.
pub fn relearn_all(
    state: &mut PolicyState,
    u: &Profile,
    y: &Profile,
    period: i64,
    graph: &NeighborhoodGraph,
    spec: &CostSpec,
    config: &PolicyConfig,
) -> Result<()> {
    let mut changed = false;
    for (i, est) in state.estimates.iter_mut().enumerate() {
        let record = IoRecord {
            community: i,
            period,
            u: u.node(i).to_vec(),
            y: y.node(i).to_vec(),
        };
        let mut refit = relearn_step(est, record, config.relearn_window)?;
        if refit.rank_deficient {
            refit.g_hat = est.g_hat.clone();
        } else if refit.g_hat != est.g_hat {
            changed = true;
        }
        *est = refit;
    }
    if changed && config.auto_gamma {
        state.gamma = config.resolve_gamma(graph, &state.maps(), spec)?;
    }
    Ok(())
}

/// [`dcl_step`], then [`relearn_all`] on the record pairing the allocation
/// that was in force with the measurement it produced.
pub fn dclplus_step(
    state: &PolicyState,
    y_measured: &Profile,
    graph: &NeighborhoodGraph,
    spec: &CostSpec,
    set: &BudgetSet,
    config: &PolicyConfig,
) -> Result<PolicyState> {
    let mut next = dcl_step(state, y_measured, graph, spec, set)?;
    let period = next.period as i64;
    relearn_all(
        &mut next,
        &state.current_u,
        y_measured,
        period,
        graph,
        spec,
        config,
    )?;
    Ok(next)
}
