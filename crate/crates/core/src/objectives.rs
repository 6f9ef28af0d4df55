//! Equitability metrics, allocation costs and their gradients.
//!
//! The composite cost over allocations `u` and outcomes `y` is
//!
//! ```text
//! f(u, y) = rho * sum_{i != j} |u_i - u_j|^2
//!         + equity_weight * sum_i psi_i(y)
//!         + sigma * sum_i Delta_i(u, y)
//! ```
//!
//! where `psi_i` is either the squared neighborhood deviation (`Neqm`) or its
//! infinity-norm variant (`WcNeqm`), and
//! `Delta_i = wu_i |u_i - mean_{N_i} u|^2 + wy_i |y_i - mean_{N_i} y|^2`.
//!
//! Gradients are taken with respect to every `u_i` of the full sum, with the
//! outcome either predicted through the estimated static maps (`y_j = G_j u_j`,
//! [`cost_gradient`]) or supplied from measurements ([`feedback_gradient`]).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::profile::{sq_dist, Profile};
use crate::topology::NeighborhoodGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Metric {
    #[default]
    #[serde(rename = "NEqM", alias = "neqm")]
    Neqm,
    #[serde(rename = "WC-NEqM", alias = "wc_neqm")]
    WcNeqm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    #[serde(default)]
    pub metric: Metric,
    /// Weight on the equal-allocation cost.
    #[serde(default)]
    pub rho: f64,
    /// Weight on community dissatisfaction.
    #[serde(default)]
    pub sigma: f64,
    /// Coefficient on the equitability sum.
    #[serde(default = "one")]
    pub equity_weight: f64,
    /// Per-community allocation-discrepancy weights; empty means all zero.
    #[serde(default)]
    pub omega_u: Vec<f64>,
    /// Per-community outcome-discrepancy weights; empty means all zero.
    #[serde(default)]
    pub omega_y: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec::equitability_only()
    }
}

impl CostSpec {
    /// Pure NEqM sum, no allocation terms.
    pub fn equitability_only() -> Self {
        CostSpec {
            metric: Metric::Neqm,
            rho: 0.0,
            sigma: 0.0,
            equity_weight: 1.0,
            omega_u: Vec::new(),
            omega_y: Vec::new(),
        }
    }

    /// `rho * phi + sum psi` (equity weight fixed at one).
    pub fn with_equal_allocation(rho: f64) -> Self {
        CostSpec {
            rho,
            ..CostSpec::equitability_only()
        }
    }

    /// `rho * phi + (1 - rho) * sum psi + sigma * sum Delta`.
    pub fn democratic(rho: f64, sigma: f64, omega_u: Vec<f64>, omega_y: Vec<f64>) -> Self {
        CostSpec {
            metric: Metric::Neqm,
            rho,
            sigma,
            equity_weight: 1.0 - rho,
            omega_u,
            omega_y,
        }
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        for (name, v) in [
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("equity_weight", self.equity_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "cost weight {name} must be finite and nonnegative"
                )));
            }
        }
        for (name, w) in [("omega_u", &self.omega_u), ("omega_y", &self.omega_y)] {
            if !w.is_empty() && w.len() != n_nodes {
                return Err(invalid(format!(
                    "{name} has length {}, expected {n_nodes}",
                    w.len()
                )));
            }
            if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid(format!("{name} entries must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn omega_u_at(&self, i: usize) -> f64 {
        self.omega_u.get(i).copied().unwrap_or(0.0)
    }

    pub fn omega_y_at(&self, i: usize) -> f64 {
        self.omega_y.get(i).copied().unwrap_or(0.0)
    }
}

fn check_profile(graph: &NeighborhoodGraph, p: &Profile, what: &str) -> Result<()> {
    if p.n_nodes() != graph.n_nodes() {
        return Err(invalid(format!(
            "{what} profile has {} nodes, graph has {}",
            p.n_nodes(),
            graph.n_nodes()
        )));
    }
    Ok(())
}

/// Squared Euclidean distance of `y_i` from its neighborhood mean.
pub fn neqm(graph: &NeighborhoodGraph, y: &Profile, i: usize) -> Result<f64> {
    let mean = graph.neighbor_mean(y, i)?;
    Ok(sq_dist(y.node(i), &mean))
}

/// Infinity-norm distance of `y_i` from its neighborhood mean.
pub fn wc_neqm(graph: &NeighborhoodGraph, y: &Profile, i: usize) -> Result<f64> {
    let mean = graph.neighbor_mean(y, i)?;
    Ok(y.node(i)
        .iter()
        .zip(&mean)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

pub fn metric_value(
    metric: Metric,
    graph: &NeighborhoodGraph,
    y: &Profile,
    i: usize,
) -> Result<f64> {
    match metric {
        Metric::Neqm => neqm(graph, y, i),
        Metric::WcNeqm => wc_neqm(graph, y, i),
    }
}

/// `sum_i psi_i(y)`.
pub fn equitability_violation(
    metric: Metric,
    graph: &NeighborhoodGraph,
    y: &Profile,
) -> Result<f64> {
    check_profile(graph, y, "outcome")?;
    (0..graph.n_nodes())
        .map(|i| metric_value(metric, graph, y, i))
        .sum()
}

/// `sum_{i,j} |u_i - u_j|^2` over ordered pairs.
pub fn equal_allocation_cost(u: &Profile) -> f64 {
    // sum_{i,j} |u_i - u_j|^2 = 2 N sum_i |u_i - mean|^2
    let n = u.n_nodes();
    if n == 0 {
        return 0.0;
    }
    let mut mean = vec![0.0; u.dim()];
    for row in u.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    2.0 * n as f64 * u.rows().map(|row| sq_dist(row, &mean)).sum::<f64>()
}

pub fn dissatisfaction(
    graph: &NeighborhoodGraph,
    u: &Profile,
    y: &Profile,
    i: usize,
    omega_u: f64,
    omega_y: f64,
) -> Result<f64> {
    check_profile(graph, u, "allocation")?;
    check_profile(graph, y, "outcome")?;
    let mut total = 0.0;
    if omega_u != 0.0 {
        total += omega_u * neqm(graph, u, i)?;
    }
    if omega_y != 0.0 {
        total += omega_y * neqm(graph, y, i)?;
    }
    Ok(total)
}

pub fn total_cost(
    spec: &CostSpec,
    graph: &NeighborhoodGraph,
    u: &Profile,
    y: &Profile,
) -> Result<f64> {
    check_profile(graph, u, "allocation")?;
    check_profile(graph, y, "outcome")?;
    let mut cost = 0.0;
    if spec.rho != 0.0 {
        cost += spec.rho * equal_allocation_cost(u);
    }
    if spec.equity_weight != 0.0 {
        cost += spec.equity_weight * equitability_violation(spec.metric, graph, y)?;
    }
    if spec.sigma != 0.0 {
        for i in 0..graph.n_nodes() {
            cost += spec.sigma
                * dissatisfaction(graph, u, y, i, spec.omega_u_at(i), spec.omega_y_at(i))?;
        }
    }
    Ok(cost)
}

/// `y_j = G_j u_j` for every community.
pub fn predict_outcomes(maps: &[DMatrix<f64>], u: &Profile) -> Result<Profile> {
    if maps.len() != u.n_nodes() {
        return Err(invalid("one static map per community is required"));
    }
    let p = maps.first().map_or(0, |g| g.nrows());
    let mut y = Profile::zeros(u.n_nodes(), p);
    for (i, g) in maps.iter().enumerate() {
        if g.ncols() != u.dim() || g.nrows() != p {
            return Err(invalid(format!("static map {i} has the wrong shape")));
        }
        matvec(g, u.node(i), y.node_mut(i));
    }
    Ok(y)
}

/// Cost with `y` predicted through the static maps.
pub fn predicted_cost(
    spec: &CostSpec,
    graph: &NeighborhoodGraph,
    u: &Profile,
    maps: &[DMatrix<f64>],
) -> Result<f64> {
    let y = predict_outcomes(maps, u)?;
    total_cost(spec, graph, u, &y)
}

pub(crate) fn matvec(g: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = (0..g.ncols()).map(|c| g[(r, c)] * x[c]).sum();
    }
}

fn matvec_t_add(g: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (c, o) in out.iter_mut().enumerate() {
        *o += (0..g.nrows()).map(|r| g[(r, c)] * x[r]).sum::<f64>();
    }
}

/// Allocation-free evaluator of the composite cost and its gradient for a
/// fixed spec, graph and set of static maps. Used in the inner solver loops.
pub struct CostModel<'a> {
    spec: &'a CostSpec,
    graph: &'a NeighborhoodGraph,
    maps: &'a [DMatrix<f64>],
    /// `equity_weight + sigma * omega_y_i`
    out_weight: Vec<f64>,
    /// `sigma * omega_u_i`
    in_weight: Vec<f64>,
    dev_y: Profile,
    dev_u: Profile,
    y: Profile,
    scratch: Vec<f64>,
}

impl<'a> CostModel<'a> {
    pub fn new(
        spec: &'a CostSpec,
        graph: &'a NeighborhoodGraph,
        maps: &'a [DMatrix<f64>],
    ) -> Result<Self> {
        if spec.metric != Metric::Neqm {
            return Err(Error::UnsupportedMetric(
                "WC-NEqM is not differentiable; use it for evaluation only".into(),
            ));
        }
        let n = graph.n_nodes();
        spec.validate(n)?;
        graph.require_no_isolated()?;
        if maps.len() != n {
            return Err(invalid(format!(
                "expected {n} static maps, got {}",
                maps.len()
            )));
        }
        let (p, m) = maps.first().map_or((0, 0), |g| (g.nrows(), g.ncols()));
        if maps.iter().any(|g| g.nrows() != p || g.ncols() != m) {
            return Err(invalid("static maps must share one shape"));
        }
        let out_weight = (0..n)
            .map(|i| spec.equity_weight + spec.sigma * spec.omega_y_at(i))
            .collect();
        let in_weight = (0..n).map(|i| spec.sigma * spec.omega_u_at(i)).collect();
        Ok(CostModel {
            spec,
            graph,
            maps,
            out_weight,
            in_weight,
            dev_y: Profile::zeros(n, p),
            dev_u: Profile::zeros(n, m),
            y: Profile::zeros(n, p),
            scratch: vec![0.0; p.max(m)],
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn input_dim(&self) -> usize {
        self.dev_u.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.dev_y.dim()
    }

    fn check_u(&self, u: &Profile) -> Result<()> {
        if u.n_nodes() != self.n_nodes() || u.dim() != self.input_dim() {
            return Err(invalid("allocation profile has the wrong shape"));
        }
        Ok(())
    }

    fn fill_deviations(
        graph: &NeighborhoodGraph,
        v: &Profile,
        dev: &mut Profile,
        scratch: &mut [f64],
    ) {
        let d = v.dim();
        for i in 0..graph.n_nodes() {
            let mean = &mut scratch[..d];
            graph
                .neighbor_mean_into(v, i, mean)
                .expect("isolated nodes rejected at construction");
            for ((o, x), m) in dev.node_mut(i).iter_mut().zip(v.node(i)).zip(mean.iter()) {
                *o = x - m;
            }
        }
    }

    /// Gradient with `y = G u`.
    pub fn gradient_into(&mut self, u: &Profile, out: &mut Profile) -> Result<()> {
        self.check_u(u)?;
        for i in 0..self.n_nodes() {
            matvec(&self.maps[i], u.node(i), self.y.node_mut(i));
        }
        let y = std::mem::replace(&mut self.y, Profile::zeros(0, 0));
        let res = self.feedback_gradient_into(u, &y, out);
        self.y = y;
        res
    }

    /// Gradient with externally supplied outcomes `y`.
    pub fn feedback_gradient_into(
        &mut self,
        u: &Profile,
        y: &Profile,
        out: &mut Profile,
    ) -> Result<()> {
        self.check_u(u)?;
        if y.n_nodes() != self.n_nodes() || y.dim() != self.output_dim() {
            return Err(invalid("outcome profile has the wrong shape"));
        }
        if !out.same_shape(u) {
            *out = Profile::zeros(u.n_nodes(), u.dim());
        }
        let n = self.n_nodes();
        let p = self.output_dim();
        let m = self.input_dim();
        let graph = self.graph;
        Self::fill_deviations(graph, y, &mut self.dev_y, &mut self.scratch);
        let use_inputs = self.in_weight.iter().any(|w| *w != 0.0);
        if use_inputs {
            Self::fill_deviations(graph, u, &mut self.dev_u, &mut self.scratch);
        }

        // equal-allocation part: 4 rho sum_j (u_i - u_j) = 4 rho N (u_i - mean)
        let mut mean_u = vec![0.0; m];
        if self.spec.rho != 0.0 {
            for row in u.rows() {
                for (a, v) in mean_u.iter_mut().zip(row) {
                    *a += v;
                }
            }
            mean_u.iter_mut().for_each(|a| *a /= n as f64);
        }
        let rho_coef = 4.0 * self.spec.rho * n as f64;

        for i in 0..n {
            // d/dy_i of sum_j c_j |d_j|^2 = 2 c_i d_i - sum_{j in N_i} (2 c_j / N_j) d_j
            let gy = &mut self.scratch[..p];
            for (k, g) in gy.iter_mut().enumerate() {
                *g = 2.0 * self.out_weight[i] * self.dev_y.node(i)[k];
            }
            for &j in graph.neighbors(i) {
                let coef = 2.0 * self.out_weight[j] / graph.degree(j) as f64;
                for (g, d) in gy.iter_mut().zip(self.dev_y.node(j)) {
                    *g -= coef * d;
                }
            }
            let row = out.node_mut(i);
            row.fill(0.0);
            matvec_t_add(&self.maps[i], gy, row);

            if self.spec.rho != 0.0 {
                for ((o, x), a) in row.iter_mut().zip(u.node(i)).zip(&mean_u) {
                    *o += rho_coef * (x - a);
                }
            }
            if use_inputs {
                let wi = 2.0 * self.in_weight[i];
                for (o, e) in row.iter_mut().zip(self.dev_u.node(i)) {
                    *o += wi * e;
                }
                for &j in graph.neighbors(i) {
                    let coef = 2.0 * self.in_weight[j] / graph.degree(j) as f64;
                    for (o, e) in row.iter_mut().zip(self.dev_u.node(j)) {
                        *o -= coef * e;
                    }
                }
            }
        }
        if !out.is_finite() {
            return Err(Error::Numerical("nonfinite gradient".into()));
        }
        Ok(())
    }

    /// Cost with `y = G u`.
    pub fn cost(&mut self, u: &Profile) -> Result<f64> {
        self.check_u(u)?;
        for i in 0..self.n_nodes() {
            matvec(&self.maps[i], u.node(i), self.y.node_mut(i));
        }
        let graph = self.graph;
        Self::fill_deviations(graph, &self.y, &mut self.dev_y, &mut self.scratch);
        let mut cost = 0.0;
        for i in 0..self.n_nodes() {
            let dy: f64 = self.dev_y.node(i).iter().map(|v| v * v).sum();
            cost += self.out_weight[i] * dy;
        }
        if self.in_weight.iter().any(|w| *w != 0.0) {
            Self::fill_deviations(graph, u, &mut self.dev_u, &mut self.scratch);
            for i in 0..self.n_nodes() {
                let du: f64 = self.dev_u.node(i).iter().map(|v| v * v).sum();
                cost += self.in_weight[i] * du;
            }
        }
        if self.spec.rho != 0.0 {
            cost += self.spec.rho * equal_allocation_cost(u);
        }
        Ok(cost)
    }
}

/// Exact gradient of [`total_cost`] in every `u_i` with `y_j = G_j u_j`.
pub fn cost_gradient(
    spec: &CostSpec,
    graph: &NeighborhoodGraph,
    u: &Profile,
    maps: &[DMatrix<f64>],
) -> Result<Profile> {
    let mut model = CostModel::new(spec, graph, maps)?;
    let mut out = Profile::zeros(u.n_nodes(), u.dim());
    model.gradient_into(u, &mut out)?;
    Ok(out)
}

/// Same chain rule as [`cost_gradient`] with measured outcomes in place of `G u`.
pub fn feedback_gradient(
    spec: &CostSpec,
    graph: &NeighborhoodGraph,
    u: &Profile,
    y_measured: &Profile,
    maps: &[DMatrix<f64>],
) -> Result<Profile> {
    let mut model = CostModel::new(spec, graph, maps)?;
    let mut out = Profile::zeros(u.n_nodes(), u.dim());
    model.feedback_gradient_into(u, y_measured, &mut out)?;
    Ok(out)
}
