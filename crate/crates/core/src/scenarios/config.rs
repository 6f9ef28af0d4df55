use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{matrix_from_rows, CommunityModel, NoiseSpec};
use crate::error::{Error, Result};
use crate::feasible::{BudgetKind, BudgetSet};
use crate::objectives::{CostModel, CostSpec, Metric};
use crate::policies::PolicyConfig;
use crate::profile::Profile;
use crate::rng::{derive_seed, stream};
use crate::topology::{random_graph, NeighborhoodGraph};

use super::population::{generate_population, scalar_population};

/// Version of the JSON scenario schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Complete description of one experiment, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub population: PopulationSpec,
    pub graph: GraphSpec,
    pub status_quo: StatusQuoSpec,
    #[serde(default)]
    pub cost: CostSpec,
    pub budget: BudgetConfig,
    pub policies: Vec<PolicyConfig>,
    /// Feedback and process noise. Its `seed` field is ignored: every stream
    /// is derived from `seed` below.
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Relative standard deviation of the multiplicative error on each map estimate.
    #[serde(default)]
    pub estimate_error: f64,
    #[serde(default)]
    pub drift: Option<DriftConfig>,
    pub horizon: usize,
    #[serde(default = "one")]
    pub n_realizations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Also record the distance of each decision to the SOL optimum under the true maps.
    #[serde(default)]
    pub track_optimum: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationSpec {
    /// Models given verbatim. Their stored states are replaced by the
    /// status-quo equilibrium.
    Explicit { models: Vec<CommunityModel> },
    /// Scalar communities with `B = 1`, `A = persistence_mean + N(0, persistence_std^2)`
    /// and `C = G (1 - A)`, so that each static map equals the listed gain.
    Scalar {
        static_gains: Vec<f64>,
        #[serde(default = "half")]
        persistence_mean: f64,
        #[serde(default)]
        persistence_std: f64,
        #[serde(default)]
        names: Vec<String>,
    },
    /// `n` copies of `nominal` with Gaussian perturbations of the named
    /// coefficients (`"A12"` is row 1, column 2, one-based).
    Perturbed {
        nominal: CommunityModel,
        n: usize,
        #[serde(default)]
        coeff_stds: BTreeMap<String, f64>,
    },
}

fn half() -> f64 {
    0.5
}

impl PopulationSpec {
    pub fn len(&self) -> usize {
        match self {
            PopulationSpec::Explicit { models } => models.len(),
            PopulationSpec::Scalar { static_gains, .. } => static_gains.len(),
            PopulationSpec::Perturbed { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            PopulationSpec::Scalar { names, .. } if names.len() == self.len() => names.clone(),
            _ => (0..self.len()).map(|i| format!("community_{i}")).collect(),
        }
    }

    /// Draws the population; deterministic in `seed`.
    pub fn generate(&self, seed: u64) -> Result<Vec<CommunityModel>> {
        let seed = derive_seed(seed, &[stream::POPULATION]);
        match self {
            PopulationSpec::Explicit { models } => Ok(models
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let mut m = m.clone();
                    m.id = i;
                    m
                })
                .collect()),
            PopulationSpec::Scalar {
                static_gains,
                persistence_mean,
                persistence_std,
                ..
            } => scalar_population(static_gains, *persistence_mean, *persistence_std, seed),
            PopulationSpec::Perturbed {
                nominal,
                n,
                coeff_stds,
            } => generate_population(nominal, *n, coeff_stds, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Edges {
        edges: Vec<(usize, usize)>,
    },
    /// Random graph drawn from the master seed.
    Random {
        edge_prob: f64,
    },
    Complete,
}

impl GraphSpec {
    pub fn build(&self, n: usize, seed: u64) -> Result<NeighborhoodGraph> {
        match self {
            GraphSpec::Edges { edges } => NeighborhoodGraph::from_edges(n, edges),
            GraphSpec::Random { edge_prob } => random_graph(n, *edge_prob, seed),
            GraphSpec::Complete => Ok(NeighborhoodGraph::complete(n)),
        }
    }
}

/// Funding in force before the first decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StatusQuoSpec {
    Explicit {
        allocations: Vec<Vec<f64>>,
    },
    /// Each entry uniform in `mean * [1 - rel_spread, 1 + rel_spread]`.
    Spread {
        mean: Vec<f64>,
        rel_spread: f64,
    },
}

impl StatusQuoSpec {
    pub fn build(&self, n: usize, seed: u64) -> Result<Profile> {
        use rand::Rng;
        match self {
            StatusQuoSpec::Explicit { allocations } => Profile::from_rows(allocations.clone()),
            StatusQuoSpec::Spread { mean, rel_spread } => {
                if !(0.0..=1.0).contains(rel_spread) {
                    return Err(Error::Config(
                        "status_quo.rel_spread must lie in [0, 1]".into(),
                    ));
                }
                let mut rng = crate::rng::rng_for(seed, &[stream::POPULATION, 1]);
                let mut u = Profile::zeros(n, mean.len());
                for i in 0..n {
                    for (a, mu) in mean.iter().enumerate() {
                        let t: f64 = rng.random_range(-1.0..=1.0);
                        u.node_mut(i)[a] = mu * (1.0 + rel_spread * t);
                    }
                }
                Ok(u)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundSpec {
    #[default]
    Zero,
    /// No community receives less than its status-quo funding.
    StatusQuo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub kind: BudgetKind,
    /// Initial per-activity budget; defaults to the status-quo total.
    #[serde(default)]
    pub s0: Option<Vec<f64>>,
    /// Total fractional increase over the horizon, per activity.
    pub growth: Vec<f64>,
    #[serde(default)]
    pub lower: LowerBoundSpec,
}

/// Linear budget growth `s(k) = s0 * (1 + growth * k / K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSchedule {
    pub s0: Vec<f64>,
    pub growth: Vec<f64>,
    pub horizon: usize,
}

impl BudgetSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.s0.len() != self.growth.len() {
            return Err(Error::Config("budget s0 and growth lengths differ".into()));
        }
        if self.s0.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config(
                "budget s0 must be finite and nonnegative".into(),
            ));
        }
        if self.growth.iter().any(|g| !(g.is_finite() && *g >= -1.0)) {
            return Err(Error::Config(
                "budget growth must be finite and at least -1".into(),
            ));
        }
        Ok(())
    }

    pub fn at(&self, k: usize) -> Vec<f64> {
        let frac = if self.horizon == 0 {
            0.0
        } else {
            k as f64 / self.horizon as f64
        };
        self.s0
            .iter()
            .zip(&self.growth)
            .map(|(s, g)| s * (1.0 + g * frac))
            .collect()
    }
}

/// Drift targets as written in JSON: one matrix broadcast to every
/// community, or one matrix per community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub target_g: Vec<Vec<Vec<f64>>>,
}

/// Linear drift of every static map towards a target over `horizon` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    pub target_g: Vec<DMatrix<f64>>,
    pub horizon: usize,
}

impl DriftConfig {
    pub fn build(&self, n: usize, horizon: usize) -> Result<DriftSpec> {
        let mats = self
            .target_g
            .iter()
            .map(|rows| matrix_from_rows(rows, "drift target"))
            .collect::<Result<Vec<_>>>()?;
        let target_g = match mats.len() {
            1 => vec![mats[0].clone(); n],
            len if len == n => mats,
            len => {
                return Err(Error::Config(format!(
                    "drift.target_g has {len} matrices; expected 1 or {n}"
                )))
            }
        };
        Ok(DriftSpec { target_g, horizon })
    }
}

/// A validated, materialized scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub names: Vec<String>,
    /// Plants with their state at the status-quo equilibrium.
    pub models: Vec<CommunityModel>,
    pub graph: NeighborhoodGraph,
    pub status_quo: Profile,
    pub true_maps: Vec<DMatrix<f64>>,
    pub base_set: BudgetSet,
    pub schedule: BudgetSchedule,
    pub drift: Option<DriftSpec>,
}

fn cfg_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::load(text, &[])
    }

    /// Parses `text`, applies `key=value` overrides, then decodes the result.
    /// Syntax errors report line and column; type errors report the field path.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        apply_overrides(&mut doc, overrides)?;
        Self::from_value(doc)
    }

    fn from_value(doc: serde_json::Value) -> Result<Self> {
        serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("field `{path}`: {}", e.into_inner()))
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks every dimension and weight and materializes the scenario.
    /// No simulation work is done.
    pub fn build(&self) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("at least one policy is required".into()));
        }
        for (i, p) in self.policies.iter().enumerate() {
            p.validate().map_err(cfg_err)?;
            if self.policies[..i].iter().any(|q| q.kind == p.kind) {
                return Err(Error::Config(format!("policy {} is listed twice", p.kind)));
            }
        }
        if !(self.estimate_error.is_finite() && self.estimate_error >= 0.0) {
            return Err(Error::Config(
                "estimate_error must be finite and nonnegative".into(),
            ));
        }
        self.noise.validate().map_err(cfg_err)?;
        let n = self.population.len();
        if n < 2 {
            return Err(Error::Config(
                "a scenario needs at least two communities".into(),
            ));
        }
        let mut models = self.population.generate(self.seed)?;
        let graph = self
            .graph
            .build(n, derive_seed(self.seed, &[stream::GRAPH]))
            .map_err(cfg_err)?;
        graph.require_no_isolated().map_err(cfg_err)?;
        self.cost.validate(n).map_err(cfg_err)?;
        if self.cost.metric == Metric::WcNeqm {
            return Err(Error::UnsupportedMetric(
                "WC-NEqM is available for evaluation only; scenario policies need NEqM".into(),
            ));
        }
        let dims = models[0].dims();
        if let Some(bad) = models.iter().find(|m| m.dims() != dims) {
            return Err(Error::Config(format!(
                "community {} has different dimensions",
                bad.id
            )));
        }
        let status_quo = self.status_quo.build(n, self.seed).map_err(cfg_err)?;
        if status_quo.n_nodes() != n || status_quo.dim() != dims.m {
            return Err(Error::Config(format!(
                "status quo must be {n} x {}, got {} x {}",
                dims.m,
                status_quo.n_nodes(),
                status_quo.dim()
            )));
        }
        if status_quo
            .as_slice()
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::Config(
                "status-quo allocations must be finite and nonnegative".into(),
            ));
        }
        let mut true_maps = Vec::with_capacity(n);
        for (m, u0) in models.iter_mut().zip(status_quo.rows()) {
            let eq = m.equilibrium_for(u0).map_err(cfg_err)?;
            m.state = eq.x_bar;
            true_maps.push(m.static_maps()?.g);
        }
        // Cost model construction checks map and graph shapes.
        CostModel::new(&self.cost, &graph, &true_maps).map_err(cfg_err)?;
        let s0 = match &self.budget.s0 {
            Some(s) => s.clone(),
            None => (0..dims.m)
                .map(|a| status_quo.rows().map(|r| r[a]).sum())
                .collect(),
        };
        if s0.len() != dims.m {
            return Err(Error::Config(format!(
                "budget.s0 must have {} entries",
                dims.m
            )));
        }
        let schedule = BudgetSchedule {
            s0,
            growth: self.budget.growth.clone(),
            horizon: self.horizon,
        };
        schedule.validate()?;
        let lower = match self.budget.lower {
            LowerBoundSpec::Zero => None,
            LowerBoundSpec::StatusQuo => Some(status_quo.clone()),
        };
        let base_set = BudgetSet {
            kind: self.budget.kind,
            s_max: schedule.s0.clone(),
            lower,
        };
        for k in 0..=self.horizon {
            base_set
                .with_s_max(schedule.at(k))
                .validate(n)
                .map_err(cfg_err)?;
        }
        let drift = match &self.drift {
            Some(d) => {
                let spec = d.build(n, self.horizon)?;
                if spec.target_g.iter().any(|g| g.shape() != (dims.p, dims.m)) {
                    return Err(Error::Config(format!(
                        "drift targets must be {} x {}",
                        dims.p, dims.m
                    )));
                }
                Some(spec)
            }
            None => None,
        };
        Ok(Scenario {
            config: self.clone(),
            names: self.population.names(),
            models,
            graph,
            status_quo,
            true_maps,
            base_set,
            schedule,
            drift,
        })
    }

    /// Applies `key=value` overrides to the JSON form. Keys are dotted
    /// paths (`cost.rho`, `policies.0.gamma`); values are parsed as JSON
    /// and fall back to strings.
    /// Applies `key=value` overrides to the JSON form. Keys are dotted
    /// paths (`cost.rho`, `policies.0.gamma`); values are parsed as JSON
    /// and fall back to strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        apply_overrides(&mut doc, overrides)?;
        Self::from_value(doc)
    }
}

pub fn apply_overrides(doc: &mut serde_json::Value, overrides: &[String]) -> Result<()> {
    use serde_json::Value;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
        let value: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut *doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            let last = depth + 1 == parts.len();
            node = match node {
                Value::Object(map) => {
                    if last {
                        map.insert((*part).to_string(), value.clone());
                        break;
                    }
                    map.entry((*part).to_string())
                        .or_insert_with(|| Value::Object(Default::default()))
                }
                Value::Array(items) => {
                    let idx: usize = part.parse().map_err(|_| {
                        Error::Config(format!("override `{key}`: `{part}` is not an index"))
                    })?;
                    let len = items.len();
                    let slot = items.get_mut(idx).ok_or_else(|| {
                        Error::Config(format!(
                            "override `{key}`: index {idx} out of range ({len})"
                        ))
                    })?;
                    if last {
                        *slot = value.clone();
                        break;
                    }
                    slot
                }
                _ => {
                    return Err(Error::Config(format!(
                        "override `{key}`: `{part}` is not inside an object"
                    )))
                }
            };
        }
    }
    Ok(())
}
