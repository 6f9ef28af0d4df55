//! Budget-constrained allocation sets and exact Euclidean projections onto them.
//!
//! The set couples communities only through the per-activity budget, so the
//! projection splits into one `N`-dimensional problem per activity `a`:
//!
//! * `Cap`:   `{ v >= lower_a, sum v <= s_a }`
//! * `Exact`: `{ v >= lower_a, sum v  = s_a }`
//!
//! Both reduce, after shifting by the lower bounds, to projecting onto a
//! (possibly capped) simplex, solved by sorting and a closed-form threshold.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    /// Total spending per activity at most `s_max`.
    #[default]
    Cap,
    /// Total spending per activity exactly `s_max`.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSet {
    pub kind: BudgetKind,
    /// Per-activity budget.
    pub s_max: Vec<f64>,
    /// Per-community lower bounds; `None` means zero.
    #[serde(default)]
    pub lower: Option<Profile>,
}

impl BudgetSet {
    pub fn cap(s_max: Vec<f64>) -> Self {
        BudgetSet {
            kind: BudgetKind::Cap,
            s_max,
            lower: None,
        }
    }

    pub fn exact(s_max: Vec<f64>, lower: Option<Profile>) -> Self {
        BudgetSet {
            kind: BudgetKind::Exact,
            s_max,
            lower,
        }
    }

    pub fn with_s_max(&self, s_max: Vec<f64>) -> Self {
        BudgetSet {
            s_max,
            ..self.clone()
        }
    }

    pub fn n_activities(&self) -> usize {
        self.s_max.len()
    }

    pub fn lower_bound(&self, i: usize, a: usize) -> f64 {
        self.lower.as_ref().map_or(0.0, |l| l.node(i)[a])
    }

    /// Checks nonnegativity and, for `n_nodes` communities, that some
    /// allocation satisfies the constraints.
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let m = self.n_activities();
        if self.s_max.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("budget caps must be finite and nonnegative"));
        }
        if let Some(lower) = &self.lower {
            if lower.n_nodes() != n_nodes || lower.dim() != m {
                return Err(invalid(format!(
                    "lower bounds must be {n_nodes} x {m}, got {} x {}",
                    lower.n_nodes(),
                    lower.dim()
                )));
            }
            if lower
                .as_slice()
                .iter()
                .any(|v| !(v.is_finite() && *v >= 0.0))
            {
                return Err(invalid("lower bounds must be finite and nonnegative"));
            }
        }
        for a in 0..m {
            let floor: f64 = (0..n_nodes).map(|i| self.lower_bound(i, a)).sum();
            if floor > self.s_max[a] * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Infeasible(format!(
                    "activity {a}: lower bounds sum to {floor}, above budget {}",
                    self.s_max[a]
                )));
            }
        }
        Ok(())
    }

    /// Euclidean projection of `u` onto the set.
    pub fn project(&self, u: &Profile) -> Result<Profile> {
        let mut out = u.clone();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    pub fn project_in_place(&self, u: &mut Profile) -> Result<()> {
        let n = u.n_nodes();
        let m = self.n_activities();
        if u.dim() != m {
            return Err(invalid(format!(
                "allocation has {} activities, budget has {m}",
                u.dim()
            )));
        }
        self.validate(n)?;
        if !u.is_finite() {
            return Err(Error::Numerical(
                "cannot project a nonfinite allocation".into(),
            ));
        }
        let mut z = vec![0.0; n];
        let mut scratch = Vec::with_capacity(n);
        for a in 0..m {
            let mut floor = 0.0;
            for (i, zi) in z.iter_mut().enumerate() {
                let l = self.lower_bound(i, a);
                floor += l;
                *zi = u.node(i)[a] - l;
            }
            let radius = (self.s_max[a] - floor).max(0.0);
            match self.kind {
                BudgetKind::Cap => {
                    let clamped: f64 = z.iter().map(|v| v.max(0.0)).sum();
                    if clamped <= radius {
                        z.iter_mut().for_each(|v| *v = v.max(0.0));
                    } else {
                        project_simplex(&mut z, radius, &mut scratch);
                    }
                }
                BudgetKind::Exact => project_simplex(&mut z, radius, &mut scratch),
            }
            for (i, zi) in z.iter().enumerate() {
                u.node_mut(i)[a] = zi + self.lower_bound(i, a);
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, u: &Profile, tol: f64) -> bool {
        let m = self.n_activities();
        if u.dim() != m || self.validate(u.n_nodes()).is_err() {
            return false;
        }
        for a in 0..m {
            let mut total = 0.0;
            for i in 0..u.n_nodes() {
                let v = u.node(i)[a];
                if !v.is_finite() || v < self.lower_bound(i, a) - tol {
                    return false;
                }
                total += v;
            }
            let ok = match self.kind {
                BudgetKind::Cap => total <= self.s_max[a] + tol,
                BudgetKind::Exact => (total - self.s_max[a]).abs() <= tol,
            };
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Projects `z` onto `{ w >= 0, sum w = radius }` in place.
fn project_simplex(z: &mut [f64], radius: f64, sorted: &mut Vec<f64>) {
    if z.is_empty() {
        return;
    }
    if radius <= 0.0 {
        z.fill(0.0);
        return;
    }
    sorted.clear();
    sorted.extend_from_slice(z);
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - radius) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    z.iter_mut().for_each(|v| *v = (*v - tau).max(0.0));
}
