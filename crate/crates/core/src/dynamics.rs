//! Linear funds-to-welfare community models.
//!
//! Each community evolves as
//!
//! ```text
//! x[k+1] = A x[k] + B u[k] + w[k]
//! y[k]   = C x[k] + r[k]
//! ```
//!
//! and, when `A` is Schur stable, admits the static maps `G = C (I - A)^-1 B`
//! (funding to long-run outcome) and `H = C (I - A)^-1` (process noise to
//! long-run outcome).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Models with spectral radius at or above `1 - STABILITY_MARGIN` are rejected.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    #[default]
    Additive,
    /// `y = (1 + r) * (C x)` elementwise.
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub process_std: f64,
    #[serde(default)]
    pub feedback_std: f64,
    #[serde(default)]
    pub feedback_mode: FeedbackMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::noiseless()
    }
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec {
            process_std: 0.0,
            feedback_std: 0.0,
            feedback_mode: FeedbackMode::Additive,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.process_std >= 0.0 && self.feedback_std >= 0.0) {
            return Err(invalid("noise standard deviations must be nonnegative"));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.process_std == 0.0 && self.feedback_std == 0.0
    }
}

/// One community's `(A, B, C)` triple plus its current welfare state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct CommunityModel {
    pub id: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    pub state: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl CommunityModel {
    /// Validates dimensions and Schur stability of `a`.
    pub fn new(
        id: usize,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        state: DVector<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(invalid(format!(
                "community {id}: A must be square and nonempty"
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(invalid(format!("community {id}: B must be {n}x(m>0)")));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(invalid(format!("community {id}: C must be (p>0)x{n}")));
        }
        if state.len() != n {
            return Err(invalid(format!(
                "community {id}: state must have length {n}"
            )));
        }
        let all_finite = a
            .iter()
            .chain(b.iter())
            .chain(c.iter())
            .chain(state.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(invalid(format!("community {id}: nonfinite model entry")));
        }
        let rho = spectral_radius(&a)?;
        if rho >= 1.0 - STABILITY_MARGIN {
            return Err(Error::Unstable(format!(
                "community {id}: spectral radius {rho} is not below 1"
            )));
        }
        Ok(CommunityModel { id, a, b, c, state })
    }

    /// Scalar community `x+ = a x + b u`, `y = c x`, starting at `x0`.
    pub fn scalar(id: usize, a: f64, b: f64, c: f64, x0: f64) -> Result<Self> {
        CommunityModel::new(
            id,
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
            DVector::from_element(1, x0),
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.a.nrows(),
            m: self.b.ncols(),
            p: self.c.nrows(),
        }
    }

    /// Returns a copy with the output matrix replaced; `A`, `B` and state are kept.
    pub fn with_output_matrix(&self, c: DMatrix<f64>) -> Result<Self> {
        if c.ncols() != self.a.nrows() || c.nrows() != self.c.nrows() {
            return Err(invalid("replacement C has the wrong shape"));
        }
        let mut out = self.clone();
        out.c = c;
        Ok(out)
    }

    /// Noise-free output of the current state.
    pub fn output(&self) -> DVector<f64> {
        &self.c * &self.state
    }

    /// Measures the current state, then advances it by one period.
    ///
    /// Returns `(new_state, measured_y)`; the measurement is of the state
    /// *before* the update, and the process-noise draw happens after it.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        u: &[f64],
        noise: &NoiseSpec,
        rng: &mut R,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_input(u)?;
        let y = self.measure(noise, rng)?;
        let next = self.advance(u, noise, rng)?;
        Ok((next, y))
    }

    fn check_input(&self, u: &[f64]) -> Result<()> {
        let m = self.b.ncols();
        if u.len() != m {
            return Err(invalid(format!(
                "community {}: allocation has length {}, expected {m}",
                self.id,
                u.len()
            )));
        }
        Ok(())
    }

    /// Output of the current state with feedback noise applied.
    pub fn measure<R: Rng + ?Sized>(&self, noise: &NoiseSpec, rng: &mut R) -> Result<DVector<f64>> {
        let mut y = self.output();
        if noise.feedback_std > 0.0 {
            for v in y.iter_mut() {
                let r: f64 = rng.sample::<f64, _>(StandardNormal) * noise.feedback_std;
                match noise.feedback_mode {
                    FeedbackMode::Additive => *v += r,
                    FeedbackMode::Multiplicative => *v *= 1.0 + r,
                }
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "community {}: nonfinite output",
                self.id
            )));
        }
        Ok(y)
    }

    /// Applies `x <- A x + B u + w` and returns the new state.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        u: &[f64],
        noise: &NoiseSpec,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        self.check_input(u)?;
        let mut next = &self.a * &self.state + &self.b * DVector::from_column_slice(u);
        if noise.process_std > 0.0 {
            for v in next.iter_mut() {
                *v += rng.sample::<f64, _>(StandardNormal) * noise.process_std;
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "community {}: nonfinite state",
                self.id
            )));
        }
        self.state.copy_from(&next);
        Ok(next)
    }

    /// `(I - A)^-1` by LU with partial pivoting.
    fn resolvent(&self) -> Result<DMatrix<f64>> {
        let n = self.a.nrows();
        let i_minus_a = DMatrix::<f64>::identity(n, n) - &self.a;
        i_minus_a
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Unstable(format!("community {}: I - A is singular", self.id)))
    }

    pub fn static_maps(&self) -> Result<StaticMaps> {
        let rho = spectral_radius(&self.a)?;
        if rho >= 1.0 - STABILITY_MARGIN {
            return Err(Error::Unstable(format!(
                "community {}: spectral radius {rho} is not below 1",
                self.id
            )));
        }
        let h = &self.c * self.resolvent()?;
        let g = &h * &self.b;
        Ok(StaticMaps { g, h })
    }

    /// Equilibrium `(u, x, y)` sustained by constant funding `u_bar`.
    pub fn equilibrium_for(&self, u_bar: &[f64]) -> Result<EquilibriumTriplet> {
        let Dims { m, .. } = self.dims();
        if u_bar.len() != m {
            return Err(invalid("equilibrium funding has the wrong length"));
        }
        if u_bar.iter().any(|v| *v < 0.0) {
            return Err(invalid("equilibrium funding must be nonnegative"));
        }
        let maps = self.static_maps()?;
        let u = DVector::from_column_slice(u_bar);
        let x_bar = self.resolvent()? * (&self.b * &u);
        let y_bar = &maps.g * &u;
        Ok(EquilibriumTriplet {
            u_bar: u,
            x_bar,
            y_bar,
        })
    }
}

/// Equilibrium static maps of one community.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticMaps {
    /// Input-output map `C (I - A)^-1 B`, `p x m`.
    pub g: DMatrix<f64>,
    /// Noise-to-output map `C (I - A)^-1`, `p x n`.
    pub h: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumTriplet {
    pub u_bar: DVector<f64>,
    pub x_bar: DVector<f64>,
    pub y_bar: DVector<f64>,
}

impl EquilibriumTriplet {
    /// Max-norm residuals of `x = A x + B u` and `y = C x`.
    pub fn residuals(&self, model: &CommunityModel) -> (f64, f64) {
        let state_res = (model.a() * &self.x_bar + model.b() * &self.u_bar - &self.x_bar).amax();
        let out_res = (model.c() * &self.x_bar - &self.y_bar).amax();
        (state_res, out_res)
    }
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(invalid("spectral radius needs a square matrix"));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    if a.nrows() == 1 {
        return Ok(a[(0, 0)].abs());
    }
    let eig = a.clone().complex_eigenvalues();
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !rho.is_finite() {
        return Err(Error::Numerical("eigenvalue computation failed".into()));
    }
    Ok(rho)
}

/// Row-major JSON form of a community model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    #[serde(default)]
    pub id: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    #[serde(default)]
    pub state: Option<Vec<f64>>,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(invalid(format!("{what}: ragged matrix rows")));
    }
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flatten().copied(),
    ))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TryFrom<ModelDoc> for CommunityModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        let a = matrix_from_rows(&doc.a, "A")?;
        let b = matrix_from_rows(&doc.b, "B")?;
        let c = matrix_from_rows(&doc.c, "C")?;
        let state = match doc.state {
            Some(s) => DVector::from_vec(s),
            None => DVector::zeros(a.nrows()),
        };
        CommunityModel::new(doc.id, a, b, c, state)
    }
}

impl From<CommunityModel> for ModelDoc {
    fn from(m: CommunityModel) -> Self {
        ModelDoc {
            id: m.id,
            a: matrix_to_rows(&m.a),
            b: matrix_to_rows(&m.b),
            c: matrix_to_rows(&m.c),
            state: Some(m.state.iter().copied().collect()),
        }
    }
}

/// The nominal Malawi health/education system.
pub fn malawi_nominal() -> CommunityModel {
    CommunityModel::new(
        0,
        DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.3]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.01, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.03, 0.005, 1.0]),
        DVector::zeros(2),
    )
    .expect("nominal system is stable")
}
