//! Per-community vector profiles (allocations `u` and outcomes `y`).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One equal-length vector per community, stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Profile {
    dim: usize,
    data: Vec<f64>,
}

impl Profile {
    pub fn zeros(n_nodes: usize, dim: usize) -> Self {
        Profile {
            dim,
            data: vec![0.0; n_nodes * dim],
        }
    }

    pub fn filled(n_nodes: usize, dim: usize, value: f64) -> Self {
        Profile {
            dim,
            data: vec![value; n_nodes * dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("profile rows have different lengths"));
        }
        Ok(Profile {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Builds a profile from flat row-major data.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 && !data.is_empty() || dim > 0 && !data.len().is_multiple_of(dim) {
            return Err(invalid("flat profile length is not a multiple of dim"));
        }
        Ok(Profile { dim, data })
    }

    pub fn n_nodes(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn same_shape(&self, other: &Profile) -> bool {
        self.dim == other.dim && self.data.len() == other.data.len()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the stacked vector.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Profile) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Profile) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn dot(&self, other: &Profile) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Profile {
    type Error = crate::error::Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Profile::from_rows(rows)
    }
}

impl From<Profile> for Vec<Vec<f64>> {
    fn from(p: Profile) -> Self {
        p.to_rows()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
