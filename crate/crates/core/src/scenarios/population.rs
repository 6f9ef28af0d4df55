use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::CommunityModel;
use crate::error::{Error, Result};
use crate::rng::rng_for;

use super::config::DriftSpec;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Which {
    A,
    B,
    C,
}

/// Parses names like `"A11"` or `"C21"` (one-based row and column).
fn parse_coeff(name: &str) -> Result<(Which, usize, usize)> {
    let bad = || {
        Error::Config(format!(
            "coefficient name `{name}` must look like A12, B21 or C11"
        ))
    };
    let mut chars = name.chars();
    let which = match chars.next() {
        Some('A') => Which::A,
        Some('B') => Which::B,
        Some('C') => Which::C,
        _ => return Err(bad()),
    };
    let digits: Vec<u32> = chars
        .map(|c| c.to_digit(10))
        .collect::<Option<_>>()
        .ok_or_else(bad)?;
    match digits[..] {
        [r, c] if r >= 1 && c >= 1 => Ok((which, r as usize - 1, c as usize - 1)),
        _ => Err(bad()),
    }
}

/// `n` copies of `nominal` with zero-mean Gaussian noise added to each named
/// coefficient. Draws that make a model unstable are redrawn.
pub fn generate_population(
    nominal: &CommunityModel,
    n: usize,
    coeff_stds: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<Vec<CommunityModel>> {
    nominal.static_maps()?;
    let dims = nominal.dims();
    let mut coeffs = Vec::with_capacity(coeff_stds.len());
    for (name, &std) in coeff_stds {
        let (which, r, c) = parse_coeff(name)?;
        let (rows, cols) = match which {
            Which::A => (dims.n, dims.n),
            Which::B => (dims.n, dims.m),
            Which::C => (dims.p, dims.n),
        };
        if r >= rows || c >= cols {
            return Err(Error::Config(format!(
                "coefficient `{name}` is outside a {rows} x {cols} matrix"
            )));
        }
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::Config(format!(
                "std of `{name}` must be finite and nonnegative"
            )));
        }
        coeffs.push((which, r, c, std));
    }
    let mut rng = rng_for(seed, &[]);
    let mut out = Vec::with_capacity(n);
    for id in 0..n {
        let mut attempt = 0;
        let model = loop {
            let mut a = nominal.a().clone();
            let mut b = nominal.b().clone();
            let mut c = nominal.c().clone();
            for &(which, r, col, std) in &coeffs {
                let eps: f64 = rng.sample::<f64, _>(StandardNormal) * std;
                match which {
                    Which::A => a[(r, col)] += eps,
                    Which::B => b[(r, col)] += eps,
                    Which::C => c[(r, col)] += eps,
                }
            }
            match CommunityModel::new(id, a, b, c, nominal.state.clone()) {
                Ok(m) if m.static_maps().is_ok() => break m,
                _ => {
                    attempt += 1;
                    if attempt >= MAX_REDRAWS {
                        return Err(Error::Generation(format!(
                            "community {id}: no stable draw in {MAX_REDRAWS} attempts"
                        )));
                    }
                }
            }
        };
        out.push(model);
    }
    Ok(out)
}

/// Scalar communities `A = mean + N(0, std^2)`, `B = 1`, `C = g (1 - A)`,
/// whose static maps equal `gains`.
pub fn scalar_population(
    gains: &[f64],
    persistence_mean: f64,
    persistence_std: f64,
    seed: u64,
) -> Result<Vec<CommunityModel>> {
    if !(persistence_std.is_finite() && persistence_std >= 0.0) {
        return Err(Error::Config(
            "persistence_std must be finite and nonnegative".into(),
        ));
    }
    if gains.iter().any(|g| !g.is_finite()) {
        return Err(Error::Config("static gains must be finite".into()));
    }
    let mut rng = rng_for(seed, &[]);
    let mut out = Vec::with_capacity(gains.len());
    for (id, &g) in gains.iter().enumerate() {
        let mut attempt = 0;
        let model = loop {
            let a = persistence_mean + persistence_std * rng.sample::<f64, _>(StandardNormal);
            match CommunityModel::scalar(id, a, 1.0, g * (1.0 - a), 0.0) {
                Ok(m) if m.static_maps().is_ok() => break m,
                _ => {
                    attempt += 1;
                    if attempt >= MAX_REDRAWS {
                        return Err(Error::Generation(format!(
                            "community {id}: no stable persistence in {MAX_REDRAWS} attempts"
                        )));
                    }
                }
            }
        };
        out.push(model);
    }
    Ok(out)
}

/// `model` with its output matrix replaced so that the static map equals
/// `G(k) = G(0) + (k / K) (target - G(0))`; `A`, `B` and the state are kept.
pub fn drifted_model(
    model: &CommunityModel,
    drift: &DriftSpec,
    k: usize,
) -> Result<CommunityModel> {
    let target = drift.target_g.get(model.id).ok_or_else(|| {
        Error::InvalidInput(format!("no drift target for community {}", model.id))
    })?;
    drifted_model_towards(model, target, k, drift.horizon)
}

pub(crate) fn drifted_model_towards(
    model: &CommunityModel,
    target: &DMatrix<f64>,
    k: usize,
    horizon: usize,
) -> Result<CommunityModel> {
    let maps = model.static_maps()?;
    if target.shape() != maps.g.shape() {
        return Err(Error::InvalidInput(format!(
            "drift target is {:?}, static map is {:?}",
            target.shape(),
            maps.g.shape()
        )));
    }
    if k > horizon {
        return Err(Error::InvalidInput(format!(
            "period {k} is past the horizon {horizon}"
        )));
    }
    if k == 0 {
        return Ok(model.clone());
    }
    let frac = k as f64 / horizon as f64;
    let g_k = &maps.g + (target - &maps.g) * frac;
    // G = C M with M = (I - A)^-1 B, so C(k) = G(k) M^+.
    let n = model.a().nrows();
    let resolvent = (DMatrix::<f64>::identity(n, n) - model.a())
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Unstable(format!("community {}: I - A is singular", model.id)))?;
    let m = resolvent * model.b();
    let m_pinv = m
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    model.with_output_matrix(g_k * m_pinv)
}

/// True static maps of every community at period `k`.
pub fn maps_at(
    models: &[CommunityModel],
    drift: Option<&DriftSpec>,
    k: usize,
) -> Result<Vec<DMatrix<f64>>> {
    models
        .iter()
        .map(|m| match drift {
            Some(d) => Ok(drifted_model(m, d, k)?.static_maps()?.g),
            None => Ok(m.static_maps()?.g),
        })
        .collect()
}
