//! Least-squares estimation of static maps from input-output records.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_for;

/// One funding/outcome observation of a community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoRecord {
    pub community: usize,
    pub period: i64,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

/// Estimated static map together with the records it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    pub g_hat: DMatrix<f64>,
    /// Records used by the last fit (zero for estimates not fitted from data).
    pub n_samples: usize,
    pub window: Option<usize>,
    /// Set when the windowed inputs did not span the input space and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
    history: Vec<IoRecord>,
}

impl MapEstimate {
    /// An estimate with no supporting data, e.g. the exact map or a prior.
    pub fn from_matrix(g_hat: DMatrix<f64>) -> Self {
        MapEstimate {
            g_hat,
            n_samples: 0,
            window: None,
            rank_deficient: false,
            history: Vec::new(),
        }
    }

    pub fn history(&self) -> &[IoRecord] {
        &self.history
    }

    /// Sum of squared residuals `sum |y - G u|^2` over the windowed records.
    pub fn residual(&self, g: &DMatrix<f64>) -> f64 {
        residual(windowed(&self.history, self.window), g)
    }
}

fn windowed(records: &[IoRecord], window: Option<usize>) -> &[IoRecord] {
    match window {
        Some(w) if w < records.len() => &records[records.len() - w..],
        _ => records,
    }
}

pub fn residual(records: &[IoRecord], g: &DMatrix<f64>) -> f64 {
    records
        .iter()
        .map(|r| {
            (0..g.nrows())
                .map(|row| {
                    let pred: f64 = (0..g.ncols()).map(|c| g[(row, c)] * r.u[c]).sum();
                    (r.y[row] - pred).powi(2)
                })
                .sum::<f64>()
        })
        .sum()
}

fn least_squares(records: &[IoRecord]) -> Result<(DMatrix<f64>, bool)> {
    let first = records
        .first()
        .ok_or_else(|| Error::NoData("no records to fit".into()))?;
    let (m, p) = (first.u.len(), first.y.len());
    if m == 0 || p == 0 {
        return Err(invalid("records must have nonempty u and y"));
    }
    if records.iter().any(|r| r.u.len() != m || r.y.len() != p) {
        return Err(invalid("records have inconsistent dimensions"));
    }
    if records
        .iter()
        .any(|r| r.u.iter().chain(&r.y).any(|v| !v.is_finite()))
    {
        return Err(invalid("records contain nonfinite values"));
    }
    let k = records.len();
    let inputs = DMatrix::from_row_iterator(k, m, records.iter().flat_map(|r| r.u.iter().copied()));
    let outputs =
        DMatrix::from_row_iterator(k, p, records.iter().flat_map(|r| r.y.iter().copied()));
    let svd = inputs.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * f64::EPSILON * (k.max(m) as f64) * 16.0;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    // inputs * G^T = outputs, minimum-norm in G^T
    let gt = svd
        .solve(&outputs, tol)
        .map_err(|e| Error::Estimation(e.to_string()))?;
    let g = gt.transpose();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Estimation("nonfinite least-squares solution".into()));
    }
    Ok((g, rank < m))
}

/// Least-squares fit of `y = G u` over the most recent `window` records
/// (ordered by period, ties kept in input order).
pub fn fit_linear(records: &[IoRecord], window: Option<usize>) -> Result<MapEstimate> {
    if records.is_empty() {
        return Err(Error::NoData("no records to fit".into()));
    }
    if window == Some(0) {
        return Err(invalid("window must be at least one record"));
    }
    let mut history = records.to_vec();
    history.sort_by_key(|r| r.period);
    let used = windowed(&history, window);
    let (g_hat, rank_deficient) = least_squares(used)?;
    Ok(MapEstimate {
        g_hat,
        n_samples: used.len(),
        window,
        rank_deficient,
        history,
    })
}

/// Fits one estimate per community id.
pub fn fit_per_community(
    records: &[IoRecord],
    window: Option<usize>,
) -> Result<BTreeMap<usize, MapEstimate>> {
    let mut grouped: BTreeMap<usize, Vec<IoRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(r.community).or_default().push(r.clone());
    }
    grouped
        .into_iter()
        .map(|(c, rs)| fit_linear(&rs, window).map(|e| (c, e)))
        .collect()
}

/// Multiplies every entry by `1 + eps`, `eps ~ N(0, rel_std^2)`.
pub fn perturb_estimate(g: &DMatrix<f64>, rel_std: f64, seed: u64) -> Result<MapEstimate> {
    if !(rel_std >= 0.0 && rel_std.is_finite()) {
        return Err(invalid("relative std must be finite and nonnegative"));
    }
    let mut rng = rng_for(seed, &[crate::rng::stream::PERTURB]);
    let mut g_hat = g.clone();
    for v in g_hat.iter_mut() {
        let eps: f64 = rng.sample(StandardNormal);
        *v *= 1.0 + rel_std * eps;
    }
    Ok(MapEstimate::from_matrix(g_hat))
}

/// Appends `record` to the estimate's history and refits over `window`.
pub fn relearn_step(
    current: &MapEstimate,
    record: IoRecord,
    window: Option<usize>,
) -> Result<MapEstimate> {
    if let Some(last) = current.history.last() {
        if last.u.len() != record.u.len() || last.y.len() != record.y.len() {
            return Err(invalid("record dimensions differ from history"));
        }
    } else if record.u.len() != current.g_hat.ncols() || record.y.len() != current.g_hat.nrows() {
        return Err(invalid(
            "record dimensions differ from the current estimate",
        ));
    }
    let mut history = current.history.clone();
    history.push(record);
    fit_linear(&history, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(period: i64, u: &[f64], y: &[f64]) -> IoRecord {
        IoRecord {
            community: 0,
            period,
            u: u.to_vec(),
            y: y.to_vec(),
        }
    }

    #[test]
    fn exact_scalar_fit() {
        let records: Vec<_> = (1..6)
            .map(|k| rec(k, &[k as f64], &[2.0 * k as f64]))
            .collect();
        let est = fit_linear(&records, None).unwrap();
        assert_abs_diff_eq!(est.g_hat[(0, 0)], 2.0, epsilon = 1e-12);
        assert_eq!(est.n_samples, 5);
        assert!(!est.rank_deficient);
    }

    #[test]
    fn symmetric_noise_pairs_cancel() {
        let g = 1.7;
        let mut records = Vec::new();
        for (k, u) in [1.0, 2.5, 4.0].iter().enumerate() {
            records.push(rec(2 * k as i64, &[*u], &[g * u + 0.3]));
            records.push(rec(2 * k as i64 + 1, &[*u], &[g * u - 0.3]));
        }
        assert_abs_diff_eq!(
            fit_linear(&records, None).unwrap().g_hat[(0, 0)],
            g,
            epsilon = 1e-12
        );
    }

    #[test]
    fn no_data_and_zero_window() {
        assert!(matches!(fit_linear(&[], None), Err(Error::NoData(_))));
        assert!(fit_linear(&[rec(0, &[1.0], &[1.0])], Some(0)).is_err());
    }

    #[test]
    fn rank_deficient_returns_minimum_norm() {
        // both records along u = (1, 1): min-norm G splits the gain evenly
        let records = vec![rec(0, &[1.0, 1.0], &[2.0]), rec(1, &[2.0, 2.0], &[4.0])];
        let est = fit_linear(&records, None).unwrap();
        assert!(est.rank_deficient);
        assert_abs_diff_eq!(est.g_hat[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.g_hat[(0, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn window_of_one_fits_latest_record() {
        let records = vec![rec(0, &[1.0], &[5.0]), rec(1, &[2.0], &[3.0])];
        let est = fit_linear(&records, Some(1)).unwrap();
        assert_abs_diff_eq!(est.g_hat[(0, 0)], 1.5, epsilon = 1e-12);
        assert_eq!(est.n_samples, 1);
    }

    #[test]
    fn relearn_on_consistent_record_is_unchanged() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.2, 2.0]);
        let us = [[1.0, 0.0], [0.0, 1.0], [1.0, 3.0]];
        let records: Vec<_> = us
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let y = &g * nalgebra::DVector::from_column_slice(u);
                rec(k as i64, u, y.as_slice())
            })
            .collect();
        let est = fit_linear(&records, None).unwrap();
        let y = &est.g_hat * nalgebra::DVector::from_column_slice(&[2.0, -1.0]);
        let next = relearn_step(&est, rec(9, &[2.0, -1.0], y.as_slice()), None).unwrap();
        assert_abs_diff_eq!(next.g_hat, est.g_hat, epsilon = 1e-10);
        assert_eq!(next.history().len(), 4);
    }

    #[test]
    fn relearn_rejects_mismatched_record() {
        let est = MapEstimate::from_matrix(DMatrix::from_element(1, 1, 2.0));
        assert!(relearn_step(&est, rec(0, &[1.0, 2.0], &[1.0]), None).is_err());
        let first = relearn_step(&est, rec(0, &[2.0], &[3.0]), None).unwrap();
        assert_abs_diff_eq!(first.g_hat[(0, 0)], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn perturbation_is_deterministic() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(perturb_estimate(&g, 0.0, 5).unwrap().g_hat, g);
        let a = perturb_estimate(&g, 0.05, 5).unwrap();
        let b = perturb_estimate(&g, 0.05, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.g_hat, g);
        assert!(perturb_estimate(&g, -0.1, 5).is_err());
    }

    #[test]
    fn perturbation_relative_error_matches_std() {
        // Monte-Carlo over 10^4 seeds; each entry's relative error has std rel_std,
        // so the RMS relative Frobenius error equals rel_std.
        let g = DMatrix::from_row_slice(1, 1, &[3.0]);
        let rel = 0.05;
        let n = 10_000;
        let ms: f64 = (0..n)
            .map(|s| {
                let e = perturb_estimate(&g, rel, s).unwrap();
                ((&e.g_hat - &g).norm() / g.norm()).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!((ms.sqrt() - rel).abs() < 0.1 * rel, "rms {}", ms.sqrt());
    }
}
