//! CSV and JSON input/output: historical records, run results and sweep tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{IoRecord, MapEstimate};
use crate::policies::PolicyKind;
use crate::profile::Profile;
use crate::scenarios::{
    metric, ParetoRow, PolicyAggregate, Quadrant, RhoRow, RunResult, SeriesStats,
};

/// Scalar metrics written to the long-format result table, in output order.
pub const SCALAR_METRICS: [&str; 6] = [
    metric::EQUITABILITY,
    metric::REALIZED_EQUITABILITY,
    metric::EQUAL_ALLOCATION,
    metric::TOTAL_COST,
    metric::MAP_ERROR,
    metric::TRACKING_ERROR,
];

fn ingest_err(row: usize, msg: impl Into<String>) -> Error {
    Error::Ingest {
        row,
        msg: msg.into(),
    }
}

fn column_count(headers: &[&str], prefix: &str, start: usize) -> usize {
    headers[start..]
        .iter()
        .enumerate()
        .take_while(|(k, h)| **h == format!("{prefix}{}", k + 1))
        .count()
}

/// Parses historical records with header `community,period,u_1..u_m,y_1..y_p`.
///
/// Rows are numbered from 1 for the header line; the result is sorted by
/// `(community, period)`.
pub fn parse_history<R: Read>(reader: R) -> Result<Vec<IoRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ingest_err(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 4 || names[0] != "community" || names[1] != "period" {
        return Err(ingest_err(1, "header must start with `community,period`"));
    }
    let m = column_count(&names, "u_", 2);
    if m == 0 {
        return Err(ingest_err(1, "missing input columns u_1.."));
    }
    let p = column_count(&names, "y_", 2 + m);
    if p == 0 {
        return Err(ingest_err(1, "missing output columns y_1.."));
    }
    if names.len() != 2 + m + p {
        return Err(ingest_err(
            1,
            format!("unexpected column `{}`", names[2 + m + p]),
        ));
    }

    let mut seen = BTreeMap::new();
    let mut records = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| ingest_err(line, e.to_string()))?;
        if row.len() != names.len() {
            return Err(ingest_err(
                line,
                format!("expected {} fields, found {}", names.len(), row.len()),
            ));
        }
        let community: usize = row[0].parse().map_err(|_| {
            ingest_err(
                line,
                format!("community `{}` is not a nonnegative integer", &row[0]),
            )
        })?;
        let period: i64 = row[1]
            .parse()
            .map_err(|_| ingest_err(line, format!("period `{}` is not an integer", &row[1])))?;
        let mut values = Vec::with_capacity(m + p);
        for (col, field) in row.iter().enumerate().skip(2) {
            let v: f64 = field.parse().map_err(|_| {
                ingest_err(
                    line,
                    format!("{} value `{field}` is not numeric", names[col]),
                )
            })?;
            if !v.is_finite() {
                return Err(ingest_err(
                    line,
                    format!("{} value is not finite", names[col]),
                ));
            }
            values.push(v);
        }
        if let Some(first) = seen.insert((community, period), line) {
            return Err(ingest_err(
                line,
                format!("duplicate record for community {community}, period {period} (first at row {first})"),
            ));
        }
        let y = values.split_off(m);
        records.push(IoRecord {
            community,
            period,
            u: values,
            y,
        });
    }
    records.sort_by_key(|r| (r.community, r.period));
    Ok(records)
}

pub fn ingest_history(path: impl AsRef<Path>) -> Result<Vec<IoRecord>> {
    parse_history(File::open(path)?)
}

/// Writes records in the layout read by [`parse_history`].
pub fn write_history<W: Write>(records: &[IoRecord], writer: W) -> Result<()> {
    let first = records
        .first()
        .ok_or_else(|| Error::NoData("no records to write".into()))?;
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["community".to_string(), "period".to_string()];
    header.extend((1..=first.u.len()).map(|a| format!("u_{a}")));
    header.extend((1..=first.y.len()).map(|q| format!("y_{q}")));
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![r.community.to_string(), r.period.to_string()];
        row.extend(r.u.iter().chain(&r.y).map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One line of the long-format result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub realization: usize,
    pub policy: PolicyKind,
    pub period: usize,
    pub metric: String,
    pub value: f64,
}

fn profile_rows(
    out: &mut Vec<ResultRow>,
    realization: usize,
    policy: PolicyKind,
    prefix: &str,
    profiles: &[Profile],
) {
    for (period, prof) in profiles.iter().enumerate() {
        for (i, node) in prof.rows().enumerate() {
            for (a, &value) in node.iter().enumerate() {
                out.push(ResultRow {
                    realization,
                    policy,
                    period,
                    metric: format!("{prefix}_{i}_{}", a + 1),
                    value,
                });
            }
        }
    }
}

/// Flattens a run into long-format rows: scalar metrics first, then
/// allocations (`u_<community>_<activity>`), long-run outcomes
/// (`y_<community>_<indicator>`) and plant outputs (`realized_y_..`).
pub fn result_rows(result: &RunResult) -> Vec<ResultRow> {
    let mut out = Vec::new();
    for real in &result.realizations {
        for series in &real.series {
            for name in SCALAR_METRICS {
                if let Some(values) = series.metric(name) {
                    for (period, &value) in values.iter().enumerate() {
                        out.push(ResultRow {
                            realization: real.realization,
                            policy: series.policy,
                            period,
                            metric: name.to_string(),
                            value,
                        });
                    }
                }
            }
            profile_rows(
                &mut out,
                real.realization,
                series.policy,
                "u",
                &series.allocations,
            );
            profile_rows(
                &mut out,
                real.realization,
                series.policy,
                "y",
                &series.outcomes,
            );
            profile_rows(
                &mut out,
                real.realization,
                series.policy,
                "realized_y",
                &series.realized_outcomes,
            );
        }
    }
    out
}

const RESULT_HEADER: [&str; 5] = ["realization", "policy", "period", "metric", "value"];

pub fn write_result_csv<W: Write>(result: &RunResult, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RESULT_HEADER)?;
    for row in result_rows(result) {
        wtr.write_record([
            row.realization.to_string(),
            row.policy.label().to_string(),
            row.period.to_string(),
            row.metric,
            row.value.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_result_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RESULT_HEADER) {
        return Err(ingest_err(
            1,
            format!("expected header `{}`", RESULT_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| ingest_err(line, e.to_string()))?;
        let field = |k: usize| rec.get(k).ok_or_else(|| ingest_err(line, "missing field"));
        rows.push(ResultRow {
            realization: field(0)?
                .parse()
                .map_err(|_| ingest_err(line, "bad realization"))?,
            policy: field(1)?
                .parse()
                .map_err(|e: Error| ingest_err(line, e.to_string()))?,
            period: field(2)?
                .parse()
                .map_err(|_| ingest_err(line, "bad period"))?,
            metric: field(3)?.to_string(),
            value: field(4)?
                .parse()
                .map_err(|_| ingest_err(line, "bad value"))?,
        });
    }
    Ok(rows)
}

/// Per period, the `(realization, value)` pairs of one metric.
type PeriodValues = BTreeMap<usize, Vec<(usize, f64)>>;

/// Recomputes per-policy aggregates of the scalar metrics from table rows.
pub fn aggregate_rows(rows: &[ResultRow]) -> Result<Vec<PolicyAggregate>> {
    let mut policies = Vec::new();
    let mut table: BTreeMap<(PolicyKind, &str), PeriodValues> = BTreeMap::new();
    for row in rows {
        if !policies.contains(&row.policy) {
            policies.push(row.policy);
        }
        if let Some(name) = SCALAR_METRICS.iter().find(|m| **m == row.metric) {
            table
                .entry((row.policy, name))
                .or_default()
                .entry(row.realization)
                .or_default()
                .push((row.period, row.value));
        }
    }
    let mut out = Vec::new();
    for policy in policies {
        let mut metrics = Vec::new();
        for name in SCALAR_METRICS {
            let Some(by_real) = table.get_mut(&(policy, name)) else {
                continue;
            };
            let mut series = Vec::with_capacity(by_real.len());
            for points in by_real.values_mut() {
                points.sort_by_key(|(k, _)| *k);
                if points.iter().enumerate().any(|(k, (p, _))| *p != k) {
                    return Err(Error::NoData(format!(
                        "{policy} {name}: periods are not contiguous"
                    )));
                }
                series.push(points.iter().map(|(_, v)| *v).collect::<Vec<_>>());
            }
            let lens: BTreeSet<usize> = series.iter().map(Vec::len).collect();
            if lens.len() > 1 {
                return Err(Error::NoData(format!(
                    "{policy} {name}: realizations differ in length"
                )));
            }
            let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
            metrics.push((name.to_string(), SeriesStats::from_series(&refs)));
        }
        out.push(PolicyAggregate { policy, metrics });
    }
    Ok(out)
}

/// Per-policy part of [`RunSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    /// Median across realizations of each metric's last value.
    pub final_median: BTreeMap<String, f64>,
    pub aggregates: BTreeMap<String, SeriesStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub horizon: usize,
    pub n_realizations: usize,
    pub policies: Vec<PolicySummary>,
}

impl RunSummary {
    pub fn from_result(result: &RunResult) -> Self {
        let policies = result
            .aggregates
            .iter()
            .map(|agg| {
                let final_median = agg
                    .metrics
                    .iter()
                    .filter_map(|(name, _)| {
                        result
                            .median_final(agg.policy, name)
                            .map(|v| (name.clone(), v))
                    })
                    .collect();
                PolicySummary {
                    policy: agg.policy,
                    final_median,
                    aggregates: agg.metrics.iter().cloned().collect(),
                }
            })
            .collect();
        RunSummary {
            name: result.name.clone(),
            seed: result.seed,
            horizon: result.horizon,
            n_realizations: result.n_realizations,
            policies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSweepSummary {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<RhoRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSummary {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<ParetoRow>,
    /// Number of grid points per quadrant label.
    pub quadrant_counts: BTreeMap<String, usize>,
}

impl ParetoSummary {
    pub fn new(name: String, seed: u64, rows: Vec<ParetoRow>) -> Self {
        let mut quadrant_counts: BTreeMap<String, usize> =
            [Quadrant::I, Quadrant::II, Quadrant::III, Quadrant::IV]
                .iter()
                .map(|q| (format!("{q:?}"), 0))
                .collect();
        for row in &rows {
            *quadrant_counts
                .entry(format!("{:?}", row.quadrant))
                .or_default() += 1;
        }
        ParetoSummary {
            name,
            seed,
            rows,
            quadrant_counts,
        }
    }
}

pub fn write_rho_csv<W: Write>(rows: &[RhoRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let p = rows.first().map_or(0, |r| r.mean_outcome.len());
    let mut header = vec![
        "rho".to_string(),
        "equitability_ratio".to_string(),
        "equal_allocation_ratio".to_string(),
    ];
    header.extend((1..=p).map(|q| format!("mean_outcome_{q}")));
    header.extend((1..=p).map(|q| format!("outcome_std_{q}")));
    wtr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.rho.to_string(),
            r.equitability_ratio.to_string(),
            r.equal_allocation_ratio.to_string(),
        ];
        rec.extend(
            r.mean_outcome
                .iter()
                .chain(&r.outcome_std)
                .map(|v| v.to_string()),
        );
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_pareto_csv<W: Write>(rows: &[ParetoRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "rho",
        "sigma",
        "equitability_ratio",
        "equal_allocation_ratio",
        "quadrant",
    ])?;
    for r in rows {
        wtr.write_record([
            r.rho.to_string(),
            r.sigma.to_string(),
            r.equitability_ratio.to_string(),
            r.equal_allocation_ratio.to_string(),
            format!("{:?}", r.quadrant),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Fitted map of one community, as written by the `learn` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub community: usize,
    /// Row-major `p x m` matrix.
    pub g_hat: Vec<Vec<f64>>,
    pub n_samples: usize,
    pub rank_deficient: bool,
    /// Sum of squared residuals over the fitted records.
    pub residual: f64,
}

impl EstimateDoc {
    pub fn new(community: usize, estimate: &MapEstimate) -> Self {
        let g = &estimate.g_hat;
        EstimateDoc {
            community,
            g_hat: (0..g.nrows())
                .map(|r| g.row(r).iter().copied().collect())
                .collect(),
            n_samples: estimate.n_samples,
            rank_deficient: estimate.rank_deficient,
            residual: estimate.residual(g),
        }
    }
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(value: &T, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}
