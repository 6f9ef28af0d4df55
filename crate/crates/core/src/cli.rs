//! Command-line front end.
//!
//! Every subcommand that needs a scenario takes either `--config <file>` or
//! `--preset <name>`, applies `--set key=value` overrides and `--seed`, and
//! validates the result before any simulation work. Results go to
//! `--output-dir` (default `$EQALLOC_OUTPUT_DIR`, else `out`).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimation::fit_per_community;
use crate::feasible::BudgetSet;
use crate::io::{
    ingest_history, write_json, write_pareto_csv, write_result_csv, write_rho_csv, EstimateDoc,
    ParetoSummary, RhoSweepSummary, RunSummary,
};
use crate::profile::Profile;
use crate::scenarios::presets::{malawi_pareto, unit_grid, MALAWI_JSON, NINE_COUNTRY_JSON};
use crate::scenarios::{metric, pareto_sweep, rho_sweep, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(
    name = "eqalloc",
    version,
    about = "Equitable subsidy allocation over networked communities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured policy over the horizon and write the series.
    Simulate(ScenarioArgs),
    /// SOL end-of-horizon ratios over a grid of equal-allocation weights.
    SweepRho {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Equal-allocation weights.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
        rho: Vec<f64>,
    },
    /// SOL end-of-horizon ratios over a (rho, sigma) grid with the democratic cost.
    SweepPareto {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', default_values_t = unit_grid(10))]
        rho: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5])]
        sigma: Vec<f64>,
    },
    /// Fit one static map per community from a CSV history.
    Learn {
        /// CSV with header `community,period,u_1..u_m,y_1..y_p`.
        #[arg(long)]
        input: PathBuf,
        /// Use only the most recent records of each community.
        #[arg(long)]
        window: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Project an allocation onto a budget set and print the result.
    Project {
        /// JSON document `{"allocation": [[..], ..], "budget": {"kind": .., "s_max": [..], "lower": ..}}`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Check a configuration without running it.
    Validate(ScenarioArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    NineCountry,
    Malawi,
    MalawiPareto,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, env = "EQALLOC_OUTPUT_DIR", default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario configuration file (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Shipped scenario.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Override a configuration field, e.g. `--set cost.rho=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl ScenarioArgs {
    /// Loads the configuration with overrides and seed applied, validated.
    pub fn load(&self) -> Result<ScenarioConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        let cfg = match (&self.config, self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                ScenarioConfig::load(&text, &overrides)?
            }
            (None, Some(Preset::NineCountry)) => {
                ScenarioConfig::load(NINE_COUNTRY_JSON, &overrides)?
            }
            (None, Some(Preset::Malawi)) => ScenarioConfig::load(MALAWI_JSON, &overrides)?,
            (None, Some(Preset::MalawiPareto)) => malawi_pareto()?.with_overrides(&overrides)?,
            (None, None) => {
                return Err(Error::Config(
                    "either --config or --preset is required".into(),
                ))
            }
        };
        cfg.build()?;
        Ok(cfg)
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectDoc {
    allocation: Profile,
    budget: BudgetSet,
}

/// Executes a parsed command, writing human-readable progress to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Validate(args) => {
            let cfg = args.load()?;
            let sc = cfg.build()?;
            writeln!(
                out,
                "ok: {} ({} communities, {} activities, {} periods, {} realizations)",
                cfg.name,
                sc.models.len(),
                sc.status_quo.dim(),
                cfg.horizon,
                cfg.n_realizations
            )?;
        }
        Command::Simulate(args) => {
            let cfg = args.load()?;
            let result = cfg.build()?.run()?;
            let dir = &args.output.output_dir;
            let mut csv = create(dir, "results.csv")?;
            write_result_csv(&result, &mut csv)?;
            csv.flush()?;
            let mut json = create(dir, "summary.json")?;
            write_json(&RunSummary::from_result(&result), &mut json)?;
            json.flush()?;
            writeln!(
                out,
                "{} (seed {}), median final values:",
                result.name, result.seed
            )?;
            for agg in &result.aggregates {
                let eq = result
                    .median_final(agg.policy, metric::EQUITABILITY)
                    .unwrap_or(f64::NAN);
                let ea = result
                    .median_final(agg.policy, metric::EQUAL_ALLOCATION)
                    .unwrap_or(f64::NAN);
                writeln!(
                    out,
                    "  {:<5} equitability {eq:.6}  equal allocation {ea:.6}",
                    agg.policy.label()
                )?;
            }
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::SweepRho { scenario, rho } => {
            let cfg = scenario.load()?;
            let rows = rho_sweep(&cfg, &rho)?;
            let dir = &scenario.output.output_dir;
            let mut csv = create(dir, "rho_sweep.csv")?;
            write_rho_csv(&rows, &mut csv)?;
            csv.flush()?;
            let mut json = create(dir, "rho_sweep.json")?;
            write_json(
                &RhoSweepSummary {
                    name: cfg.name.clone(),
                    seed: cfg.seed,
                    rows: rows.clone(),
                },
                &mut json,
            )?;
            json.flush()?;
            for r in &rows {
                writeln!(
                    out,
                    "rho {:.3}  equitability {:.6}  equal allocation {:.6}",
                    r.rho, r.equitability_ratio, r.equal_allocation_ratio
                )?;
            }
        }
        Command::SweepPareto {
            scenario,
            rho,
            sigma,
        } => {
            let cfg = scenario.load()?;
            let rows = pareto_sweep(&cfg, &rho, &sigma)?;
            let dir = &scenario.output.output_dir;
            let mut csv = create(dir, "pareto.csv")?;
            write_pareto_csv(&rows, &mut csv)?;
            csv.flush()?;
            let summary = ParetoSummary::new(cfg.name.clone(), cfg.seed, rows);
            let mut json = create(dir, "pareto.json")?;
            write_json(&summary, &mut json)?;
            json.flush()?;
            for r in &summary.rows {
                writeln!(
                    out,
                    "sigma {:.3} rho {:.3}  equitability {:.6}  equal allocation {:.6}  {:?}",
                    r.sigma, r.rho, r.equitability_ratio, r.equal_allocation_ratio, r.quadrant
                )?;
            }
        }
        Command::Learn {
            input,
            window,
            output,
        } => {
            let records = ingest_history(&input)?;
            let fits = fit_per_community(&records, window)?;
            let docs: Vec<EstimateDoc> = fits
                .iter()
                .map(|(&i, est)| EstimateDoc::new(i, est))
                .collect();
            let mut json = create(&output.output_dir, "estimates.json")?;
            write_json(&docs, &mut json)?;
            json.flush()?;
            for d in &docs {
                let flag = if d.rank_deficient {
                    "  (rank deficient)"
                } else {
                    ""
                };
                writeln!(
                    out,
                    "community {}: G = {:?} from {} records{flag}",
                    d.community, d.g_hat, d.n_samples
                )?;
            }
        }
        Command::Project { input } => {
            let text = fs::read_to_string(&input)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", input.display())))?;
            let doc: ProjectDoc = serde_json::from_str(&text)?;
            doc.budget.validate(doc.allocation.n_nodes())?;
            let projected = doc.budget.project(&doc.allocation)?;
            serde_json::to_writer(&mut *out, &projected)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
///
/// Returns the process exit status: 0 on success, 2 for usage errors and 1
/// for any other failure, with the diagnostic written to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
