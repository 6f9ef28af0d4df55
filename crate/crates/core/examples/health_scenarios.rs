//! Runs the four nine-country campaign variants and prints the median final
//! equitability of every policy.

use eqalloc::policies::PolicyKind;
use eqalloc::scenarios::presets::{nine_country_with, HealthScenario};
use eqalloc::scenarios::{metric, run_scenario};

fn main() -> eqalloc::Result<()> {
    let variants = [
        ("nominal", HealthScenario::Nominal),
        (
            "feedback noise 2%",
            HealthScenario::FeedbackNoise { std: 0.02 },
        ),
        (
            "estimate error 10%",
            HealthScenario::EstimateError { rel_std: 0.1 },
        ),
        ("drifting maps", HealthScenario::Drift { rel_std: 0.05 }),
    ];
    for (label, variant) in variants {
        let result = run_scenario(&nine_country_with(variant)?)?;
        print!("{label:<20}");
        for p in [PolicyKind::Sol, PolicyKind::Dcl, PolicyKind::DclPlus] {
            let eq = result
                .median_final(p, metric::EQUITABILITY)
                .unwrap_or(f64::NAN);
            print!("  {p:<4} {eq:>8.2}");
        }
        println!();
    }
    Ok(())
}
