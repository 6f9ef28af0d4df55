//! Traces the equitability/equal-allocation trade-off on the Malawi replicate
//! for three dissatisfaction weights.

use eqalloc::scenarios::pareto_sweep;
use eqalloc::scenarios::presets::{malawi_pareto, unit_grid};

fn main() -> eqalloc::Result<()> {
    let rows = pareto_sweep(&malawi_pareto()?, &unit_grid(10), &[0.0, 0.25, 0.5])?;
    for r in rows {
        println!(
            "sigma {:.2} rho {:.1}: equitability {:>8.4} equal allocation {:>8.4} quadrant {:?}",
            r.sigma, r.rho, r.equitability_ratio, r.equal_allocation_ratio, r.quadrant
        );
    }
    Ok(())
}
