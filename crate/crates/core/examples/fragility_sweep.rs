//! Sweeps the equal-allocation weight on the nine-country campaign and shows
//! how quickly equitability is lost.

use eqalloc::scenarios::presets::nine_country;
use eqalloc::scenarios::rho_sweep;

fn main() -> eqalloc::Result<()> {
    let rows = rho_sweep(&nine_country()?, &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5])?;
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>8}",
        "rho", "eq ratio", "ea ratio", "mean y", "std y"
    );
    for r in rows {
        println!(
            "{:>5.2} {:>10.3} {:>10.3} {:>10.2} {:>8.2}",
            r.rho,
            r.equitability_ratio,
            r.equal_allocation_ratio,
            r.mean_outcome[0],
            r.outcome_std[0]
        );
    }
    Ok(())
}
