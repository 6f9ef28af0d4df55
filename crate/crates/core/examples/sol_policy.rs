//! Solves the offline allocation problem on the Malawi replicate with the
//! step size 1/L.

use eqalloc::policies::{lipschitz_estimate, sol_solve, PolicyConfig, PolicyKind};
use eqalloc::scenarios::presets::malawi;

fn main() -> eqalloc::Result<()> {
    let sc = malawi()?.build()?;
    let spec = &sc.config.cost;
    let l = lipschitz_estimate(&sc.graph, &sc.true_maps, spec)?;
    let mut config = PolicyConfig::new(PolicyKind::Sol);
    config.tol = 1e-8;
    config.l_max = 50_000;
    let report = sol_solve(&sc.graph, &sc.true_maps, spec, &sc.budget_at(0), &config)?;
    println!("L = {l:.4}, gamma = {:.4}", report.gamma);
    println!(
        "{} iterations, displacement {:.1e}, cost {:.3} -> {:.3}",
        report.iterations,
        report.displacement,
        report.cost_trace[0],
        report.final_cost()
    );
    for (i, row) in report.u.rows().take(5).enumerate() {
        println!("community {i}: {row:.3?}");
    }
    Ok(())
}
