//! Evaluates the equitability metrics, the equal-allocation cost and the full
//! cost on a small path graph.

use eqalloc::objectives::{
    equal_allocation_cost, equitability_violation, neqm, total_cost, wc_neqm, CostSpec, Metric,
};
use eqalloc::profile::Profile;
use eqalloc::topology::NeighborhoodGraph;

fn main() -> eqalloc::Result<()> {
    let graph = NeighborhoodGraph::path(4);
    let y = Profile::from_rows(vec![vec![60.0], vec![62.0], vec![70.0], vec![71.0]])?;
    let u = Profile::from_rows(vec![vec![10.0], vec![10.0], vec![14.0], vec![6.0]])?;

    for i in 0..graph.n_nodes() {
        println!(
            "community {i}: neighbors {:?}, NEqM {:.2}, WC-NEqM {:.2}",
            graph.neighbors(i),
            neqm(&graph, &y, i)?,
            wc_neqm(&graph, &y, i)?
        );
    }
    println!(
        "equitability violation {:.2}",
        equitability_violation(Metric::Neqm, &graph, &y)?
    );
    println!("equal-allocation cost {:.2}", equal_allocation_cost(&u));

    let spec = CostSpec::democratic(0.3, 0.5, vec![1.0; 4], vec![0.5; 4]);
    println!(
        "total cost at rho 0.3, sigma 0.5: {:.2}",
        total_cost(&spec, &graph, &u, &y)?
    );
    Ok(())
}
