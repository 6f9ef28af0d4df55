//! Runs DCL and DCL+ by hand on three scalar communities whose map estimates
//! are wrong, printing the allocations and the learned gains. The step is a
//! fifth of 1/L so the allocation moves slower than the plants settle.

use eqalloc::dynamics::{CommunityModel, NoiseSpec};
use eqalloc::estimation::MapEstimate;
use eqalloc::feasible::BudgetSet;
use eqalloc::objectives::CostSpec;
use eqalloc::policies::{dcl_step, dclplus_step, maps_of, PolicyConfig, PolicyKind, PolicyState};
use eqalloc::profile::Profile;
use eqalloc::rng::rng_for;
use eqalloc::topology::NeighborhoodGraph;
use nalgebra::DMatrix;

fn main() -> eqalloc::Result<()> {
    let graph = NeighborhoodGraph::complete(3);
    let spec = CostSpec::equitability_only();
    let set = BudgetSet::cap(vec![9.0]);
    let plants: Vec<CommunityModel> = [1.0, 2.0, 3.0]
        .iter()
        .enumerate()
        .map(|(i, &b)| CommunityModel::scalar(i, 0.5, b, 0.5, 6.0 * b))
        .collect::<eqalloc::Result<_>>()?;
    let wrong: Vec<MapEstimate> = [1.5, 1.5, 1.5]
        .iter()
        .map(|&g| MapEstimate::from_matrix(DMatrix::from_element(1, 1, g)))
        .collect();

    for kind in [PolicyKind::Dcl, PolicyKind::DclPlus] {
        let gamma = 0.2 * PolicyConfig::new(kind).resolve_gamma(&graph, &maps_of(&wrong), &spec)?;
        let config = PolicyConfig::new(kind).with_gamma(gamma);
        let mut state = PolicyState {
            current_u: Profile::filled(3, 1, 3.0),
            estimates: wrong.clone(),
            period: 0,
            gamma,
        };
        let mut plants = plants.clone();
        let mut rng = rng_for(1, &[]);
        for _ in 0..300 {
            let mut y = Vec::new();
            for (i, p) in plants.iter_mut().enumerate() {
                y.extend(
                    p.step(state.current_u.node(i), &NoiseSpec::noiseless(), &mut rng)?
                        .1
                        .iter(),
                );
            }
            let y = Profile::from_flat(1, y)?;
            state = match kind {
                PolicyKind::DclPlus => dclplus_step(&state, &y, &graph, &spec, &set, &config)?,
                _ => dcl_step(&state, &y, &graph, &spec, &set)?,
            };
        }
        let gains: Vec<f64> = state.estimates.iter().map(|e| e.g_hat[(0, 0)]).collect();
        println!(
            "{kind}: u = {:.3?}, gains {gains:.3?}",
            state.current_u.as_slice()
        );
    }
    println!("true gains [1.000, 2.000, 3.000]; equitable u is proportional to 1/g");
    Ok(())
}
