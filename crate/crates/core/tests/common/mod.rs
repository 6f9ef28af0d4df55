#![allow(dead_code)]

use eqalloc::dynamics::{spectral_radius, CommunityModel};
use eqalloc::feasible::{BudgetKind, BudgetSet};
use eqalloc::objectives::CostSpec;
use eqalloc::profile::Profile;
use eqalloc::topology::NeighborhoodGraph;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph on `n >= 2` nodes without isolated nodes.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> NeighborhoodGraph {
    let p = rng.random_range(0.2..0.9);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    for i in 0..n {
        if !edges.iter().any(|&(a, b)| a == i || b == i) {
            let j = (i + 1 + rng.random_range(0..n - 1)) % n;
            edges.push((i.min(j), i.max(j)));
        }
    }
    NeighborhoodGraph::from_edges(n, &edges).unwrap()
}

pub fn random_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn random_maps(rng: &mut ChaCha8Rng, n: usize, p: usize, m: usize) -> Vec<DMatrix<f64>> {
    (0..n)
        .map(|_| random_matrix(rng, p, m, -2.0, 3.0))
        .collect()
}

pub fn random_profile(rng: &mut ChaCha8Rng, n: usize, dim: usize, lo: f64, hi: f64) -> Profile {
    Profile::from_flat(
        dim,
        (0..n * dim).map(|_| rng.random_range(lo..hi)).collect(),
    )
    .unwrap()
}

/// Cost with random nonnegative weights on every term.
pub fn random_spec(rng: &mut ChaCha8Rng, n: usize) -> CostSpec {
    CostSpec {
        rho: rng.random_range(0.0..2.0),
        sigma: rng.random_range(0.0..2.0),
        equity_weight: rng.random_range(0.0..2.0),
        omega_u: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        omega_y: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        ..CostSpec::equitability_only()
    }
}

/// Random model with spectral radius in `[0.1, rho_max]`.
pub fn random_stable_model(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
    p: usize,
    rho_max: f64,
) -> CommunityModel {
    let mut a = random_matrix(rng, n, n, -1.0, 1.0);
    let r = spectral_radius(&a).unwrap().max(1e-3);
    a *= rng.random_range(0.1..rho_max) / r;
    let b = random_matrix(rng, n, m, -1.0, 2.0);
    let c = random_matrix(rng, p, n, -1.0, 2.0);
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    CommunityModel::new(0, a, b, c, x0).unwrap()
}

/// Random feasible budget set for `n` nodes and `m` activities.
pub fn random_set(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BudgetSet {
    let lower = if rng.random_bool(0.5) {
        Some(random_profile(rng, n, m, 0.0, 1.0))
    } else {
        None
    };
    let s_max = (0..m)
        .map(|a| {
            let floor: f64 = lower
                .as_ref()
                .map_or(0.0, |l| (0..n).map(|i| l.node(i)[a]).sum());
            floor + rng.random_range(0.0..5.0)
        })
        .collect();
    let kind = if rng.random_bool(0.5) {
        BudgetKind::Exact
    } else {
        BudgetKind::Cap
    };
    BudgetSet { kind, s_max, lower }
}

/// Projection by enumerating every set of coordinates held at their lower
/// bound and keeping the closest feasible candidate.
pub fn brute_force_projection(set: &BudgetSet, z: &Profile) -> Profile {
    let (n, m) = (z.n_nodes(), z.dim());
    let mut out = z.clone();
    for a in 0..m {
        let zs: Vec<f64> = (0..n).map(|i| z.node(i)[a]).collect();
        let ls: Vec<f64> = (0..n).map(|i| set.lower_bound(i, a)).collect();
        let s = set.s_max[a];
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut consider = |v: Vec<f64>| {
            let sum: f64 = v.iter().sum();
            let tol = 1e-9 * (1.0 + s.abs());
            let within = v.iter().zip(&ls).all(|(x, l)| *x >= l - 1e-12);
            let budget_ok = match set.kind {
                BudgetKind::Exact => (sum - s).abs() <= tol,
                BudgetKind::Cap => sum <= s + tol,
            };
            if within && budget_ok {
                let d: f64 = v.iter().zip(&zs).map(|(x, y)| (x - y).powi(2)).sum();
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, v));
                }
            }
        };
        for mask in 0u32..(1 << n) {
            let fixed = |i: usize| mask & (1 << i) != 0;
            let free: Vec<usize> = (0..n).filter(|&i| !fixed(i)).collect();
            let fixed_sum: f64 = (0..n).filter(|&i| fixed(i)).map(|i| ls[i]).sum();
            if set.kind == BudgetKind::Cap {
                let v: Vec<f64> = (0..n)
                    .map(|i| if fixed(i) { ls[i] } else { zs[i] })
                    .collect();
                consider(v);
            }
            if free.is_empty() {
                let v = ls.clone();
                consider(v);
                continue;
            }
            let free_sum: f64 = free.iter().map(|&i| zs[i]).sum();
            let tau = (free_sum + fixed_sum - s) / free.len() as f64;
            if set.kind == BudgetKind::Cap && tau < 0.0 {
                continue;
            }
            let v: Vec<f64> = (0..n)
                .map(|i| if fixed(i) { ls[i] } else { zs[i] - tau })
                .collect();
            consider(v);
        }
        let (_, v) = best.expect("feasible set has a candidate");
        for (i, x) in v.into_iter().enumerate() {
            out.node_mut(i)[a] = x;
        }
    }
    out
}

/// Largest pointwise distance between DCL and SOL iterates over `periods`
/// periods on the Malawi replicate, with exact maps, no noise, and every
/// plant reset to the equilibrium of the allocation in force before it is
/// measured.
pub fn dcl_sol_max_gap(periods: usize) -> f64 {
    use eqalloc::estimation::MapEstimate;
    use eqalloc::policies::{dcl_step, sol_solve_from, PolicyConfig, PolicyKind, PolicyState};
    use eqalloc::scenarios::presets::malawi;

    let sc = malawi().unwrap().build().unwrap();
    let spec = &sc.config.cost;
    let set = sc.budget_at(0);
    let mut config = PolicyConfig::new(PolicyKind::Sol);
    config.tol = 0.0;
    let gamma = config
        .resolve_gamma(&sc.graph, &sc.true_maps, spec)
        .unwrap();
    let config = config.with_gamma(gamma);
    let start = set.project(&sc.status_quo).unwrap();

    let mut plants = sc.models.clone();
    let mut state = PolicyState {
        current_u: start.clone(),
        estimates: sc
            .true_maps
            .iter()
            .cloned()
            .map(MapEstimate::from_matrix)
            .collect(),
        period: 0,
        gamma,
    };
    let mut gap: f64 = 0.0;
    for k in 1..=periods {
        let mut y = Vec::new();
        for (i, plant) in plants.iter_mut().enumerate() {
            plant.state = plant
                .equilibrium_for(state.current_u.node(i))
                .unwrap()
                .x_bar;
            y.extend(plant.output().iter().copied());
        }
        let y = Profile::from_flat(plants[0].c().nrows(), y).unwrap();
        state = dcl_step(&state, &y, &sc.graph, spec, &set).unwrap();
        let mut sol_config = config.clone();
        sol_config.l_max = k;
        let sol =
            sol_solve_from(&sc.graph, &sc.true_maps, spec, &set, &sol_config, &start).unwrap();
        assert_eq!(sol.iterations, k);
        gap = gap.max(sol.u.distance(&state.current_u));
    }
    gap
}
