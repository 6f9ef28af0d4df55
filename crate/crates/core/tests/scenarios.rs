use eqalloc::policies::PolicyKind;
use eqalloc::scenarios::presets::{
    malawi, malawi_pareto, nine_country, nine_country_with, HealthScenario,
};
use eqalloc::scenarios::{metric, pareto_sweep, quadrant, rho_sweep, Quadrant, ScenarioConfig};
use eqalloc::Error;

fn small_nine_country() -> ScenarioConfig {
    nine_country()
        .unwrap()
        .with_overrides(&["n_realizations=3".into(), "estimate_error=0.05".into()])
        .unwrap()
}

#[test]
fn shipped_configs_validate() {
    for cfg in [
        nine_country().unwrap(),
        malawi().unwrap(),
        malawi_pareto().unwrap(),
    ] {
        cfg.build().unwrap();
    }
    for s in [
        HealthScenario::Nominal,
        HealthScenario::FeedbackNoise { std: 0.02 },
        HealthScenario::EstimateError { rel_std: 0.1 },
        HealthScenario::Drift { rel_std: 0.05 },
    ] {
        nine_country_with(s).unwrap().build().unwrap();
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = small_nine_country();
    let a = cfg.build().unwrap().run().unwrap();
    let b = cfg.build().unwrap().run().unwrap();
    assert_eq!(a, b);
    let other = cfg
        .with_overrides(&["seed=7".into()])
        .unwrap()
        .build()
        .unwrap()
        .run()
        .unwrap();
    assert_ne!(a.realizations, other.realizations);
}

#[test]
fn allocations_are_feasible_every_period() {
    for cfg in [
        small_nine_country(),
        malawi()
            .unwrap()
            .with_overrides(&["n_realizations=2".into()])
            .unwrap(),
    ] {
        let sc = cfg.build().unwrap();
        let result = sc.run().unwrap();
        for real in &result.realizations {
            for series in &real.series {
                assert_eq!(series.allocations.len(), cfg.horizon);
                for (k, u) in series.allocations.iter().enumerate() {
                    assert!(
                        sc.budget_at(k + 1).is_feasible(u, 1e-8),
                        "{} period {k}",
                        series.policy
                    );
                }
            }
        }
    }
}

#[test]
fn first_period_is_shared_by_all_policies() {
    let result = small_nine_country().build().unwrap().run().unwrap();
    for real in &result.realizations {
        let first = &real.series[0];
        for s in &real.series[1..] {
            for name in [
                metric::EQUITABILITY,
                metric::EQUAL_ALLOCATION,
                metric::REALIZED_EQUITABILITY,
            ] {
                let (a, b) = (first.metric(name).unwrap(), s.metric(name).unwrap());
                assert_eq!(a[0], b[0], "{name}");
                assert_eq!(b[0] / a[0], 1.0);
            }
        }
    }
}

#[test]
fn series_have_horizon_length_and_aggregates_cover_all_realizations() {
    let cfg = small_nine_country();
    let result = cfg.build().unwrap().run().unwrap();
    assert_eq!(result.realizations.len(), cfg.n_realizations);
    for agg in &result.aggregates {
        let stats = agg.stats(metric::EQUITABILITY).unwrap();
        assert_eq!(stats.mean.len(), cfg.horizon);
        let finals = result.final_values(agg.policy, metric::EQUITABILITY);
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        assert!((stats.mean[cfg.horizon - 1] - mean).abs() <= 1e-9 * mean.abs().max(1.0));
    }
}

#[test]
fn zero_horizon_gives_empty_series() {
    let cfg = nine_country()
        .unwrap()
        .with_overrides(&["horizon=0".into()])
        .unwrap();
    let result = cfg.build().unwrap().run().unwrap();
    for real in &result.realizations {
        for s in &real.series {
            assert!(s.is_empty());
            assert!(s.allocations.is_empty());
        }
    }
}

#[test]
fn sol_with_exact_maps_matches_the_offline_optimum() {
    let cfg = nine_country()
        .unwrap()
        .with_overrides(&["n_realizations=1".into()])
        .unwrap();
    let sc = cfg.build().unwrap();
    let result = sc.run().unwrap();
    let sol = result.series(0, PolicyKind::Sol).unwrap();
    let optimum = sc.optimum_path().unwrap();
    let last = cfg.horizon - 1;
    let offline =
        eqalloc::objectives::predicted_cost(&cfg.cost, &sc.graph, &optimum[last], &sc.true_maps)
            .unwrap();
    let online = eqalloc::objectives::predicted_cost(
        &cfg.cost,
        &sc.graph,
        &sol.allocations[last],
        &sc.true_maps,
    )
    .unwrap();
    assert!((online - offline).abs() <= 1e-6, "{online} vs {offline}");
}

#[test]
fn config_errors_name_the_problem() {
    let text = nine_country().unwrap().to_json().unwrap();
    let err = ScenarioConfig::load(&text, &["horizon=\"ten\"".into()]).unwrap_err();
    assert!(err.to_string().contains("horizon"), "{err}");
    let err = ScenarioConfig::load("{\n  \"schema_version\": 1,\n  oops\n}", &[]).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = ScenarioConfig::load(&text, &["surprise=1".into()]).unwrap_err();
    assert!(err.to_string().contains("surprise"), "{err}");
    let bad = ScenarioConfig::load(&text, &["schema_version=99".into()]).unwrap();
    assert!(matches!(bad.build(), Err(Error::Config(_))));
}

#[test]
fn overrides_fail_like_files() {
    let base = nine_country().unwrap();
    let via_override = base.with_overrides(&["cost.rho=-1".into()]).unwrap();
    let mut edited = base.clone();
    edited.cost.rho = -1.0;
    let from_file = ScenarioConfig::from_json(&edited.to_json().unwrap()).unwrap();
    assert_eq!(via_override, from_file);
    assert_eq!(
        via_override.build().unwrap_err().to_string(),
        from_file.build().unwrap_err().to_string()
    );
}

#[test]
fn config_json_round_trips() {
    for cfg in [nine_country().unwrap(), malawi().unwrap()] {
        assert_eq!(
            ScenarioConfig::from_json(&cfg.to_json().unwrap()).unwrap(),
            cfg
        );
    }
}

#[test]
fn wc_neqm_is_rejected_for_optimization() {
    let cfg = nine_country()
        .unwrap()
        .with_overrides(&["cost.metric=\"WC-NEqM\"".into()])
        .unwrap();
    assert!(matches!(cfg.build(), Err(Error::UnsupportedMetric(_))));
}

#[test]
fn rho_sweep_shape() {
    let rows = rho_sweep(&nine_country().unwrap(), &[0.0, 0.25, 0.5]).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].equitability_ratio < 1.0);
    for w in rows.windows(2) {
        assert!(w[1].equitability_ratio >= w[0].equitability_ratio);
        assert!(w[1].equal_allocation_ratio <= w[0].equal_allocation_ratio);
    }
}

#[test]
fn pareto_endpoint_minimizes_equal_allocation() {
    let grid = [0.0, 0.5, 1.0];
    let rows = pareto_sweep(&malawi_pareto().unwrap(), &grid, &[0.0, 0.5]).unwrap();
    assert_eq!(rows.len(), 6);
    for sigma in [0.0, 0.5] {
        let family: Vec<_> = rows.iter().filter(|r| r.sigma == sigma).collect();
        let end = family.iter().find(|r| r.rho == 1.0).unwrap();
        assert!(family
            .iter()
            .all(|r| end.equal_allocation_ratio <= r.equal_allocation_ratio));
        for r in &family {
            assert_eq!(
                r.quadrant,
                quadrant(r.equitability_ratio, r.equal_allocation_ratio)
            );
        }
    }
}

#[test]
fn quadrant_labels() {
    assert_eq!(quadrant(0.5, 0.5), Quadrant::I);
    assert_eq!(quadrant(0.5, 1.0), Quadrant::II);
    assert_eq!(quadrant(1.0, 1.0), Quadrant::III);
    assert_eq!(quadrant(2.0, 0.1), Quadrant::IV);
}
