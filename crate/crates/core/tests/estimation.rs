mod common;

use common::{random_matrix, rng};
use eqalloc::estimation::{fit_linear, fit_per_community, relearn_step, IoRecord, MapEstimate};
use eqalloc::io::parse_history;
use eqalloc::scenarios::presets::{nine_country, NINE_COUNTRY_HISTORY_CSV};
use eqalloc::scenarios::PopulationSpec;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn records_for(g: &DMatrix<f64>, inputs: &[Vec<f64>]) -> Vec<IoRecord> {
    inputs
        .iter()
        .enumerate()
        .map(|(k, u)| IoRecord {
            community: 0,
            period: k as i64,
            u: u.clone(),
            y: (g * DVector::from_column_slice(u))
                .iter()
                .copied()
                .collect(),
        })
        .collect()
}

#[test]
fn noiseless_spanning_data_recovers_the_map() {
    let mut r = rng(3);
    for _ in 0..50 {
        let (p, m) = (r.random_range(1..=3), r.random_range(1..=3));
        let g = random_matrix(&mut r, p, m, -3.0, 3.0);
        let inputs: Vec<Vec<f64>> = (0..m + 3)
            .map(|_| (0..m).map(|_| r.random_range(0.0..10.0)).collect())
            .collect();
        let est = fit_linear(&records_for(&g, &inputs), None).unwrap();
        assert!(!est.rank_deficient);
        assert!((&est.g_hat - &g).amax() < 1e-10);
    }
}

#[test]
fn collinear_inputs_are_flagged() {
    let g = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
    let inputs = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
    let est = fit_linear(&records_for(&g, &inputs), None).unwrap();
    assert!(est.rank_deficient);
    // minimum-norm solution spreads the gain over both inputs
    assert!((est.g_hat[(0, 0)] - 1.5).abs() < 1e-10 && (est.g_hat[(0, 1)] - 1.5).abs() < 1e-10);
}

#[test]
fn empty_history_is_an_error() {
    assert!(fit_linear(&[], None).is_err());
}

#[test]
fn shipped_history_matches_the_replicate_gains() {
    let records = parse_history(NINE_COUNTRY_HISTORY_CSV.as_bytes()).unwrap();
    assert_eq!(records.len(), 279);
    assert_eq!(records.first().unwrap().period, 1985);
    assert_eq!(records.last().unwrap().period, 2015);
    let fits = fit_per_community(&records, None).unwrap();
    let PopulationSpec::Scalar { static_gains, .. } = nine_country().unwrap().population else {
        panic!("nine-country population is scalar");
    };
    for (i, est) in &fits {
        let rel = (est.g_hat[(0, 0)] - static_gains[*i]).abs() / static_gains[*i];
        assert!(
            rel < 0.01,
            "community {i}: {} vs {}",
            est.g_hat[(0, 0)],
            static_gains[*i]
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn relearning_equals_batch_refit(seed in any::<u64>(), window in proptest::option::of(1usize..6)) {
        let mut r = rng(seed);
        let (p, m) = (r.random_range(1..=2), r.random_range(1..=2));
        let mut records = Vec::new();
        let mut est = MapEstimate::from_matrix(DMatrix::zeros(p, m));
        for k in 0..8 {
            let rec = IoRecord {
                community: 0,
                period: k,
                u: (0..m).map(|_| r.random_range(0.0..5.0)).collect(),
                y: (0..p).map(|_| r.random_range(0.0..5.0)).collect(),
            };
            records.push(rec.clone());
            est = relearn_step(&est, rec, window).unwrap();
            let batch = fit_linear(&records, window).unwrap();
            prop_assert_eq!(&est.g_hat, &batch.g_hat);
            prop_assert_eq!(est.rank_deficient, batch.rank_deficient);
        }
    }

    #[test]
    fn consistent_record_leaves_estimate_unchanged(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_matrix(&mut r, 2, 2, -3.0, 3.0);
        let inputs: Vec<Vec<f64>> = (0..4).map(|_| vec![r.random_range(0.0..5.0), r.random_range(0.0..5.0)]).collect();
        let recs = records_for(&g, &inputs);
        let est = fit_linear(&recs[..3], None).unwrap();
        let next = relearn_step(&est, recs[3].clone(), None).unwrap();
        prop_assert!((&next.g_hat - &est.g_hat).amax() < 1e-9);
    }
}
