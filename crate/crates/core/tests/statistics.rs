use emodyn::evalstats::{kfold_songs, pearson, student_t_cdf, williams_test};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[test]
fn t_cdf_matches_reference() {
    for df in [1.0, 2.0, 3.5, 10.0, 30.0, 97.0, 500.0] {
        let reference = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in -40..=40 {
            let t = i as f64 * 0.25;
            let err = (student_t_cdf(t, df) - reference.cdf(t)).abs();
            assert!(err < 1e-8, "df={df} t={t} err={err}");
        }
    }
}

#[test]
fn williams_p_matches_reference() {
    let w = williams_test(0.5, 0.3, 0.2, 100).unwrap();
    let reference = StudentsT::new(0.0, 1.0, w.df).unwrap();
    let p = 2.0 * (1.0 - reference.cdf(w.t.abs()));
    assert!((w.p - p).abs() < 1e-8);
}

#[test]
fn williams_grows_with_r13() {
    let mut last = f64::NEG_INFINITY;
    for i in 0..=12 {
        let r13 = 0.3 + 0.05 * i as f64;
        let w = williams_test(r13, 0.3, 0.2, 100).unwrap();
        assert!(w.t > last, "t not increasing at r13={r13}");
        last = w.t;
    }
}

#[test]
fn random_predictions_are_uncorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gold: Vec<f64> = (0..5000).map(|_| rng.random_range(0.0..10.0)).collect();
    let pred: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
    assert!(pearson(&pred, &gold).unwrap().abs() < 0.05);
}

proptest! {
    #[test]
    fn pearson_is_affine_invariant(
        pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 3..50),
        scale in 0.01..100.0f64,
        shift in -1e3..1e3f64,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(r) = pearson(&x, &y) {
            let x2: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            let r2 = pearson(&x2, &y).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((pearson(&neg, &y).unwrap() + r).abs() < 1e-12);
        }
    }

    #[test]
    fn song_folds_partition_the_songs(n in 2usize..60, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let ids: Vec<String> = (0..n).map(|i| format!("song{i}")).collect();
        let folds = kfold_songs(&ids, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<String> = folds.concat();
        all.sort();
        let mut expected = ids.clone();
        expected.sort();
        prop_assert_eq!(all, expected);
        prop_assert_eq!(kfold_songs(&ids, k, seed).unwrap(), folds);
    }
}
