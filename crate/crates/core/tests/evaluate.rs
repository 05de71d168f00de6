mod common;

use std::collections::BTreeSet;

use chrono::NaiveDateTime;
use ndarray::{array, Array1, Axis};
use proptest::prelude::*;
use tti_core::evaluate::Protocol;
use tti_core::features::DesignMatrix;
use tti_core::{
    cross_validate, kfold_split, r2_score, repeated_sampled_cv, ModelSpec, Parallelism, Preprocess,
};

#[test]
fn r2_reference_values() {
    let y = array![1.0, 2.0, 3.0];
    assert_eq!(r2_score(y.view(), y.view()).unwrap(), 1.0);
    let mean = Array1::from_elem(3, 2.0);
    assert!(r2_score(y.view(), mean.view()).unwrap().abs() <= 1e-12);
    let f = array![1.0, 2.0, 4.0];
    assert!((r2_score(y.view(), f.view()).unwrap() - 0.5).abs() <= 1e-12);
}

proptest! {
    #[test]
    fn r2_ignores_pair_order(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
        let y: Array1<f64> = v.iter().map(|p| p.0).collect();
        prop_assume!(y.var(0.0) > 1e-6);
        let f: Array1<f64> = v.iter().map(|p| p.1).collect();
        let a = r2_score(y.view(), f.view()).unwrap();
        let rev = |a: &Array1<f64>| a.iter().rev().copied().collect::<Array1<f64>>();
        let b = r2_score(rev(&y).view(), rev(&f).view()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(a <= 1.0);
    }

    #[test]
    fn r2_endpoints_of_a_blend(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
        let y: Array1<f64> = v.iter().map(|p| p.0).collect();
        prop_assume!(y.var(0.0) > 1e-6);
        let m = y.mean().unwrap();
        let blend = |a: f64| y.mapv(|t| a * t + (1.0 - a) * m);
        prop_assert!((r2_score(y.view(), blend(1.0).view()).unwrap() - 1.0).abs() <= 1e-12);
        prop_assert!(r2_score(y.view(), blend(0.0).view()).unwrap().abs() <= 1e-12);
        let half = r2_score(y.view(), blend(0.5).view()).unwrap();
        prop_assert!((half - 0.75).abs() <= 1e-9);
    }

    #[test]
    fn folds_partition_the_rows(n in 2usize..400, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let all: BTreeSet<usize> = folds.iter().flatten().copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), n);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(kfold_split(n, k, seed).unwrap(), folds);
    }

    #[test]
    fn cv_mean_is_fold_average(seed in 0u64..1000) {
        let x = common::gaussian(seed, 80, 3);
        let y = common::linear_target(seed, x.view(), &[1.0, 0.0, -1.0], 1.0);
        let s = cross_validate(&ModelSpec::ridge(1.0), x.view(), y.view(), 5, seed, Preprocess::default()).unwrap();
        prop_assert_eq!(s.per_fold.len(), 5);
        let avg = s.per_fold.iter().sum::<f64>() / 5.0;
        prop_assert!((s.mean - avg).abs() <= 1e-12);
    }
}

#[test]
fn thousand_rows_make_five_folds_of_two_hundred() {
    let folds = kfold_split(1000, 5, 0).unwrap();
    assert!(folds.iter().all(|f| f.len() == 200));
}

#[test]
fn huge_ridge_penalty_is_the_mean_baseline() {
    for seed in 0..5 {
        let x = common::gaussian(seed, 1000, 4);
        let y = common::linear_target(seed, x.view(), &[1.0, 1.0, -1.0, 0.5], 1.0);
        let s = cross_validate(&ModelSpec::ridge(1e9), x.view(), y.view(), 5, seed, Preprocess::default())
            .unwrap();
        assert!(s.mean.abs() <= 0.05, "seed {seed}: {}", s.mean);
    }
}

#[test]
fn pure_noise_scores_near_zero() {
    let mut total = 0.0;
    for seed in 0..10 {
        let x = common::gaussian(seed, 1000, 5);
        let y = common::gaussian(seed + 1000, 1000, 1).column(0).to_owned();
        let s = cross_validate(&ModelSpec::Linear, x.view(), y.view(), 5, seed, Preprocess::default())
            .unwrap();
        assert!(s.mean <= 0.05, "seed {seed}: {}", s.mean);
        total += s.mean;
    }
    assert!(total / 10.0 <= 0.01);
}

#[test]
fn realizable_target_scores_one() {
    let x = common::gaussian(3, 300, 4);
    let y = common::linear_target(3, x.view(), &[1.0, -2.0, 0.5, 0.0], 0.0);
    let s = cross_validate(&ModelSpec::Linear, x.view(), y.view(), 5, 1, Preprocess::default()).unwrap();
    assert!(s.mean >= 0.999);
}

fn big_matrix() -> DesignMatrix {
    let n = 56_791;
    let x = common::gaussian(77, n, 4);
    let y = common::linear_target(77, x.view(), &[1.0, 0.5, 0.0, -0.5], 1.0);
    DesignMatrix::new(
        x,
        y,
        (0..4).map(|j| format!("c{j}")).collect(),
        vec![NaiveDateTime::MIN; n],
    )
    .unwrap()
}

#[test]
fn sampled_protocol_on_paper_sized_data() {
    let m = big_matrix();
    let protocol = Protocol {
        seed: 2024,
        ..Protocol::default()
    };
    let spec = ModelSpec::ridge(1.0);
    let a = repeated_sampled_cv(&m, &spec, Preprocess::default(), protocol, Parallelism::Sequential).unwrap();
    assert_eq!(a.per_repeat.len(), 10);
    let seeds: BTreeSet<u64> = a.per_repeat.iter().map(|r| r.sample_seed.unwrap()).collect();
    assert_eq!(seeds.len(), 10);
    let fold_seeds: BTreeSet<u64> = a.per_repeat.iter().map(|r| r.fold_seed).collect();
    assert_eq!(fold_seeds.len(), 10);
    for (r, s) in a.per_repeat.iter().enumerate() {
        assert_eq!(s.n_sampled, 1000);
        assert_eq!(s.per_fold.len(), 5);
        let rows = protocol.sample_rows(m.n_rows(), r).unwrap();
        assert_eq!(rows.len(), 1000);
        assert_eq!(rows.iter().collect::<BTreeSet<_>>().len(), 1000);
        let x = m.x.select(Axis(0), &rows);
        let y = m.y.select(Axis(0), &rows);
        let alone = cross_validate(&spec, x.view(), y.view(), 5, protocol.fold_seed(r), Preprocess::default())
            .unwrap();
        assert_eq!(alone.per_fold, s.per_fold);
    }
    let b = repeated_sampled_cv(&m, &spec, Preprocess::default(), protocol, Parallelism::Rayon).unwrap();
    assert_eq!(a, b);
    let other = Protocol { seed: 2025, ..protocol };
    let c = repeated_sampled_cv(&m, &spec, Preprocess::default(), other, Parallelism::Sequential).unwrap();
    assert_ne!(a.scores(), c.scores());
}

#[test]
fn full_sample_varies_only_by_folds() {
    let x = common::gaussian(8, 120, 3);
    let y = common::linear_target(8, x.view(), &[1.0, 0.0, 1.0], 1.0);
    let m = DesignMatrix::new(x, y, vec!["a".into(), "b".into(), "c".into()], Vec::new()).unwrap();
    let protocol = Protocol {
        sample_size: 120,
        repeats: 3,
        k: 5,
        seed: 1,
    };
    for r in 0..3 {
        assert_eq!(protocol.sample_rows(120, r).unwrap(), (0..120).collect::<Vec<_>>());
    }
    let s = repeated_sampled_cv(&m, &ModelSpec::Linear, Preprocess::default(), protocol, Parallelism::Sequential)
        .unwrap();
    assert_eq!(s.per_repeat.len(), 3);
}
