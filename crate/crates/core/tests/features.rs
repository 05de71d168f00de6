mod common;

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use tti_core::features::{
    calendar_features, expanded_width, indicator_features, DesignMatrix, FeatureGroup, FeatureSchema,
    PolyPlan, DEFAULT_EXPANSION_CAP,
};
use tti_core::{assemble, polynomial_expand, PredictionCase};

/// Every multiset of at most `d` indexes drawn from `0..p`, enumerated by
/// counting exponent vectors.
fn monomials(p: usize, d: usize) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut exps = vec![0usize; p];
    loop {
        if exps.iter().sum::<usize>() <= d {
            let mut m = Vec::new();
            for (i, e) in exps.iter().enumerate() {
                m.extend(std::iter::repeat_n(i, *e));
            }
            out.insert(m);
        }
        let mut i = 0;
        while i < p {
            exps[i] += 1;
            if exps[i] <= d {
                break;
            }
            exps[i] = 0;
            i += 1;
        }
        if i == p {
            break;
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

#[test]
fn expansion_width_is_binomial() {
    for p in 1..=10 {
        for d in 1..=5u32 {
            let plan = PolyPlan::new(p, d);
            let expect = binomial(p + d as usize, d as usize);
            assert_eq!(expanded_width(p, d), expect);
            assert_eq!(plan.width(), expect);
            if p <= 6 {
                let enumerated = monomials(p, d as usize);
                assert_eq!(enumerated.len(), expect);
                let got: BTreeSet<Vec<usize>> = plan.terms().iter().cloned().collect();
                assert_eq!(got, enumerated, "p={p} d={d}");
            }
        }
    }
}

#[test]
fn two_input_quadratic_layout() {
    let m = DesignMatrix::new(
        array![[2.0, 3.0], [-1.0, 0.5]],
        array![0.0, 0.0],
        vec!["a".into(), "b".into()],
        vec![NaiveDateTime::MIN; 2],
    )
    .unwrap();
    let e = polynomial_expand(&m, 2, DEFAULT_EXPANSION_CAP).unwrap();
    assert_eq!(e.names, ["1", "a", "b", "a^2", "a*b", "b^2"]);
    assert_eq!(e.x.row(0).to_vec(), [1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    assert_eq!(e.x.row(1).to_vec(), [1.0, -1.0, 0.5, 1.0, -0.5, 0.25]);
    let lin = polynomial_expand(&m, 1, DEFAULT_EXPANSION_CAP).unwrap();
    assert_eq!(lin.names, ["1", "a", "b"]);
}

#[test]
fn schema_groups() {
    for case in [PredictionCase::ShortTerm, PredictionCase::LongTerm] {
        let s = FeatureSchema::for_case(case);
        assert_eq!(s.width(), 93);
        let count = |g| s.groups.iter().filter(|x| **x == g).count();
        assert_eq!(count(FeatureGroup::Calendar), 5);
        assert_eq!(count(FeatureGroup::Indicator), 43);
        assert_eq!(count(FeatureGroup::Weather), 34);
        assert_eq!(count(FeatureGroup::Lag), 11);
    }
}

#[test]
fn assembled_synthetic_matrix_shapes() {
    let records = common::synthetic_records(1);
    let short = assemble(&records, PredictionCase::ShortTerm).unwrap();
    let long = assemble(&records, PredictionCase::LongTerm).unwrap();
    assert_eq!(short.n_cols(), 93);
    assert_eq!(long.n_cols(), 93);
    assert!(long.n_rows() < short.n_rows());
    assert!(short.n_rows() + 336 <= records.len());
    assert!(short.n_rows() > 50_000);
}

fn arb_time() -> impl Strategy<Value = NaiveDateTime> {
    (0i64..24 * 365 * 30).prop_map(|h| {
        NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap() + Duration::hours(h)
    })
}

proptest! {
    #[test]
    fn indicators_are_one_hot_per_group(t in arb_time()) {
        let v = indicator_features(t);
        prop_assert_eq!(v.iter().filter(|x| **x == 1.0).count(), 3);
        prop_assert_eq!(v.iter().filter(|x| **x == 0.0).count(), 40);
        prop_assert_eq!(v[..24].iter().sum::<f64>(), 1.0);
        prop_assert_eq!(v[24..31].iter().sum::<f64>(), 1.0);
        prop_assert_eq!(v[31..].iter().sum::<f64>(), 1.0);
        let c = calendar_features(t);
        prop_assert_eq!(v[c[0] as usize], 1.0);
        prop_assert_eq!(v[24 + c[2] as usize], 1.0);
        prop_assert_eq!(v[31 + c[3] as usize - 1], 1.0);
    }

    #[test]
    fn degree_one_expansion_keeps_inputs(
        rows in 1usize..6,
        cols in 1usize..6,
        seed in any::<u64>(),
    ) {
        let x = common::gaussian(seed, rows, cols);
        let plan = PolyPlan::new(cols, 1);
        let e = plan.expand(x.view());
        prop_assert!(e.column(0).iter().all(|v| *v == 1.0));
        prop_assert_eq!(e.slice(ndarray::s![.., 1..]).to_owned(), x);
    }

    #[test]
    fn expansion_entries_are_monomial_products(seed in any::<u64>(), d in 1u32..4) {
        let x = common::gaussian(seed, 3, 3);
        let plan = PolyPlan::new(3, d);
        let e = plan.expand(x.view());
        for (r, row) in e.rows().into_iter().enumerate() {
            for (t, v) in plan.terms().iter().zip(row) {
                let direct: f64 = t.iter().map(|&i| x[[r, i]]).product();
                prop_assert!((direct - v).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }
}

#[test]
fn degree_one_matrix_round_trip() {
    let x: Array2<f64> = common::gaussian(9, 4, 3);
    let y = Array1::zeros(4);
    let m = DesignMatrix::new(
        x.clone(),
        y,
        vec!["u".into(), "v".into(), "w".into()],
        vec![NaiveDateTime::MIN; 4],
    )
    .unwrap();
    let e = polynomial_expand(&m, 1, DEFAULT_EXPANSION_CAP).unwrap();
    assert_eq!(e.select_columns(&[1, 2, 3]).x, x);
}
