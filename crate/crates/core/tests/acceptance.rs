//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Criterion 6 runs the full default grid for
//! both prediction cases and dominates the runtime.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::Duration as Hours;
use ndarray::{array, Array1, Array2, Axis};
use tti_core::describe::Key;
use tti_core::evaluate::{prepare_fold, Protocol};
use tti_core::experiment::CellStatus;
use tti_core::features::{calendar_features, indicator_features, FeatureGroup, FeatureSchema, PolyPlan};
use tti_core::regress::{
    dual_objective, fit_lasso, fit_linear, fit_ridge, fit_tree, ResolvedKernel, SvrProblem,
    DEFAULT_LASSO_MAX_ITER, DEFAULT_LASSO_TOL, DEFAULT_SVR_TOL,
};
use tti_core::*;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let el = t.elapsed();
    ensure(el < limit, format!("{what} took {:.1}s, limit {}s", el.as_secs_f64(), limit.as_secs()))
}

fn r2_suite() -> Check {
    let t = Instant::now();
    let y = array![1.0, 2.0, 3.0];
    let perfect = r2_score(y.view(), y.view()).map_err(|e| e.to_string())?;
    let constant = r2_score(y.view(), Array1::from_elem(3, 2.0).view()).map_err(|e| e.to_string())?;
    let half = r2_score(y.view(), array![1.0, 2.0, 4.0].view()).map_err(|e| e.to_string())?;
    ensure((perfect - 1.0).abs() <= 1e-12, format!("perfect gave {perfect}"))?;
    ensure(constant.abs() <= 1e-12, format!("constant gave {constant}"))?;
    ensure((half - 0.5).abs() <= 1e-12, format!("hand case gave {half}"))?;
    within(t, Duration::from_secs(1), "R² suite")?;
    Ok(format!("1, 0, 0.5 within 1e-12 in {:?}", t.elapsed()))
}

fn solver_suite() -> Check {
    let t = Instant::now();
    let mut worst_ols: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for seed in 0..5 {
        let x = common::gaussian(seed, 50, 5);
        let y = common::linear_target(seed, x.view(), &[1.0, -2.0, 0.5, 3.0, 0.0], 0.3);
        let (b, w) = common::ols_oracle(x.view(), y.view());
        let ridge = fit_ridge(x.view(), y.view(), 0.0, true);
        let ols = fit_linear(x.view(), y.view(), true, false).map_err(|e| e.to_string())?;
        for m in [&ridge, &ols] {
            worst_ols = worst_ols.max((m.intercept - b).abs());
            for (a, e) in m.weights.iter().zip(&w) {
                worst_ols = worst_ols.max((a - e).abs());
            }
        }
        for alpha in [0.1, 1.0, 10.0] {
            let m = fit_ridge(x.view(), y.view(), alpha, true);
            let g = common::ridge_gradient(x.view(), y.view(), &m.weights, m.intercept, alpha);
            worst_grad = worst_grad.max(common::norm(&g) / 50.0);
        }
    }
    ensure(worst_ols < 1e-8, format!("OLS deviation {worst_ols:e}"))?;
    ensure(worst_grad < 1e-6, format!("ridge gradient/n {worst_grad:e}"))?;

    let mut worst_kkt: f64 = 0.0;
    let mut worst_soft: f64 = 0.0;
    for seed in 0..10 {
        let x = common::standardized(seed, 120, 8);
        let y = common::linear_target(seed, x.view(), &[2.0, -1.0, 0.5, 0.0, 0.0, 0.1, 0.0, 0.0], 0.5);
        for alpha in [0.01, 0.1, 0.5] {
            let m = fit_lasso(x.view(), y.view(), alpha, DEFAULT_LASSO_TOL, DEFAULT_LASSO_MAX_ITER)
                .map_err(|e| e.to_string())?;
            let n = y.len() as f64;
            let r = &y - &m.predict(x.view());
            worst_kkt = worst_kkt.max((r.sum() / n).abs());
            for (j, wj) in m.weights.iter().enumerate() {
                let c = x.column(j).dot(&r) / n;
                let v = if *wj == 0.0 {
                    (c.abs() - alpha).max(0.0)
                } else {
                    (c - alpha * wj.signum()).abs()
                };
                worst_kkt = worst_kkt.max(v);
            }
        }
        let x1 = common::standardized(seed, 40, 1);
        let y1 = common::linear_target(seed, x1.view(), &[0.8], 0.4);
        let xc = x1.column(0);
        let yc = &y1 - y1.mean().unwrap();
        let s = xc.dot(&xc) / 40.0;
        let ols = xc.dot(&yc) / xc.dot(&xc);
        for alpha in [0.01, 0.2, 5.0] {
            let m = fit_lasso(x1.view(), y1.view(), alpha, DEFAULT_LASSO_TOL, DEFAULT_LASSO_MAX_ITER)
                .map_err(|e| e.to_string())?;
            worst_soft = worst_soft.max((m.weights[0] - common::soft_threshold(ols * s, alpha) / s).abs());
        }
    }
    ensure(worst_kkt < 1e-6, format!("lasso KKT violation {worst_kkt:e}"))?;
    ensure(worst_soft < 1e-8, format!("lasso soft-threshold deviation {worst_soft:e}"))?;

    for seed in 0..20u64 {
        let n = 10 + (seed as usize * 7) % 41;
        let p = 1 + seed as usize % 4;
        let depth = 1 + seed as usize % 3;
        let x = common::gaussian(seed, n, p);
        let y = common::linear_target(seed, x.view(), &vec![1.0; p], 0.5);
        let model = fit_tree(x.view(), y.view(), depth, 1);
        let rows: Vec<usize> = (0..n).collect();
        let oracle = common::oracle_tree(x.view(), y.view(), &rows, 0, depth, 1);
        for r in x.rows() {
            ensure(
                model.predict_row(r) == oracle.predict(r),
                format!("tree differs from oracle on problem {seed}"),
            )?;
        }
    }

    let mut worst_svr: f64 = 0.0;
    for seed in 0..6u64 {
        let n = 4 + seed as usize % 3;
        let x = common::gaussian(seed, n, 2);
        let y = common::linear_target(seed, x.view(), &[1.0, -0.5], 0.3);
        let problem = SvrProblem::new(x.view(), y.view(), ResolvedKernel::resolve(Kernel::default(), x.view()));
        let sol = problem.solve(1.0, 0.1, DEFAULT_SVR_TOL).map_err(|e| e.to_string())?;
        let own = dual_objective(problem.kernel_matrix(), y.view(), &sol.beta, 0.1);
        let brute = common::svr_dual_brute(problem.kernel_matrix(), y.view(), 1.0, 0.1);
        worst_svr = worst_svr.max((own - brute).abs());
    }
    ensure(worst_svr < 1e-2, format!("SVR dual gap {worst_svr:e}"))?;
    within(t, Duration::from_secs(30), "solver suite")?;
    Ok(format!(
        "OLS {worst_ols:.1e}, grad/n {worst_grad:.1e}, KKT {worst_kkt:.1e}, soft {worst_soft:.1e}, 20 trees exact, SVR {worst_svr:.1e} in {:.1}s",
        t.elapsed().as_secs_f64()
    ))
}

fn expansion_suite() -> Check {
    for p in 1..=10usize {
        for d in 1..=5u32 {
            let c = (1..=d as usize).fold(1usize, |a, i| a * (p + i) / i);
            let plan = PolyPlan::new(p, d);
            let distinct: BTreeSet<&Vec<usize>> = plan.terms().iter().collect();
            ensure(
                plan.width() == c && distinct.len() == c,
                format!("p={p} d={d}: width {} vs C(p+d,d) {c}", plan.width()),
            )?;
        }
    }
    let e = PolyPlan::new(2, 2).expand(array![[2.0, 3.0]].view());
    ensure(
        e.row(0).to_vec() == [1.0, 2.0, 3.0, 4.0, 6.0, 9.0],
        format!("[a, b] = [2, 3] expanded to {e}"),
    )?;
    let names = PolyPlan::new(2, 2).names(&["a".into(), "b".into()]);
    ensure(names == ["1", "a", "b", "a^2", "a*b", "b^2"], format!("names {names:?}"))?;
    Ok("50 (p, d) widths and the [1, a, b, a², ab, b²] layout".into())
}

fn rfe_suite() -> Check {
    let t = Instant::now();
    let informative = [2usize, 9, 15];
    let mut hits = 0;
    for seed in 0..20 {
        let x = common::standardized(seed, 200, 20);
        let mut w = vec![0.0; 20];
        for (c, v) in informative.iter().zip([1.0, -0.7, 0.5]) {
            w[*c] = v;
        }
        let y = common::linear_target(seed, x.view(), &w, 1.0);
        let r = rfe(x.view(), y.view(), 3).map_err(|e| e.to_string())?;
        if informative.iter().all(|c| r.selected.contains(c)) {
            hits += 1;
        }
    }
    ensure(hits >= 18, format!("recovered {hits}/20"))?;
    within(t, Duration::from_secs(10), "RFE suite")?;
    Ok(format!("{hits}/20 seeds recovered all 3 informative columns in {:?}", t.elapsed()))
}

fn protocol_suite() -> Check {
    let data = synthesize_dataset(
        chrono::NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
        chrono::NaiveDate::from_ymd_opt(2016, 6, 26).unwrap(),
        3,
    )
    .map_err(|e| e.to_string())?;
    let records = join_tti_weather(&data.tti, &data.weather).map_err(|e| e.to_string())?.records;
    let n = records.len();
    let mut rows = Vec::with_capacity(n * 82);
    for r in &records {
        rows.extend(calendar_features(r.timestamp));
        rows.extend(indicator_features(r.timestamp));
        rows.extend(r.weather);
    }
    let width = rows.len() / n;
    let x = Array2::from_shape_vec((n, width), rows).map_err(|e| e.to_string())?;
    let y: Array1<f64> = records.iter().map(|r| r.tti).collect();
    let names = (0..width).map(|j| format!("c{j}")).collect();
    let m = DesignMatrix::new(x, y, names, records.iter().map(|r| r.timestamp).collect())
        .map_err(|e| e.to_string())?;
    let protocol = Protocol {
        seed: 7,
        ..Protocol::default()
    };
    let spec = ModelSpec::ridge(1.0);
    let run = |p| repeated_sampled_cv(&m, &spec, Preprocess::default(), protocol, p).map_err(|e| e.to_string());
    let a = run(Parallelism::Sequential)?;
    let b = run(Parallelism::Sequential)?;
    let c = run(Parallelism::Rayon)?;
    let seeds: BTreeSet<u64> = a.per_repeat.iter().filter_map(|r| r.sample_seed).collect();
    let bits = |s: &RepeatedCvScore| s.per_repeat.iter().flat_map(|r| r.per_fold.iter().map(|v| v.to_bits())).collect::<Vec<_>>();
    ensure(n == 56_791, format!("dataset has {n} rows"))?;
    ensure(a.per_repeat.len() == 10, "repeat count")?;
    ensure(seeds.len() == 10, format!("{} distinct sample seeds", seeds.len()))?;
    ensure(a.per_repeat.iter().all(|r| r.n_sampled == 1000 && r.per_fold.len() == 5), "sample or fold sizes")?;
    for r in 0..10 {
        let rows = protocol.sample_rows(n, r).map_err(|e| e.to_string())?;
        ensure(rows.iter().collect::<BTreeSet<_>>().len() == 1000, "sample rows repeat")?;
    }
    ensure(bits(&a) == bits(&b) && bits(&a) == bits(&c), "scores not bit-identical across runs")?;
    Ok(format!("{n} rows, 10 × 1000 samples, 5 folds, bit-identical reruns, mean {:.4}", a.mean))
}

fn grid_suite(records: &[JoinedRecord]) -> Check {
    let mut best = HashMap::new();
    let mut timing = Vec::new();
    let mut failures = Vec::new();
    for case in [PredictionCase::ShortTerm, PredictionCase::LongTerm] {
        let m = assemble(records, case).map_err(|e| e.to_string())?;
        let cfg = GridConfig::for_case(case);
        let t = Instant::now();
        let results = run_grid(&m, &cfg, Parallelism::Rayon).map_err(|e| e.to_string())?;
        let el = t.elapsed();
        timing.push(format!("{} {:.0}s", case.as_str(), el.as_secs_f64()));
        let failed = results.iter().filter(|r| r.status == CellStatus::Failed).count();
        let evaluated = results.iter().filter(|r| r.status != CellStatus::Skipped).count();
        ensure(failed * 100 <= evaluated, format!("{failed} of {evaluated} cells failed in {case:?}"))?;
        failures.push(format!("{failed}/{evaluated}"));
        let rows = best_per_model(&results).map_err(|e| e.to_string())?;
        eprintln!("{}", experiment::summary_markdown(&rows, case.as_str()));
        ensure(el < Duration::from_secs(600), format!("{case:?} grid took {:.0}s", el.as_secs_f64()))?;
        best.insert(case, rows);
    }
    let short = &best[&PredictionCase::ShortTerm];
    let long = &best[&PredictionCase::LongTerm];
    let score = |rows: &[experiment::SummaryRow], f: Family| rows.iter().find(|r| r.family == f).unwrap().score;
    let rank = |rows: &[experiment::SummaryRow], f: Family| 1 + rows.iter().position(|r| r.family == f).unwrap();
    let ridge_short = score(short, Family::Ridge);
    let ridge_long = score(long, Family::Ridge);
    ensure(ridge_short >= 0.85, format!("short-term ridge {ridge_short:.4} < 0.85"))?;
    for f in Family::ALL {
        ensure(
            score(long, f) < score(short, f),
            format!("{} long {:.4} ≥ short {:.4}", f.as_str(), score(long, f), score(short, f)),
        )?;
    }
    let gap = ridge_short - ridge_long;
    ensure(gap >= 0.1, format!("ridge gap {gap:.4} < 0.1"))?;
    let ranks = (rank(short, Family::Ridge), rank(long, Family::Ridge));
    ensure(ranks.0 <= 2 && ranks.1 <= 2, format!("ridge ranks {ranks:?}"))?;
    Ok(format!(
        "ridge short {ridge_short:.4} long {ridge_long:.4} gap {gap:.4}, ranks {}/{}, every family lower long-term; {}; failed cells {}",
        ranks.0,
        ranks.1,
        timing.join(", "),
        failures.join(", ")
    ))
}

fn describe_suite(records: &[JoinedRecord]) -> Check {
    let series = |k, split| aggregate_mean(records, k, split).map_err(|e| e.to_string());
    let hours = &series(KeyKind::Hour, None)?[0];
    let at = |h: i32| hours.point(h).map(|p| p.mean_tti).unwrap_or(f64::NAN);
    let morning = (0..12).max_by(|a, b| at(*a).total_cmp(&at(*b))).unwrap();
    let evening = (12..24).max_by(|a, b| at(*a).total_cmp(&at(*b))).unwrap();
    ensure((morning, evening) == (8, 17), format!("hourly peaks at {morning} and {evening}"))?;
    let weekday = &series(KeyKind::Weekday, None)?[0];
    ensure(
        weekday.argmax() == Some(Key::Int(3)) && weekday.argmin() == Some(Key::Int(6)),
        format!("weekday max {:?} min {:?}", weekday.argmax(), weekday.argmin()),
    )?;
    let month = &series(KeyKind::Month, None)?[0];
    ensure(month.argmax() == Some(Key::Int(6)), format!("monthly max {:?}", month.argmax()))?;
    let split = series(KeyKind::Hour, Some(SplitRule::WetDry))?;
    let wet_wins = (0..24)
        .filter(|h| match (split[0].point(*h), split[1].point(*h)) {
            (Some(w), Some(d)) => w.mean_tti >= d.mean_tti,
            _ => false,
        })
        .count();
    ensure(wet_wins >= 18, format!("wet ≥ dry at {wet_wins}/24 hours"))?;
    Ok(format!("peaks 08:00/17:00, Wednesday max, Saturday min, June max, wet ≥ dry at {wet_wins}/24 hours"))
}

fn leakage_suite(records: &[JoinedRecord]) -> Check {
    let tti: HashMap<_, _> = records.iter().map(|r| (r.timestamp, r.tti)).collect();
    let mut checked = 0usize;
    for case in [PredictionCase::ShortTerm, PredictionCase::LongTerm] {
        let m = assemble(records, case).map_err(|e| e.to_string())?;
        let schema = FeatureSchema::for_case(case);
        for (j, _) in schema.groups.iter().enumerate().filter(|(_, g)| **g == FeatureGroup::Lag) {
            let h: i64 = schema.names[j]
                .trim_start_matches("lag_")
                .trim_end_matches('h')
                .parse()
                .map_err(|_| format!("unparsable lag column {}", schema.names[j]))?;
            ensure(h >= case.min_lag(), format!("{case:?} has lag {h}h below {}h", case.min_lag()))?;
            for (i, t) in m.timestamps.iter().enumerate() {
                ensure(m.x[[i, j]] == tti[&(*t - Hours::hours(h))], format!("lag {h}h mismatch at {t}"))?;
                checked += 1;
            }
        }
    }
    let m = assemble(records, PredictionCase::ShortTerm).map_err(|e| e.to_string())?;
    let x = m.x.slice(ndarray::s![..1000, ..]).to_owned();
    let y = m.y.slice(ndarray::s![..1000]).to_owned();
    let folds = kfold_split(1000, 5, 3).map_err(|e| e.to_string())?;
    for held in 0..5 {
        let fold = prepare_fold(x.view(), y.view(), &folds, held, Preprocess::default()).map_err(|e| e.to_string())?;
        let means = x.select(Axis(0), &fold.train_rows).mean_axis(Axis(0)).unwrap();
        let dev = fold
            .pipeline
            .pre
            .means
            .iter()
            .zip(&means)
            .map(|(a, e)| (a - e).abs() / e.abs().max(1.0))
            .fold(0.0, f64::max);
        ensure(dev <= 1e-12, format!("fold {held} scaler mean deviates by {dev:e}"))?;
        ensure(fold.valid_rows.iter().all(|r| !fold.train_rows.contains(r)), "held-out rows in training")?;
    }
    Ok(format!("{checked} lag cells at or beyond the minimum lag; fold scalers fitted on training rows only"))
}

fn main() -> ExitCode {
    let records = common::synthetic_records(0);
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("R² oracle suite", Box::new(r2_suite)),
        ("solver oracle equivalence", Box::new(solver_suite)),
        ("polynomial expansion width", Box::new(expansion_suite)),
        ("RFE recovery", Box::new(rfe_suite)),
        ("protocol fidelity", Box::new(protocol_suite)),
        ("qualitative grid reproduction", Box::new(|| grid_suite(&records))),
        ("descriptive calibration", Box::new(|| describe_suite(&records))),
        ("leakage guard", Box::new(|| leakage_suite(&records))),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
