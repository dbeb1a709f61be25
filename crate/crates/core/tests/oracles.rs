//! Cross-checks of the simulator, sampler, spatial index and optimizer
//! against independent reference computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use d2d_range::config::Scenario;
use d2d_range::experiments::{cmd_compare, cmd_sweep, cmd_validate, MatchedBudget};
use d2d_range::layout::Point;
use d2d_range::optimizer::{
    optimal_common_rmax_analytic, optimal_rmax, rmax_for_d2d_budget, AggregateCurve, AnalyticCurve,
    EnergyCurve, OptimizerSettings,
};
use d2d_range::sim::{simulate_class, Realization, RealizationStats};
use d2d_range::spatial::SpatialIndex;
use d2d_range::traffic::{cumulative, sample_request_time};
use d2d_range::{ContentClass, Error, MixEntry, TrafficMix};

fn class(phi: f64, timeout_s: f64) -> ContentClass {
    ContentClass::with_defaults(phi, 900.0, 5.0, timeout_s).unwrap()
}

fn entry(id: &str, c: ContentClass, share: f64) -> MixEntry {
    MixEntry {
        id: id.into(),
        class: c,
        load_share: share,
    }
}

#[test]
fn base_station_only_deliveries_match_mean_i2d_energy() {
    let s = Scenario::baseline();
    let model = s.analytic_model().unwrap();
    let sim = simulate_class(&class(1.0, 0.0), 0.0, 100, &s.sim_context(), 17).unwrap();
    assert_eq!(sim.mean.offload_fraction, 0.0);
    assert_eq!(sim.mean.e_d2d_j, 0.0);
    let diff = (sim.mean.e_i2d_j - model.i2d_tx_energy()).abs();
    assert!(
        diff <= 3.0 * sim.stderr_i2d_j,
        "{} vs {} (se {})",
        sim.mean.e_i2d_j,
        model.i2d_tx_energy(),
        sim.stderr_i2d_j
    );
}

#[test]
fn central_cell_record_count_matches_density() {
    let s = Scenario::baseline();
    let phi = 0.6;
    let counts: Vec<f64> = (0..200u64)
        .map(|k| {
            let real = Realization::draw(&class(phi, 0.0), &s.layout, k);
            let recs = d2d_range::sim::deliver(
                &real.field,
                &real.requests,
                &class(phi, 0.0),
                30.0,
                &s.sim_context(),
            )
            .unwrap();
            assert_eq!(recs.len(), real.requests.len());
            RealizationStats::from_records(&recs).central_records as f64
        })
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let expected = s.layout.ue_density() * phi * s.layout.cell_area();
    assert!((mean - expected).abs() <= 3.0 * (var / n).sqrt(), "{mean} vs {expected}");
}

#[test]
fn request_times_pass_kolmogorov_smirnov() {
    let c = class(0.5, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 20_000;
    let mut xs: Vec<f64> = (0..n).map(|_| sample_request_time(&c, &mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cumulative(x, &c);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic.
    assert!(d < 1.63 / (n as f64).sqrt(), "D = {d}");
}

#[test]
fn nearest_holder_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let n = rng.random_range(0..300);
        let r_max: f64 = rng.random_range(0.0..120.0);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(-400.0..400.0), rng.random_range(-400.0..400.0)))
            .collect();
        let mut idx = SpatialIndex::new(r_max.clamp(1.0, 25.0), n);
        for (i, p) in pts.iter().enumerate() {
            idx.insert(i, *p);
        }
        let q = Point::new(rng.random_range(-400.0..400.0), rng.random_range(-400.0..400.0));
        let brute = pts
            .iter()
            .enumerate()
            .filter(|(_, p)| q.distance_sq(p) <= r_max * r_max)
            .min_by(|a, b| q.distance_sq(a.1).total_cmp(&q.distance_sq(b.1)).then(a.0.cmp(&b.0)))
            .map(|(i, p)| (i, q.distance(p)));
        assert_eq!(idx.nearest(q, r_max), brute);
    }
}

#[test]
fn holder_at_exactly_r_max_is_found() {
    let mut idx = SpatialIndex::new(25.0, 100);
    for i in 0..60 {
        idx.insert(i, Point::new(1000.0 + i as f64, 0.0));
    }
    idx.insert(60, Point::new(0.0, 40.0));
    assert_eq!(idx.nearest(Point::ORIGIN, 40.0), Some((60, 40.0)));
}

#[test]
fn single_class_common_optimum_equals_class_optimum() {
    let s = Scenario::baseline();
    let model = s.analytic_model().unwrap();
    let opts = OptimizerSettings::default();
    let c = class(0.3, 0.0);
    for w in [0.2, 0.5, 0.8] {
        let single = optimal_rmax(&model, &c, w, &opts).unwrap();
        let common =
            optimal_common_rmax_analytic(&model, &TrafficMix::single("c", c.clone()), w, &opts)
                .unwrap();
        assert!((single.r_hat_m - common.r_hat_m).abs() <= 0.2);

        let twins = TrafficMix::new(vec![entry("a", c.clone(), 0.3), entry("b", c.clone(), 0.7)])
            .unwrap();
        let twin = optimal_common_rmax_analytic(&model, &twins, w, &opts).unwrap();
        assert!((twin.r_hat_m - single.r_hat_m).abs() <= 0.2);
    }
}

#[test]
fn common_cost_dominates_per_class_optima() {
    let s = Scenario::baseline();
    let model = s.analytic_model().unwrap();
    let opts = OptimizerSettings::default();
    let mix = TrafficMix::new(vec![
        entry("a", class(0.2, 0.0), 0.25),
        entry("b", class(0.8, 0.0), 0.75),
    ])
    .unwrap();
    let weights = d2d_range::optimizer::aggregate_weights(&mix).unwrap();
    for w in [0.3, 0.5, 0.9] {
        let common = optimal_common_rmax_analytic(&model, &mix, w, &opts).unwrap();
        let selective: f64 = mix
            .entries()
            .iter()
            .zip(&weights)
            .map(|(e, cw)| cw * optimal_rmax(&model, &e.class, w, &opts).unwrap().cost_value)
            .sum();
        assert!(common.cost_value >= selective * (1.0 - 1e-9));
    }
    assert!(matches!(
        TrafficMix::new(vec![]),
        Err(Error::Domain(_))
    ));
}

#[test]
fn budget_matching_round_trips() {
    let s = Scenario::baseline();
    let model = s.analytic_model().unwrap();
    let opts = OptimizerSettings::default();
    let mix = TrafficMix::new(vec![
        entry("a", class(0.2, 0.0), 0.5),
        entry("b", class(0.8, 0.0), 0.5),
    ])
    .unwrap();
    let curves: Vec<AnalyticCurve<'_>> = mix
        .entries()
        .iter()
        .map(|e| AnalyticCurve {
            model: &model,
            class: &e.class,
        })
        .collect();
    let agg =
        AggregateCurve::new(&mix, curves.iter().map(|c| c as &dyn EnergyCurve).collect()).unwrap();
    assert_eq!(rmax_for_d2d_budget(&agg, 0.0, &opts).unwrap(), 0.0);
    let mut last = 0.0;
    for r in [5.0, 37.5, 80.0, 150.0, 240.0] {
        let budget = agg.breakdown(r).unwrap().e_d2d_j;
        let back = rmax_for_d2d_budget(&agg, budget, &opts).unwrap();
        assert!((back - r).abs() <= 0.2, "{r} -> {back}");
        assert!(back >= last);
        last = back;
    }
    let common = optimal_common_rmax_analytic(&model, &mix, 0.5, &opts).unwrap();
    let back = rmax_for_d2d_budget(&agg, common.breakdown.e_d2d_j, &opts).unwrap();
    assert!((back - common.r_hat_m).abs() <= 0.2);
    let top = agg.breakdown(300.0).unwrap().e_d2d_j;
    assert!(matches!(
        rmax_for_d2d_budget(&agg, top * 1.5, &opts),
        Err(Error::BudgetRange { .. })
    ));
}

#[test]
fn heavier_d2d_weight_never_enlarges_range() {
    let s = Scenario::baseline();
    let model = s.analytic_model().unwrap();
    let opts = OptimizerSettings::default();
    for phi in [0.2, 0.8] {
        let c = class(phi, 0.0);
        let rs: Vec<f64> = (0..=10)
            .map(|i| optimal_rmax(&model, &c, i as f64 / 10.0, &opts).unwrap().r_hat_m)
            .collect();
        assert!(rs.windows(2).all(|p| p[1] <= p[0] + 0.2), "{rs:?}");
        assert_eq!(rs[10], 0.0);
    }
    let low = optimal_rmax(&model, &class(0.2, 0.0), 0.5, &opts).unwrap();
    let high = optimal_rmax(&model, &class(0.8, 0.0), 0.5, &opts).unwrap();
    assert!(high.r_hat_m <= low.r_hat_m + 0.2);
}

#[test]
fn single_class_compare_has_no_savings() {
    let s = Scenario::with_mix(TrafficMix::single("only", class(0.5, 0.0))).unwrap();
    let report = cmd_compare(&s, &[0.3, 0.7]).unwrap();
    for r in &report.rows {
        match r.matched {
            MatchedBudget::Feasible {
                i2d_savings_pct, ..
            } => assert!(i2d_savings_pct.abs() < 0.5, "{i2d_savings_pct}"),
            MatchedBudget::Infeasible => panic!("single-class budget must be reachable"),
        }
        assert!(r.common_i2d_savings_pct.abs() < 0.5);
    }
}

#[test]
fn delay_tolerance_does_not_raise_simulated_i2d_energy() {
    let mix = TrafficMix::new(vec![
        entry("t0000", class(0.4, 0.0), 0.5),
        entry("t3600", class(0.4, 3600.0), 0.5),
    ])
    .unwrap();
    let mut s = Scenario::with_mix(mix).unwrap();
    s.simulation.n_realizations = 60;
    let report = cmd_sweep(&s, &[20.0, 60.0], &[0.5]).unwrap();
    let sims: Vec<_> = report.rows.iter().filter_map(|r| r.simulated.map(|x| (r.class_id.clone(), x))).collect();
    for r in [20.0, 60.0] {
        let get = |id: &str| sims.iter().find(|(i, x)| i == id && x.r_max_m == r).unwrap().1;
        let (a, b) = (get("t0000"), get("t3600"));
        let se = (a.stderr_i2d_j.powi(2) + b.stderr_i2d_j.powi(2)).sqrt();
        assert!(b.mean.e_i2d_j <= a.mean.e_i2d_j + 3.0 * se);
    }
    // Analytic rows only for the non-delay-tolerant class.
    assert!(report
        .rows
        .iter()
        .all(|r| r.source.as_str() == "simulated" || r.class_id == "t0000"));
}

#[test]
fn single_realization_validate_does_not_crash() {
    let mut s = Scenario::baseline();
    s.simulation.n_realizations = 1;
    let rows = cmd_validate(&s, &[10.0, 50.0]).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.simulated.stderr_total_j.is_nan()));
}

#[test]
fn validate_requires_a_non_delay_tolerant_class() {
    let s = Scenario::with_mix(TrafficMix::single("slow", class(0.5, 60.0))).unwrap();
    assert!(matches!(cmd_validate(&s, &[10.0]), Err(Error::Usage(_))));
}

#[test]
fn zero_weight_yields_zero_ranges_at_w_one() {
    let s = Scenario::baseline();
    let rows = d2d_range::experiments::cmd_optimize(&s, &[1.0]).unwrap();
    assert!(rows.iter().all(|r| r.result.r_hat_m == 0.0));
    let model = s.analytic_model().unwrap();
    let direct = optimal_rmax(&model, &class(0.2, 0.0), 0.6, &OptimizerSettings::default()).unwrap();
    let via = d2d_range::experiments::cmd_optimize(&s, &[0.6]).unwrap();
    let row = via.iter().find(|r| r.class_id == "phi0.2").unwrap();
    assert_eq!(row.result, direct);
}
