use herdlab::control::{
    eval_cost_finite, eval_cost_mean_field, gamma_experiment, minimize_cost, ControlParams, CostEvaluator,
    FiniteCost, SearchOptions,
};
use herdlab::measures::{features_of, max_dist};
use herdlab::model::{AssumptionBounds, CostSpec, HerdLaw, Kernel, Noise, RunningCost, StateCost, SystemSpec};
use proptest::prelude::*;

fn steering(n: usize) -> (SystemSpec, CostSpec) {
    let mut s = SystemSpec::new(1, n, 1, 2.0, 0.05);
    s.kernels.k1 = Kernel::scalar(1.0, 1);
    s.noises.sigma_i = Noise::scalar(0.3, 1);
    s.initial.herd = HerdLaw::Gaussian {
        mean: vec![0.0],
        std: vec![0.5],
    };
    s.bounds = AssumptionBounds::uniform_box(1, 1, -2.0, 2.0, 1.0, 1.0);
    let costs = CostSpec {
        running: RunningCost::Quadratic {
            weight_h: 0.1,
            weight_u: 0.0,
            target_h: None,
        },
        transient: StateCost::Zero,
        endpoint: StateCost::MeanDistance {
            target: vec![2.0],
            weight: 1.0,
        },
    };
    (s, costs)
}

fn control_spec(d: usize, m: usize, ell: usize) -> SystemSpec {
    let mut s = SystemSpec::new(d, 4, m, 1.0, 0.1);
    s.initial.herders = vec![vec![0.0; d]; m];
    s.bounds = AssumptionBounds::uniform_box(d, ell, -1.5, 0.5, 0.7, 2.0);
    s
}

fn raw_params() -> impl Strategy<Value = (ControlParams, u64)> {
    (1usize..=2, 1usize..=2, 1usize..=2, 1usize..=3, any::<u64>()).prop_map(|(d, m, ell, pieces, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let spec = control_spec(d, m, ell);
        let mut p = ControlParams::new(&spec, pieces).unwrap();
        p.h.iter_mut().for_each(|v| *v = rng.gen_range(-4.0..4.0));
        p.g_weights.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        p.g_bias.iter_mut().for_each(|v| *v = rng.gen_range(-5.0..5.0));
        (p, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_yields_admissible_controls((raw, seed) in raw_params()) {
        use rand::{Rng, SeedableRng};
        let p = raw.projected();
        prop_assert_eq!(p.projected(), p.clone());
        prop_assert!(p.is_admissible());
        let blk = p.d * p.ell;
        for (i, v) in p.h.iter().enumerate() {
            prop_assert!(*v >= p.u_lower[i % blk] && *v <= p.u_upper[i % blk]);
        }
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed ^ 1);
        let (d, m) = (p.d, p.m);
        let mut ga = vec![0.0; p.ell];
        let mut gb = vec![0.0; p.ell];
        for _ in 0..50 {
            let ya: Vec<f64> = (0..m * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let yb: Vec<f64> = ya.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
            let ca: Vec<f64> = (0..5 * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let cb: Vec<f64> = ca.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
            let (fa, fb) = (features_of(d, &ca, 4.0), features_of(d, &cb, 4.0));
            for herder in 0..m {
                p.shape(herder, &ya, &fa, &mut ga);
                p.shape(herder, &yb, &fb, &mut gb);
                prop_assert!(ga.iter().all(|v| v.abs() <= p.g_bound));
                let input = max_dist(&ya, &yb).max(max_dist(fa.as_slice(), fb.as_slice()));
                prop_assert!(max_dist(&ga, &gb) <= p.lipschitz * input * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn cost_breakdown_is_additive(
        wh in 0.0f64..2.0,
        wu in 0.0f64..2.0,
        tau in 0.0f64..2.0,
        eps in 0.0f64..2.0,
        level in -1.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let (spec, _) = steering(20);
        let costs = CostSpec {
            running: RunningCost::Quadratic { weight_h: wh, weight_u: wu, target_h: None },
            transient: StateCost::SecondMoment { weight: tau },
            endpoint: StateCost::MeanDistance { target: vec![1.0], weight: eps },
        };
        let p = ControlParams::new(&spec, 3).unwrap().with_constant_profile(&[level]);
        let c = eval_cost_finite(&spec, &costs, &p, 3, seed).unwrap();
        prop_assert_eq!(c.total, c.running + c.transient + c.endpoint);
        let c = eval_cost_mean_field(&spec, &costs, &p, 60, 2, seed).unwrap();
        prop_assert_eq!(c.total, c.running + c.transient + c.endpoint);
    }
}

#[test]
fn search_output_is_admissible_with_monotone_trace() {
    let (spec, costs) = steering(50);
    let ev = FiniteCost {
        spec: spec.clone(),
        costs,
        replicas: 4,
        seed: 3,
    };
    let init = ControlParams::new(&spec, 4).unwrap();
    let opts = SearchOptions {
        budget: 80,
        search_g: true,
        ..SearchOptions::default()
    };
    let r = minimize_cost(&ev, &init, &opts, 5).unwrap();
    assert!(r.params.is_admissible());
    assert!(r.trace.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
    assert_eq!(r.trace.last().unwrap().best_so_far, r.cost.total);
    assert_eq!(ev.evaluate(&r.params).unwrap(), r.cost);
}

#[test]
fn scaling_all_costs_scales_totals_and_keeps_the_argmin() {
    let (spec, costs) = steering(40);
    let init = ControlParams::new(&spec, 2).unwrap();
    let opts = SearchOptions {
        budget: 60,
        ..SearchOptions::default()
    };
    let base_ev = FiniteCost {
        spec: spec.clone(),
        costs: costs.clone(),
        replicas: 3,
        seed: 1,
    };
    let base = minimize_cost(&base_ev, &init, &opts, 2).unwrap();
    for lambda in [2.0, 0.5, 3.0] {
        let ev = FiniteCost {
            costs: costs.scaled(lambda),
            ..base_ev.clone()
        };
        let r = minimize_cost(&ev, &init, &opts, 2).unwrap();
        assert_eq!(r.params, base.params, "lambda = {lambda}");
        for (a, b) in r.trace.iter().zip(&base.trace) {
            assert!((a.total - lambda * b.total).abs() <= 1e-12 * a.total.abs().max(1.0));
        }
    }
}

fn ou_variance(v0: f64, kappa: f64, sigma: f64, t: f64) -> f64 {
    let s = sigma * sigma / (2.0 * kappa);
    s + (v0 - s) * (-2.0 * kappa * t).exp()
}

#[test]
fn mean_field_endpoint_matches_the_ou_second_moment() {
    let mut spec = SystemSpec::new(1, 10, 1, 1.0, 0.01);
    spec.kernels.h1 = Kernel::scalar(-1.0, 1);
    spec.noises.sigma_i = Noise::scalar(0.5, 1);
    spec.initial.herd = HerdLaw::Gaussian {
        mean: vec![0.5],
        std: vec![1.0],
    };
    let costs = CostSpec {
        endpoint: StateCost::SecondMoment { weight: 1.0 },
        ..CostSpec::default()
    };
    let p = ControlParams::new(&spec, 1).unwrap();
    let c = eval_cost_mean_field(&spec, &costs, &p, 2000, 16, 4).unwrap();
    // the herd mean is conserved, so E x^2 = var(T) + 0.25
    let exact = ou_variance(1.0, 1.0, 0.5, 1.0) + 0.25;
    // Euler bias of the variance is O(dt)
    assert!((c.endpoint - exact).abs() <= 3.0 * c.endpoint_se + 0.01 * exact, "{c:?} vs {exact}");

    let doubled = eval_cost_mean_field(&spec, &costs, &p, 4000, 16, 4).unwrap();
    let se = (c.se * c.se + doubled.se * doubled.se).sqrt();
    assert!((doubled.total - c.total).abs() < 2.0 * se, "{} vs {}", c.total, doubled.total);
}

#[test]
fn steering_search_beats_both_baselines() {
    let (spec, costs) = steering(100);
    let ev = FiniteCost {
        spec: spec.clone(),
        costs,
        replicas: 4,
        seed: 8,
    };
    let init = ControlParams::new(&spec, 4).unwrap();
    let zero = ev.evaluate(&init.zero_profile()).unwrap();
    let push = ev.evaluate(&init.clone().with_constant_profile(&[1.0])).unwrap();
    let r = minimize_cost(&ev, &init, &SearchOptions { budget: 120, ..Default::default() }, 8).unwrap();
    assert!(r.cost.total < zero.total, "{} vs {}", r.cost.total, zero.total);
    assert!(r.cost.total < push.total, "{} vs {}", r.cost.total, push.total);
}

#[test]
fn largest_n_minimizer_is_near_optimal_for_the_limit_cost() {
    let (spec, costs) = steering(50);
    let init = ControlParams::new(&spec, 4).unwrap();
    let opts = SearchOptions {
        budget: 120,
        restarts: 1,
        ..SearchOptions::default()
    };
    let rep = gamma_experiment(&spec, &costs, &init, &[50, 200], 1000, 4, &opts, 6).unwrap();
    let last = rep.rows.last().unwrap();
    let se = (last.cross_se * last.cross_se + rep.f_star.se * rep.f_star.se + last.se * last.se).sqrt();
    assert!(
        last.cross_eval <= rep.f_star.total + last.gap + 2.0 * se,
        "{last:?} vs F* = {}",
        rep.f_star.total
    );
    assert!(rep.spread() > 0.0);
}
