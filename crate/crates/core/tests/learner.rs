mod common;

use common::{mean, median, stddev};
use sleepwake_core::learn::{
    confidence_radius, empirical_regret, oracle_cost_per_step, run_ce_learning, LearnConfig, Policy,
};
use sleepwake_core::sim::TxTimeDist;

fn uniform_config(horizon: u64, seed: u64) -> LearnConfig {
    LearnConfig::new(
        TxTimeDist::Uniform { lo: 0.5, hi: 1.5 },
        vec![1.0, 2.0, 4.0],
        vec![0.5, 0.4, 0.3],
        0.01,
        horizon,
        seed,
    )
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn deterministic_service_is_learned() {
    let errs: Vec<f64> = (0..20)
        .map(|seed| {
            let mut c = LearnConfig::new(
                TxTimeDist::Deterministic { value: 1.0 },
                vec![1.0, 2.0],
                vec![0.7, 0.6],
                0.01,
                1 << 16,
                seed,
            );
            c.trace_stride = 1 << 16;
            (run_ce_learning(&c).unwrap().final_theta - 1.0).abs()
        })
        .collect();
    assert!(median(&errs) <= 0.02, "median error {}", median(&errs));
}

#[test]
fn estimate_converges_for_a_spread_distribution() {
    let errs: Vec<f64> = (0..10)
        .map(|seed| {
            let mut c = uniform_config(1 << 14, seed);
            c.trace_stride = 1 << 14;
            (run_ce_learning(&c).unwrap().final_theta - 1.0).abs()
        })
        .collect();
    assert!(median(&errs) <= 0.02, "median error {}", median(&errs));
}

#[test]
fn plans_are_frozen_between_dyadic_steps() {
    let cfg = uniform_config(5000, 11);
    let t = run_ce_learning(&cfg).unwrap();
    assert_eq!(t.episodes.len(), 13);
    for (k, e) in t.episodes.iter().enumerate() {
        assert_eq!(e.index as usize, k);
        assert_eq!(e.start, 1 << k);
        assert_eq!(e.plan_used, cfg.plan_at(e.theta_used).unwrap());
        assert_eq!(e.plan_used.regime, t.episodes[0].plan_used.regime);
    }
    for row in &t.rows {
        assert_eq!(row.episode, 63 - row.n.leading_zeros());
    }
}

#[test]
fn confidence_radius_covers_the_estimate() {
    let (mut covered, mut total) = (0usize, 0usize);
    for seed in 0..50 {
        let t = run_ce_learning(&uniform_config(1 << 12, 100 + seed)).unwrap();
        for row in &t.rows {
            total += 1;
            covered += ((row.theta_hat - 1.0).abs() <= row.xi) as usize;
        }
    }
    let frac = covered as f64 / total as f64;
    assert!(frac >= 0.99, "coverage {frac}");
}

#[test]
fn radius_shrinks_along_a_run() {
    let cfg = uniform_config(1 << 14, 4);
    let t = run_ce_learning(&cfg).unwrap();
    let last = t.rows.last().unwrap();
    let samples = t.deliveries;
    assert_eq!(last.xi, confidence_radius(1 << 14, samples, 4.0, 1.5));
    let early = t.rows.iter().find(|r| r.xi.is_finite()).unwrap();
    assert!(last.xi < early.xi);
}

#[test]
fn rates_are_locally_lipschitz_in_the_estimate() {
    let cfg = uniform_config(1 << 12, 0);
    let star = cfg.plan_at(1.0).unwrap().rates;
    let finals: Vec<f64> = (0..10)
        .map(|seed| run_ce_learning(&uniform_config(1 << 12, 300 + seed)).unwrap().final_theta)
        .collect();
    let spread = finals.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
    assert!(spread > 0.0 && spread < 0.2);

    // steepest finite-difference slope over the neighbourhood the runs visit
    let (lo, hi) = (1.0 - 1.5 * spread, 1.0 + 1.5 * spread);
    let steps = 200;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let plans: Vec<Vec<f64>> = grid.iter().map(|&t| cfg.plan_at(t).unwrap().rates).collect();
    let lip = plans
        .windows(2)
        .zip(grid.windows(2))
        .map(|(p, g)| max_abs_diff(&p[0], &p[1]) / (g[1] - g[0]))
        .fold(0.0, f64::max);
    assert!(lip.is_finite() && lip > 0.0);
    for theta in finals {
        let r = cfg.plan_at(theta).unwrap().rates;
        assert!(max_abs_diff(&r, &star) <= lip * (theta - 1.0).abs() * (1.0 + 1e-9));
    }
}

#[test]
fn oracle_policy_has_no_drift() {
    let base = uniform_config(2, 0);
    let j = mean(
        &(0..4)
            .map(|i| {
                let mut c = base.clone();
                c.seed = 900 + i;
                oracle_cost_per_step(&c, 1 << 20).unwrap()
            })
            .collect::<Vec<_>>(),
    );
    let h = 1u64 << 14;
    let per_step: Vec<f64> = (0..50)
        .map(|seed| {
            let mut c = uniform_config(h, 2_000 + seed);
            c.policy = Policy::Oracle;
            c.trace_stride = h;
            let t = run_ce_learning(&c).unwrap();
            empirical_regret(&t, j).last().unwrap().1 / h as f64
        })
        .collect();
    let z = mean(&per_step) / (stddev(&per_step) / (per_step.len() as f64).sqrt());
    assert!(z.abs() <= 3.0, "z {z}");
}
