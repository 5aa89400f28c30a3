//! Certainty-equivalence learning of an unknown mean transmission time.
//!
//! The learner plans as if the running mean of observed service times were
//! the truth, and only re-plans at dyadic step counts `n = 2^k`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Fleet, Regime, SleepPlan};
use crate::planner;
use crate::sim::{SampledStream, SimConfig, StopCondition, StreamEvent, TxTimeDist};

/// Running mean of collision-free service times.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimator {
    sum_service: f64,
    n_samples: u64,
    theta_init: f64,
}

impl ThetaEstimator {
    pub fn new(theta_init: f64) -> Self {
        Self {
            sum_service: 0.0,
            n_samples: 0,
            theta_init,
        }
    }

    pub fn observe_delivery(&mut self, service_time: f64) {
        self.sum_service += service_time;
        self.n_samples += 1;
    }

    /// Collision lengths carry no information the estimator may use.
    pub fn observe_collision(&mut self, _duration: f64) {}

    pub fn sum_service(&self) -> f64 {
        self.sum_service
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    /// `theta_init` until the first delivery.
    pub fn estimate(&self) -> f64 {
        if self.n_samples == 0 {
            self.theta_init
        } else {
            self.sum_service / self.n_samples as f64
        }
    }
}

/// Index `k` of the episode containing step `n >= 1` (`2^k <= n < 2^(k+1)`).
pub fn episode_index(n: u64) -> u32 {
    63 - n.max(1).leading_zeros()
}

/// `T_max sqrt(2 gamma ln(n) / N)`; infinite when `N = 0`.
pub fn confidence_radius(n: u64, samples: u64, gamma: f64, t_max: f64) -> f64 {
    if samples == 0 {
        return f64::INFINITY;
    }
    t_max * libm::sqrt(2.0 * gamma * libm::log(n as f64) / samples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Plans with the running estimate.
    CertaintyEquivalence,
    /// Plans with the true mean; the regret reference.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub true_dist: TxTimeDist,
    pub weights: Vec<f64>,
    pub efficiencies: Vec<f64>,
    /// Seconds (the ratio to `E[T]` is unknown to the learner).
    pub sensing_time: f64,
    /// Number of sampled steps.
    pub horizon: u64,
    /// Seconds.
    pub theta_init: f64,
    pub gamma: f64,
    pub seed: u64,
    pub stream: u64,
    pub policy: Policy,
    /// When set, rows carry `R(n) = C(n) - n * cost`.
    pub oracle_cost_per_step: Option<f64>,
    /// Keep every `trace_stride`-th row (plus dyadic steps and the last).
    pub trace_stride: u64,
}

impl LearnConfig {
    /// Defaults: `theta_init = T_max / 2`, `gamma = 4`, every row recorded.
    pub fn new(
        true_dist: TxTimeDist,
        weights: Vec<f64>,
        efficiencies: Vec<f64>,
        sensing_time: f64,
        horizon: u64,
        seed: u64,
    ) -> Self {
        Self {
            theta_init: 0.5 * true_dist.t_max(),
            true_dist,
            weights,
            efficiencies,
            sensing_time,
            horizon,
            gamma: 4.0,
            seed,
            stream: 0,
            policy: Policy::CertaintyEquivalence,
            oracle_cost_per_step: None,
            trace_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.true_dist.validate()?;
        if self.horizon < 2 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                value: self.horizon as f64,
            });
        }
        if !(self.theta_init.is_finite() && self.theta_init > 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta_init",
                value: self.theta_init,
            });
        }
        if !(self.sensing_time.is_finite() && self.sensing_time >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sensing_time",
                value: self.sensing_time,
            });
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: self.gamma,
            });
        }
        if self.trace_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "trace_stride",
                value: 0.0,
            });
        }
        Fleet::from_slices(&self.weights, &self.efficiencies, 0.0, 1.0).map(|_| ())
    }

    /// Fleet as seen by a planner that believes `E[T] = theta`.
    pub fn fleet_at(&self, theta: f64) -> Result<Fleet> {
        Fleet::from_slices(
            &self.weights,
            &self.efficiencies,
            self.sensing_time / theta,
            theta,
        )
    }

    /// Plan the learner would use if its estimate were `theta`.
    pub fn plan_at(&self, theta: f64) -> Result<SleepPlan> {
        Ok(planner::plan(&self.fleet_at(theta)?)?.plan)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub index: u32,
    /// `2^index`.
    pub start: u64,
    /// Seconds.
    pub theta_used: f64,
    pub plan_used: SleepPlan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n: u64,
    pub episode: u32,
    /// Estimate after observing step `n`, seconds.
    pub theta_hat: f64,
    /// Weighted peaks charged up to step `n`, seconds.
    pub cumulative_cost: f64,
    pub regret: Option<f64>,
    /// Seconds; infinite before the first delivery.
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnTrace {
    pub episodes: Vec<Episode>,
    pub rows: Vec<TraceRow>,
    pub horizon: u64,
    pub final_theta: f64,
    pub total_cost: f64,
    pub deliveries: u64,
    pub collisions: u64,
}

impl LearnTrace {
    pub fn theta_series(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.rows.iter().map(|r| (r.n, r.theta_hat))
    }

    pub fn confidence_series(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.rows.iter().map(|r| (r.n, r.xi))
    }

    pub fn regret_series(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.rows.iter().filter_map(|r| r.regret.map(|g| (r.n, g)))
    }

    /// Cumulative cost at step `n`, if that row was recorded.
    pub fn cost_at(&self, n: u64) -> Option<f64> {
        self.rows
            .binary_search_by_key(&n, |r| r.n)
            .ok()
            .map(|i| self.rows[i].cumulative_cost)
    }
}

/// Runs the configured policy for `horizon` sampled steps.
pub fn run_ce_learning(config: &LearnConfig) -> Result<LearnTrace> {
    drive(config, true)
}

/// `R(n) = C(n) - n * oracle_cost_per_step` over the recorded rows.
pub fn empirical_regret(trace: &LearnTrace, oracle_cost_per_step: f64) -> Vec<(u64, f64)> {
    trace
        .rows
        .iter()
        .map(|r| (r.n, r.cumulative_cost - r.n as f64 * oracle_cost_per_step))
        .collect()
}

/// Average cost per sampled step of the oracle policy over `steps` steps.
pub fn oracle_cost_per_step(config: &LearnConfig, steps: u64) -> Result<f64> {
    let cfg = LearnConfig {
        policy: Policy::Oracle,
        horizon: steps,
        oracle_cost_per_step: None,
        ..config.clone()
    };
    Ok(drive(&cfg, false)?.total_cost / steps as f64)
}

fn drive(config: &LearnConfig, record: bool) -> Result<LearnTrace> {
    config.validate()?;
    let truth = config.true_dist.mean();
    let true_fleet = config.fleet_at(truth)?;
    let mut sim_cfg = SimConfig::new(
        true_fleet,
        config.true_dist,
        config.seed,
        StopCondition::Cycles(u64::MAX),
    )?
    .with_stream(config.stream);
    sim_cfg.sensing_time = config.sensing_time;
    let regime = Regime::of_total(config.efficiencies.iter().sum());

    let mut estimator = ThetaEstimator::new(config.theta_init);
    let choose = |est: &ThetaEstimator| match config.policy {
        Policy::CertaintyEquivalence => est.estimate(),
        Policy::Oracle => truth,
    };
    let intensities = |plan: &SleepPlan, theta: f64| -> Vec<f64> {
        plan.rates.iter().map(|&r| r / theta).collect()
    };

    let theta0 = choose(&estimator);
    let plan0 = config.plan_at(theta0)?;
    let mut stream = SampledStream::with_intensities(&sim_cfg, intensities(&plan0, theta0))?;
    let first = stream.next();
    debug_assert!(matches!(first.map(|s| s.event), Some(StreamEvent::Initial)));

    let mut trace = LearnTrace {
        episodes: Vec::new(),
        rows: Vec::new(),
        horizon: config.horizon,
        final_theta: theta0,
        total_cost: 0.0,
        deliveries: 0,
        collisions: 0,
    };
    let t_max = config.true_dist.t_max();
    let mut cost = 0.0;
    for n in 1..=config.horizon {
        let sample = stream.next().ok_or(Error::EmptyRun {
            what: "sampled stream ended early",
        })?;
        match sample.event {
            StreamEvent::DeliveryEnd {
                source,
                service_time,
                peak,
            } => {
                estimator.observe_delivery(service_time);
                cost += config.weights[source] * peak;
                trace.deliveries += 1;
            }
            StreamEvent::CollisionEnd { duration, .. } => {
                estimator.observe_collision(duration);
                trace.collisions += 1;
            }
            StreamEvent::AccessStart { .. } | StreamEvent::Initial => {}
        }
        if n.is_power_of_two() {
            let theta = choose(&estimator);
            let plan = config.plan_at(theta)?;
            assert_eq!(plan.regime, regime, "regime depends on efficiencies only");
            stream.set_intensities(&intensities(&plan, theta))?;
            trace.episodes.push(Episode {
                index: episode_index(n),
                start: n,
                theta_used: theta,
                plan_used: plan,
            });
        }
        let keep = record
            && (n % config.trace_stride == 0 || n.is_power_of_two() || n == config.horizon);
        if keep {
            trace.rows.push(TraceRow {
                n,
                episode: episode_index(n),
                theta_hat: estimator.estimate(),
                cumulative_cost: cost,
                regret: config
                    .oracle_cost_per_step
                    .map(|j| cost - n as f64 * j),
                xi: confidence_radius(n, estimator.n_samples(), config.gamma, t_max),
            });
        }
    }
    trace.final_theta = estimator.estimate();
    trace.total_cost = cost;
    Ok(trace)
}
