//! Continuous-time event simulation of the sleep-wake protocol.
//!
//! Each source sleeps for an exponential time, wakes, senses the channel for
//! `t_s` and transmits if it heard nothing. Sources that wake within `t_s` of
//! the first waker collide with it. A cycle is the idle period followed by one
//! transmission or collision of random length `T`.

mod audit;
mod dist;
mod engine;
mod report;
mod stream;

pub use audit::{energy_audit, EnergyAudit};
pub use dist::TxTimeDist;
pub use engine::{Cycle, Outcome};
pub use report::{run_simulation, AggregateStats, SimReport, SourceStats};
pub use stream::{sampled_stream, Sample, SampledState, SampledStream, StreamEvent};

use crate::error::{Error, Result};
use crate::model::Fleet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopCondition {
    Cycles(u64),
    /// Simulated seconds.
    SimTime(f64),
    /// Successful deliveries, all sources together.
    Deliveries(u64),
}

/// What happens to sleep timers at the end of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimerPolicy {
    /// Every source draws a fresh timer.
    #[default]
    ResampleAll,
    /// Participants draw fresh timers; sleepers keep their residual timer,
    /// and a source that woke into a busy channel senses for `t_s` and draws
    /// a new one.
    PreserveResidual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub fleet: Fleet,
    pub tx_dist: TxTimeDist,
    /// Seconds; always `fleet.ts_ratio() * fleet.mean_tx_time()`.
    pub sensing_time: f64,
    pub seed: u64,
    /// Run index under `seed`; selects an independent random stream.
    pub stream: u64,
    pub stop: StopCondition,
    pub timer_policy: TimerPolicy,
}

/// Relative tolerance on `tx_dist.mean() == fleet.mean_tx_time()`.
pub const MEAN_TOL: f64 = 1e-9;

impl SimConfig {
    pub fn new(fleet: Fleet, tx_dist: TxTimeDist, seed: u64, stop: StopCondition) -> Result<Self> {
        let cfg = Self {
            sensing_time: fleet.sensing_time(),
            fleet,
            tx_dist,
            seed,
            stream: 0,
            stop,
            timer_policy: TimerPolicy::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_timer_policy(mut self, policy: TimerPolicy) -> Self {
        self.timer_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.tx_dist.validate()?;
        let declared = self.fleet.mean_tx_time();
        let actual = self.tx_dist.mean();
        if (actual - declared).abs() > MEAN_TOL * declared.max(1.0) {
            return Err(Error::MeanMismatch { declared, actual });
        }
        let expect = self.fleet.sensing_time();
        if (self.sensing_time - expect).abs() > MEAN_TOL * expect.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "sensing_time",
                value: self.sensing_time,
            });
        }
        match self.stop {
            StopCondition::Cycles(0) | StopCondition::Deliveries(0) => Err(Error::EmptyRun {
                what: "stop condition is zero",
            }),
            StopCondition::SimTime(t) if t.is_nan() || t <= 0.0 => Err(Error::EmptyRun {
                what: "stop condition is zero",
            }),
            _ => Ok(()),
        }
    }
}

/// Tracks the stop condition and the warm-up window (first 1% of the stop
/// target, in the stop's own unit).
#[derive(Debug, Clone)]
pub(crate) struct Progress {
    stop: StopCondition,
    cycles: u64,
    deliveries: u64,
    last_end: f64,
}

impl Progress {
    pub(crate) fn new(stop: StopCondition) -> Self {
        Self {
            stop,
            cycles: 0,
            deliveries: 0,
            last_end: 0.0,
        }
    }

    pub(crate) fn in_warmup(&self, cycle: &Cycle) -> bool {
        match self.stop {
            StopCondition::Cycles(n) => cycle.index < n / 100,
            StopCondition::SimTime(t) => cycle.end <= t / 100.0,
            StopCondition::Deliveries(n) => self.deliveries < n / 100,
        }
    }

    pub(crate) fn record(&mut self, cycle: &Cycle) {
        self.cycles += 1;
        if cycle.winner().is_some() {
            self.deliveries += 1;
        }
        self.last_end = cycle.end;
    }

    pub(crate) fn done(&self) -> bool {
        match self.stop {
            StopCondition::Cycles(n) => self.cycles >= n,
            StopCondition::SimTime(t) => self.last_end >= t,
            StopCondition::Deliveries(n) => self.deliveries >= n,
        }
    }
}

/// Per-source age process: age is `t - U_l(t)`.
#[derive(Debug, Clone)]
pub(crate) struct Ages {
    generation: alloc::vec::Vec<f64>,
    last_delivery: alloc::vec::Vec<f64>,
    last_service: alloc::vec::Vec<f64>,
}

pub(crate) struct Delivery {
    pub peak: f64,
    pub inter_departure: f64,
    /// `|peak - (previous service + inter-departure)| / delivery time`.
    pub identity_error: f64,
}

impl Ages {
    pub(crate) fn new(m: usize) -> Self {
        Self {
            generation: alloc::vec![0.0; m],
            last_delivery: alloc::vec![0.0; m],
            last_service: alloc::vec![0.0; m],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.generation.len()
    }

    pub(crate) fn age(&self, l: usize, t: f64) -> f64 {
        t - self.generation[l]
    }

    pub(crate) fn deliver(&mut self, l: usize, generated: f64, delivered: f64) -> Delivery {
        let peak = delivered - self.generation[l];
        let inter = delivered - self.last_delivery[l];
        let err = (peak - (self.last_service[l] + inter)).abs() / delivered;
        self.generation[l] = generated;
        self.last_delivery[l] = delivered;
        self.last_service[l] = delivered - generated;
        Delivery {
            peak,
            inter_departure: inter,
            identity_error: err,
        }
    }
}
