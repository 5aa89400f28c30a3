use alloc::vec;
use alloc::vec::Vec;

use super::engine::{Channel, Cycle, Outcome};
use super::{Ages, Delivery, Progress, SimConfig};
use crate::error::{Error, Result};
use crate::model::check_len;
use crate::rng::SplitRng;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceStats {
    pub deliveries: u64,
    /// Seconds; `NaN` without deliveries.
    pub peak_age_mean: f64,
    pub peak_age_samples_stddev: f64,
    /// Sum of recorded peaks, seconds.
    pub peak_age_sum: f64,
    /// Fraction of cycles won.
    pub empirical_access_prob: f64,
    /// Transmit (and collision) time over total time.
    pub empirical_transmit_fraction: f64,
    /// Delta-method standard error of the transmit fraction, treating cycles
    /// as i.i.d.
    pub transmit_fraction_stderr: f64,
    /// Seconds; `NaN` without deliveries.
    pub mean_inter_departure: f64,
    /// Mean number of cycles from one success to the next (inclusive).
    pub cycles_between_successes_mean: f64,
    pub cycles_between_successes_samples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    /// Cycles after warm-up.
    pub cycles: u64,
    pub warmup_cycles: u64,
    pub collisions: u64,
    /// `sum(w_l * peak_age_mean_l)`, seconds.
    pub weighted_avg_peak_age: f64,
    /// Seconds after warm-up.
    pub total_time: f64,
    /// Largest relative violation of peak = previous service + inter-departure.
    pub max_peak_identity_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub per_source: Vec<SourceStats>,
    pub aggregate: AggregateStats,
}

#[derive(Debug, Clone, Default)]
struct SourceAcc {
    deliveries: u64,
    peak_sum: f64,
    peak_sq: f64,
    inter_sum: f64,
    last_success: Option<u64>,
    between_sum: u64,
    between_n: u64,
    tx_sum: f64,
    tx_sq: f64,
    tx_len: f64,
}

/// Channel, age processes and statistics of one run.
#[derive(Debug, Clone)]
pub(crate) struct Simulation {
    pub(crate) channel: Channel,
    pub(crate) ages: Ages,
    pub(crate) progress: Progress,
    weights: Vec<f64>,
    acc: Vec<SourceAcc>,
    cycles: u64,
    warmup: u64,
    collisions: u64,
    len_sum: f64,
    len_sq: f64,
    identity_err: f64,
}

pub(crate) struct Step {
    pub cycle: Cycle,
    pub warmup: bool,
    pub delivery: Option<Delivery>,
}

impl Simulation {
    pub(crate) fn new(config: &SimConfig, rates: &[f64]) -> Result<Self> {
        config.validate()?;
        let fleet = &config.fleet;
        check_len(fleet.len(), rates.len())?;
        let mean = fleet.mean_tx_time();
        let intensities = rates.iter().map(|&r| r / mean).collect();
        Self::with_intensities(config, intensities)
    }

    pub(crate) fn with_intensities(config: &SimConfig, intensities: Vec<f64>) -> Result<Self> {
        let m = config.fleet.len();
        check_len(m, intensities.len())?;
        let channel = Channel::new(
            intensities,
            config.sensing_time,
            config.tx_dist,
            config.timer_policy,
            SplitRng::new(config.seed, config.stream),
        )?;
        Ok(Self {
            channel,
            ages: Ages::new(m),
            progress: Progress::new(config.stop),
            weights: config.fleet.weights(),
            acc: vec![SourceAcc::default(); m],
            cycles: 0,
            warmup: 0,
            collisions: 0,
            len_sum: 0.0,
            len_sq: 0.0,
            identity_err: 0.0,
        })
    }

    pub(crate) fn done(&self) -> bool {
        self.progress.done()
    }

    pub(crate) fn step(&mut self) -> Step {
        let cycle = self.channel.step();
        let warmup = self.progress.in_warmup(&cycle);
        let delivery = cycle
            .winner()
            .map(|l| self.ages.deliver(l, cycle.access, cycle.end));
        self.progress.record(&cycle);
        if warmup {
            self.warmup += 1;
            // cycle counting for geometric gaps starts after warm-up
            return Step {
                cycle,
                warmup,
                delivery,
            };
        }
        self.cycles += 1;
        let len = cycle.length();
        self.len_sum += len;
        self.len_sq += len * len;
        for &l in self.channel.participants() {
            let a = &mut self.acc[l];
            a.tx_sum += cycle.duration;
            a.tx_sq += cycle.duration * cycle.duration;
            a.tx_len += cycle.duration * len;
        }
        match (cycle.outcome, &delivery) {
            (Outcome::Success(l), Some(d)) => {
                let a = &mut self.acc[l];
                a.deliveries += 1;
                a.peak_sum += d.peak;
                a.peak_sq += d.peak * d.peak;
                a.inter_sum += d.inter_departure;
                if let Some(prev) = a.last_success {
                    a.between_sum += cycle.index - prev;
                    a.between_n += 1;
                }
                a.last_success = Some(cycle.index);
                self.identity_err = self.identity_err.max(d.identity_error);
            }
            _ => self.collisions += 1,
        }
        Step {
            cycle,
            warmup,
            delivery,
        }
    }

    pub(crate) fn report(&self) -> Result<SimReport> {
        if self.cycles == 0 {
            return Err(Error::EmptyRun {
                what: "no cycles after warm-up",
            });
        }
        let n = self.cycles as f64;
        let y_mean = self.len_sum / n;
        let per_source: Vec<SourceStats> = self
            .acc
            .iter()
            .map(|a| {
                let k = a.deliveries as f64;
                let mean = a.peak_sum / k;
                let var = if a.deliveries > 1 {
                    ((a.peak_sq - k * mean * mean) / (k - 1.0)).max(0.0)
                } else {
                    0.0
                };
                let frac = a.tx_sum / self.len_sum;
                // residuals x_i - frac * y_i summed in squares
                let ss = (a.tx_sq - 2.0 * frac * a.tx_len + frac * frac * self.len_sq).max(0.0);
                let stderr = if self.cycles > 1 {
                    libm::sqrt(ss / (n * (n - 1.0))) / y_mean
                } else {
                    f64::NAN
                };
                SourceStats {
                    deliveries: a.deliveries,
                    peak_age_mean: mean,
                    peak_age_samples_stddev: libm::sqrt(var),
                    peak_age_sum: a.peak_sum,
                    empirical_access_prob: k / n,
                    empirical_transmit_fraction: frac,
                    transmit_fraction_stderr: stderr,
                    mean_inter_departure: a.inter_sum / k,
                    cycles_between_successes_mean: a.between_sum as f64 / a.between_n as f64,
                    cycles_between_successes_samples: a.between_n,
                }
            })
            .collect();
        let weighted = self
            .weights
            .iter()
            .zip(&per_source)
            .map(|(w, s)| w * s.peak_age_mean)
            .sum();
        Ok(SimReport {
            per_source,
            aggregate: AggregateStats {
                cycles: self.cycles,
                warmup_cycles: self.warmup,
                collisions: self.collisions,
                weighted_avg_peak_age: weighted,
                total_time: self.len_sum,
                max_peak_identity_error: self.identity_err,
            },
        })
    }
}

/// Simulates with normalized `rates` (mean sleep `E[T] / r_l`) until the
/// stop condition. The same config always yields the same report.
pub fn run_simulation(config: &SimConfig, rates: &[f64]) -> Result<SimReport> {
    let mut sim = Simulation::new(config, rates)?;
    while !sim.done() {
        sim.step();
    }
    sim.report()
}
