use alloc::vec;
use alloc::vec::Vec;

use super::report::Simulation;
use super::{SimConfig, SimReport};
use crate::error::Result;

/// State of the sampled chain right after an event.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledState {
    /// Age of each source, seconds.
    pub ages: Vec<f64>,
    /// 1 while transmitting, 0 otherwise.
    pub modes: Vec<u8>,
    pub sample_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    /// The chain's starting point.
    Initial,
    AccessStart {
        source: usize,
    },
    DeliveryEnd {
        source: usize,
        service_time: f64,
        peak: f64,
    },
    CollisionEnd {
        participants: Vec<usize>,
        duration: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: SampledState,
    pub event: StreamEvent,
    /// Simulated seconds.
    pub time: f64,
    pub cycle: u64,
    /// True for events of warm-up cycles (excluded from report statistics).
    pub warmup: bool,
}

/// Discrete-time chain observed at channel-access and event-end instants.
///
/// A success cycle yields `AccessStart` then `DeliveryEnd`; a collision cycle
/// yields one `CollisionEnd`. The stream ends when the stop condition is met.
#[derive(Debug, Clone)]
pub struct SampledStream {
    sim: Simulation,
    next_index: u64,
    pending: Option<Sample>,
    started: bool,
}

pub fn sampled_stream(config: &SimConfig, rates: &[f64]) -> Result<SampledStream> {
    Ok(SampledStream {
        sim: Simulation::new(config, rates)?,
        next_index: 0,
        pending: None,
        started: false,
    })
}

impl SampledStream {
    pub(crate) fn with_intensities(config: &SimConfig, intensities: Vec<f64>) -> Result<Self> {
        Ok(Self {
            sim: Simulation::with_intensities(config, intensities)?,
            next_index: 0,
            pending: None,
            started: false,
        })
    }

    /// Changes wake intensities (1/s); applies from the next timer draw.
    pub fn set_intensities(&mut self, intensities: &[f64]) -> Result<()> {
        self.sim.channel.set_intensities(intensities)
    }

    /// Statistics of the events consumed so far.
    pub fn report(&self) -> Result<SimReport> {
        self.sim.report()
    }

    fn state(&self, t: f64, active: Option<usize>) -> SampledState {
        let m = self.sim.ages.len();
        let mut modes = vec![0u8; m];
        if let Some(l) = active {
            modes[l] = 1;
        }
        SampledState {
            ages: (0..m).map(|l| self.sim.ages.age(l, t)).collect(),
            modes,
            sample_index: 0,
        }
    }

    fn emit(&mut self, mut s: Sample) -> Sample {
        s.state.sample_index = self.next_index;
        self.next_index += 1;
        s
    }
}

impl Iterator for SampledStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if !self.started {
            self.started = true;
            let s = Sample {
                state: self.state(0.0, None),
                event: StreamEvent::Initial,
                time: 0.0,
                cycle: 0,
                warmup: true,
            };
            return Some(self.emit(s));
        }
        if let Some(s) = self.pending.take() {
            return Some(self.emit(s));
        }
        if self.sim.done() {
            return None;
        }
        let m = self.sim.ages.len();
        let step = self.sim.step();
        let c = step.cycle;
        match (c.winner(), step.delivery) {
            (Some(l), Some(d)) => {
                let mut modes = vec![0u8; m];
                modes[l] = 1;
                let access = Sample {
                    state: SampledState {
                        // winner's previous generation time is end - peak
                        ages: (0..m)
                            .map(|i| {
                                if i == l {
                                    c.access - (c.end - d.peak)
                                } else {
                                    self.sim.ages.age(i, c.access)
                                }
                            })
                            .collect(),
                        modes,
                        sample_index: 0,
                    },
                    event: StreamEvent::AccessStart { source: l },
                    time: c.access,
                    cycle: c.index,
                    warmup: step.warmup,
                };
                self.pending = Some(Sample {
                    state: self.state(c.end, None),
                    event: StreamEvent::DeliveryEnd {
                        source: l,
                        service_time: c.duration,
                        peak: d.peak,
                    },
                    time: c.end,
                    cycle: c.index,
                    warmup: step.warmup,
                });
                Some(self.emit(access))
            }
            _ => {
                let s = Sample {
                    state: self.state(c.end, None),
                    event: StreamEvent::CollisionEnd {
                        participants: self.sim.channel.participants().to_vec(),
                        duration: c.duration,
                    },
                    time: c.end,
                    cycle: c.index,
                    warmup: step.warmup,
                };
                Some(self.emit(s))
            }
        }
    }
}
