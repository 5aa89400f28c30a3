use alloc::vec::Vec;

use super::{TimerPolicy, TxTimeDist};
use crate::error::{Error, Result};
use crate::rng::SplitRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success(usize),
    /// Participants are available from the channel until the next cycle.
    Collision,
}

/// One idle period plus one transmission or collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cycle {
    pub index: u64,
    /// End of the previous cycle.
    pub start: f64,
    /// Transmission start; the packet is generated here.
    pub access: f64,
    pub end: f64,
    pub duration: f64,
    pub outcome: Outcome,
}

impl Cycle {
    pub fn winner(&self) -> Option<usize> {
        match self.outcome {
            Outcome::Success(l) => Some(l),
            Outcome::Collision => None,
        }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

pub(crate) fn check_intensities(intensities: &[f64]) -> Result<()> {
    for (index, &v) in intensities.iter().enumerate() {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositiveRate { index, value: v });
        }
    }
    Ok(())
}

/// Shared channel with one pending wake time per source.
#[derive(Debug, Clone)]
pub(crate) struct Channel {
    /// Wake intensities, 1/s.
    intensities: Vec<f64>,
    sensing_time: f64,
    dist: TxTimeDist,
    policy: TimerPolicy,
    rng: SplitRng,
    wake: Vec<f64>,
    now: f64,
    index: u64,
    participants: Vec<usize>,
}

impl Channel {
    pub(crate) fn new(
        intensities: Vec<f64>,
        sensing_time: f64,
        dist: TxTimeDist,
        policy: TimerPolicy,
        mut rng: SplitRng,
    ) -> Result<Self> {
        check_intensities(&intensities)?;
        let wake = intensities.iter().map(|&v| rng.exponential(v)).collect();
        Ok(Self {
            participants: Vec::with_capacity(intensities.len()),
            intensities,
            sensing_time,
            dist,
            policy,
            rng,
            wake,
            now: 0.0,
            index: 0,
        })
    }

    /// New intensities take effect with the next timer draw.
    pub(crate) fn set_intensities(&mut self, intensities: &[f64]) -> Result<()> {
        check_intensities(intensities)?;
        crate::model::check_len(self.intensities.len(), intensities.len())?;
        self.intensities.copy_from_slice(intensities);
        Ok(())
    }

    /// Sources that took part in the last cycle, in index order.
    pub(crate) fn participants(&self) -> &[usize] {
        &self.participants
    }

    pub(crate) fn step(&mut self) -> Cycle {
        // earliest waker, ties to the lowest index
        let mut first = 0;
        for (l, &w) in self.wake.iter().enumerate().skip(1) {
            if w < self.wake[first] {
                first = l;
            }
        }
        let u0 = self.wake[first];
        let access = u0 + self.sensing_time;
        self.participants.clear();
        for (l, &w) in self.wake.iter().enumerate() {
            if l == first || w < access {
                self.participants.push(l);
            }
        }
        let duration = self.dist.sample(&mut self.rng);
        let end = access + duration;
        match self.policy {
            TimerPolicy::ResampleAll => {
                for (w, &v) in self.wake.iter_mut().zip(&self.intensities) {
                    *w = end + self.rng.exponential(v);
                }
            }
            TimerPolicy::PreserveResidual => {
                let mut p = self.participants.iter().peekable();
                for (l, (w, &v)) in self.wake.iter_mut().zip(&self.intensities).enumerate() {
                    if p.peek() == Some(&&l) {
                        p.next();
                        *w = end + self.rng.exponential(v);
                    } else {
                        // woke into a busy channel: sense, then sleep again
                        while *w < end {
                            *w += self.sensing_time + self.rng.exponential(v);
                        }
                    }
                }
            }
        }
        let outcome = if self.participants.len() == 1 {
            Outcome::Success(first)
        } else {
            Outcome::Collision
        };
        let cycle = Cycle {
            index: self.index,
            start: self.now,
            access,
            end,
            duration,
            outcome,
        };
        self.now = end;
        self.index += 1;
        cycle
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(intensities: &[f64], ts: f64, policy: TimerPolicy) -> Channel {
        Channel::new(
            intensities.to_vec(),
            ts,
            TxTimeDist::Deterministic { value: 1.0 },
            policy,
            SplitRng::new(5, 0),
        )
        .unwrap()
    }

    #[test]
    fn zero_sensing_never_collides() {
        let mut ch = channel(&[1.0, 1.0], 0.0, TimerPolicy::ResampleAll);
        for _ in 0..50_000 {
            assert!(ch.step().winner().is_some());
        }
    }

    #[test]
    fn cycles_tile_the_time_axis() {
        for policy in [TimerPolicy::ResampleAll, TimerPolicy::PreserveResidual] {
            let mut ch = channel(&[0.5, 2.0, 1.0], 0.2, policy);
            let mut prev_end = 0.0;
            for i in 0..10_000 {
                let c = ch.step();
                assert_eq!(c.index, i);
                assert_eq!(c.start, prev_end);
                assert!(c.access >= c.start + 0.2 - 1e-12);
                assert_eq!(c.end, c.access + c.duration);
                match c.outcome {
                    Outcome::Success(l) => assert_eq!(ch.participants(), &[l]),
                    Outcome::Collision => assert!(ch.participants().len() >= 2),
                }
                prev_end = c.end;
            }
        }
    }

    #[test]
    fn rejects_bad_intensities() {
        let r = Channel::new(
            alloc::vec![1.0, -1.0],
            0.0,
            TxTimeDist::Deterministic { value: 1.0 },
            TimerPolicy::ResampleAll,
            SplitRng::new(0, 0),
        );
        assert!(matches!(r, Err(Error::NonPositiveRate { index: 1, .. })));
    }
}
