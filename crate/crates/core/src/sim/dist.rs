use crate::error::{Error, Result};
use crate::rng::SplitRng;

/// Distribution of transmission and collision durations, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TxTimeDist {
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Exponential with mean `mean_raw` conditioned on `T <= t_max`.
    TruncatedExponential { mean_raw: f64, t_max: f64 },
}

fn finite_pos(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl TxTimeDist {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, value| Err(Error::InvalidParameter { name, value });
        match *self {
            TxTimeDist::Deterministic { value } if !finite_pos(value) => bad("tx value", value),
            TxTimeDist::Uniform { lo, .. } if !(lo.is_finite() && lo >= 0.0) => bad("tx lo", lo),
            TxTimeDist::Uniform { lo, hi } if !(hi.is_finite() && hi > lo) => bad("tx hi", hi),
            TxTimeDist::TruncatedExponential { mean_raw, .. } if !finite_pos(mean_raw) => {
                bad("tx mean_raw", mean_raw)
            }
            TxTimeDist::TruncatedExponential { t_max, .. } if !finite_pos(t_max) => {
                bad("tx t_max", t_max)
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TxTimeDist::Deterministic { value } => value,
            TxTimeDist::Uniform { lo, hi } => 0.5 * (lo + hi),
            TxTimeDist::TruncatedExponential { mean_raw, t_max } => {
                mean_raw - t_max / libm::expm1(t_max / mean_raw)
            }
        }
    }

    /// Upper end of the support.
    pub fn t_max(&self) -> f64 {
        match *self {
            TxTimeDist::Deterministic { value } => value,
            TxTimeDist::Uniform { hi, .. } => hi,
            TxTimeDist::TruncatedExponential { t_max, .. } => t_max,
        }
    }

    pub fn sample(&self, rng: &mut SplitRng) -> f64 {
        match *self {
            TxTimeDist::Deterministic { value } => value,
            TxTimeDist::Uniform { lo, hi } => rng.uniform(lo, hi),
            TxTimeDist::TruncatedExponential { mean_raw, t_max } => {
                // inverse CDF of the truncated law
                let mass = -libm::expm1(-t_max / mean_raw);
                -mean_raw * libm::log1p(-rng.open01() * mass)
            }
        }
    }
}
