//! Sleep-wake scheduling for energy-constrained status-update sources on a
//! carrier-sense channel.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`model`]: closed-form cycle model (access probabilities, peak age,
//!   transmit fractions, energy feasibility),
//! * [`planner`]: near-optimal sleep rates in both energy regimes, bounds,
//!   the synchronized optimum, the zero-sensing nested solver, a fixed-rate
//!   baseline and a brute-force grid oracle,
//! * [`sim`]: a continuous-time event simulator and its sampled event stream,
//! * [`learn`]: certainty-equivalence learning of the mean transmission time.
//!
//! All model quantities are in units of the mean transmission time `E[T]`
//! unless a name ends in `_seconds` / `_s`.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod learn;
pub mod model;
pub mod planner;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use model::{BatterySpec, Fleet, PeakAge, Regime, SleepPlan, SourceParams};
pub use planner::{plan, RegimeSolution};
pub use rng::SplitRng;
