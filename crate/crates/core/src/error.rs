use crate::model::Regime;

/// Errors raised by the model, planner, simulator and learner.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("fleet has no sources")]
    EmptyFleet,

    #[error("source {index}: {field} must be positive and finite, got {value}")]
    InvalidSource {
        index: usize,
        field: &'static str,
        value: f64,
    },

    #[error("rate of source {index} must be positive and finite, got {value}")]
    NonPositiveRate { index: usize, value: f64 },

    #[error("{name} is out of its domain: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("expected {expected} entries, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("sum(r) * ts_ratio = {exponent} exceeds the supported exponent range (700)")]
    ExponentOverflow { exponent: f64 },

    #[error(
        "sum of power efficiencies {total} is below {target}: no share level exists, \
         the fleet is energy-scarce and needs the scarce-regime solver"
    )]
    NoRoot { total: f64, target: f64 },

    #[error(
        "ts_ratio is 0 in the energy-adequate regime: optimal sleep rates are unbounded, \
         use the zero-sensing nested solver instead"
    )]
    UnboundedRates,

    #[error("sum of power efficiencies {total} does not belong to the {expected:?} regime")]
    WrongRegime { total: f64, expected: Regime },

    #[error("unsupported: {what}")]
    Unsupported { what: &'static str },

    #[error("empty run: {what}")]
    EmptyRun { what: &'static str },

    #[error("transmission-time distribution has mean {actual} s but the fleet declares {declared} s")]
    MeanMismatch { declared: f64, actual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
