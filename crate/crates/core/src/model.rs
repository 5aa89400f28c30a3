//! Closed-form sleep-wake cycle model.
//!
//! Rates are normalized: source `l` sleeps for an exponential time with mean
//! `E[T] / r_l`. `ts_ratio` is the sensing time divided by `E[T]`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SplitRng;

/// Largest accepted value of `sum(r) * ts_ratio`.
pub const MAX_EXPONENT: f64 = 700.0;

/// Slack allowed on `sigma_l <= b_l`.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pub weight: f64,
    pub power_efficiency: f64,
}

impl SourceParams {
    pub fn new(weight: f64, power_efficiency: f64) -> Result<Self> {
        let s = Self {
            weight,
            power_efficiency,
        };
        s.validate(0)?;
        Ok(s)
    }

    fn validate(&self, index: usize) -> Result<()> {
        positive(self.weight).ok_or(Error::InvalidSource {
            index,
            field: "weight",
            value: self.weight,
        })?;
        positive(self.power_efficiency).ok_or(Error::InvalidSource {
            index,
            field: "power_efficiency",
            value: self.power_efficiency,
        })?;
        Ok(())
    }
}

fn positive(x: f64) -> Option<f64> {
    (x.is_finite() && x > 0.0).then_some(x)
}

/// Energy regime, decided by the total power efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `sum(b) >= 1`
    EnergyAdequate,
    /// `sum(b) < 1`
    EnergyScarce,
}

impl Regime {
    pub fn of_total(total_efficiency: f64) -> Self {
        if total_efficiency >= 1.0 {
            Regime::EnergyAdequate
        } else {
            Regime::EnergyScarce
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::EnergyAdequate => "energy-adequate",
            Regime::EnergyScarce => "energy-scarce",
        }
    }
}

/// Sources plus the channel parameters shared by all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    sources: Vec<SourceParams>,
    ts_ratio: f64,
    mean_tx_time: f64,
}

impl Fleet {
    pub fn new(sources: Vec<SourceParams>, ts_ratio: f64, mean_tx_time: f64) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::EmptyFleet);
        }
        for (i, s) in sources.iter().enumerate() {
            s.validate(i)?;
        }
        check_ts_ratio(ts_ratio)?;
        positive(mean_tx_time).ok_or(Error::InvalidParameter {
            name: "mean_tx_time",
            value: mean_tx_time,
        })?;
        Ok(Self {
            sources,
            ts_ratio,
            mean_tx_time,
        })
    }

    pub fn from_slices(
        weights: &[f64],
        efficiencies: &[f64],
        ts_ratio: f64,
        mean_tx_time: f64,
    ) -> Result<Self> {
        if weights.len() != efficiencies.len() {
            return Err(Error::LengthMismatch {
                expected: weights.len(),
                found: efficiencies.len(),
            });
        }
        let sources = weights
            .iter()
            .zip(efficiencies)
            .map(|(&weight, &power_efficiency)| SourceParams {
                weight,
                power_efficiency,
            })
            .collect();
        Self::new(sources, ts_ratio, mean_tx_time)
    }

    /// Random fleet with weights and efficiencies drawn uniformly from the
    /// open ranges given.
    pub fn random(
        count: usize,
        weight_range: (f64, f64),
        efficiency_range: (f64, f64),
        ts_ratio: f64,
        mean_tx_time: f64,
        rng: &mut SplitRng,
    ) -> Result<Self> {
        let sources = (0..count)
            .map(|_| SourceParams {
                weight: rng.uniform(weight_range.0, weight_range.1),
                power_efficiency: rng.uniform(efficiency_range.0, efficiency_range.1),
            })
            .collect();
        Self::new(sources, ts_ratio, mean_tx_time)
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn sources(&self) -> &[SourceParams] {
        &self.sources
    }

    pub fn weights(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.weight).collect()
    }

    pub fn efficiencies(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.power_efficiency).collect()
    }

    pub fn ts_ratio(&self) -> f64 {
        self.ts_ratio
    }

    pub fn mean_tx_time(&self) -> f64 {
        self.mean_tx_time
    }

    /// Sensing time in seconds.
    pub fn sensing_time(&self) -> f64 {
        self.ts_ratio * self.mean_tx_time
    }

    pub fn total_efficiency(&self) -> f64 {
        self.sources.iter().map(|s| s.power_efficiency).sum()
    }

    pub fn regime(&self) -> Regime {
        Regime::of_total(self.total_efficiency())
    }

    pub fn with_ts_ratio(&self, ts_ratio: f64) -> Result<Self> {
        check_ts_ratio(ts_ratio)?;
        Ok(Self {
            ts_ratio,
            ..self.clone()
        })
    }

    /// Same sources with `E[T]` replaced and `ts_ratio` held fixed.
    pub fn with_mean_tx_time(&self, mean_tx_time: f64) -> Result<Self> {
        Self::new(self.sources.clone(), self.ts_ratio, mean_tx_time)
    }
}

fn check_ts_ratio(ts_ratio: f64) -> Result<()> {
    if ts_ratio.is_finite() && ts_ratio >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "ts_ratio",
            value: ts_ratio,
        })
    }
}

/// Normalized sleep rates plus the two scalars a coordinator broadcasts.
#[derive(Debug, Clone, PartialEq)]
pub struct SleepPlan {
    pub rates: Vec<f64>,
    pub regime: Regime,
    /// Share level. `NaN` for the fixed-rate baseline, which has none.
    pub beta_star: f64,
    /// Aggregate rate, `sum(rates)`.
    pub x_star: f64,
}

impl SleepPlan {
    /// The `(beta*, x*)` pair each source needs to derive its own rate.
    pub fn broadcast(&self) -> (f64, f64) {
        (self.beta_star, self.x_star)
    }
}

/// Per-source rate derived locally from a broadcast pair.
pub fn source_rate(weight: f64, power_efficiency: f64, beta_star: f64, x_star: f64) -> f64 {
    power_efficiency.min(beta_star * libm::sqrt(weight)) * x_star
}

/// Battery budget of one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatterySpec {
    /// Joules.
    pub initial_energy: f64,
    /// Seconds.
    pub target_lifetime: f64,
    /// Watts.
    pub replenish_rate: f64,
    /// Watts drawn while transmitting.
    pub avg_tx_power: f64,
}

impl BatterySpec {
    /// Battery of `capacity_mah` at `volts`, in joules.
    pub fn mah_to_joules(capacity_mah: f64, volts: f64) -> f64 {
        capacity_mah * 1e-3 * 3600.0 * volts
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name, v: f64, allow_zero: bool| {
            if v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0)) {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value: v })
            }
        };
        check("initial_energy", self.initial_energy, false)?;
        check("target_lifetime", self.target_lifetime, false)?;
        check("replenish_rate", self.replenish_rate, true)?;
        check("avg_tx_power", self.avg_tx_power, false)
    }

    /// Largest average power that still meets the lifetime, in watts.
    pub fn max_power(&self) -> f64 {
        self.initial_energy / self.target_lifetime + self.replenish_rate
    }
}

/// `(B/D + R) / P_avg`.
pub fn power_efficiency_from_battery(spec: &BatterySpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.max_power() / spec.avg_tx_power)
}

/// Validates rates and `ts_ratio`; returns `sum(r)`.
fn rate_sum(rates: &[f64], ts_ratio: f64) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::EmptyFleet);
    }
    check_ts_ratio(ts_ratio)?;
    let mut sum = 0.0;
    for (index, &r) in rates.iter().enumerate() {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::NonPositiveRate { index, value: r });
        }
        sum += r;
    }
    let exponent = sum * ts_ratio;
    if exponent.is_nan() || exponent > MAX_EXPONENT {
        return Err(Error::ExponentOverflow { exponent });
    }
    Ok(sum)
}

/// Probability that source `l` wins a cycle:
/// `alpha_l = r_l e^{r_l eps} / (e^{S eps} S)`, `S = sum(r)`.
pub fn access_probabilities(rates: &[f64], ts_ratio: f64) -> Result<Vec<f64>> {
    let s = rate_sum(rates, ts_ratio)?;
    Ok(rates
        .iter()
        .map(|&r| libm::exp(-(s - r) * ts_ratio) * r / s)
        .collect())
}

/// Probability that a cycle ends in a collision, `1 - sum(alpha)`.
pub fn collision_probability(rates: &[f64], ts_ratio: f64) -> Result<f64> {
    let s = rate_sum(rates, ts_ratio)?;
    // 1 - sum (r/S) e^{-(S-r) eps}, summed as expm1 terms to keep precision
    Ok(-rates
        .iter()
        .map(|&r| r / s * libm::expm1(-(s - r) * ts_ratio))
        .sum::<f64>())
}

/// Mean number of cycles between successes of each source, `1 / alpha_l`.
pub fn expected_cycles_between_successes(rates: &[f64], ts_ratio: f64) -> Result<Vec<f64>> {
    Ok(access_probabilities(rates, ts_ratio)?
        .into_iter()
        .map(|a| 1.0 / a)
        .collect())
}

/// Mean cycle length `1/S + 1` (idle period plus one event; sensing excluded).
pub fn expected_cycle_length(rates: &[f64]) -> Result<f64> {
    let s = rate_sum(rates, 0.0)?;
    Ok(1.0 / s + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakAge {
    /// Average peak age per source, units of `E[T]`.
    pub per_source: Vec<f64>,
    /// `sum(w_l * per_source_l)`, units of `E[T]`.
    pub total: f64,
    pub total_seconds: f64,
}

/// Weighted average peak age of a rate vector.
pub fn expected_weighted_peak_age(fleet: &Fleet, rates: &[f64]) -> Result<PeakAge> {
    check_len(fleet.len(), rates.len())?;
    let s = rate_sum(rates, fleet.ts_ratio)?;
    let eps = fleet.ts_ratio;
    let per_source: Vec<f64> = rates.iter().map(|&r| peak_term(r, s, eps)).collect();
    let total = fleet
        .sources
        .iter()
        .zip(&per_source)
        .map(|(src, p)| src.weight * p)
        .sum::<f64>();
    Ok(PeakAge {
        per_source,
        total,
        total_seconds: total * fleet.mean_tx_time,
    })
}

/// Normalized weighted peak age without allocating; used in inner loops.
pub fn weighted_peak_age(weights: &[f64], rates: &[f64], ts_ratio: f64) -> Result<f64> {
    check_len(weights.len(), rates.len())?;
    let s = rate_sum(rates, ts_ratio)?;
    Ok(weights
        .iter()
        .zip(rates)
        .map(|(&w, &r)| w * peak_term(r, s, ts_ratio))
        .sum())
}

#[inline]
fn peak_term(r: f64, s: f64, eps: f64) -> f64 {
    libm::exp((s - r) * eps) * (1.0 + s) / r + 1.0
}

/// Long-run fraction of time each source spends transmitting (including
/// collisions): `([1 - e^{-r_l eps}] S + r_l e^{-r_l eps}) / (S + 1)`.
pub fn transmit_fractions(rates: &[f64], ts_ratio: f64) -> Result<Vec<f64>> {
    let s = rate_sum(rates, ts_ratio)?;
    Ok(rates
        .iter()
        .map(|&r| sigma_term(r, s, ts_ratio))
        .collect())
}

#[inline]
pub(crate) fn sigma_term(r: f64, s: f64, eps: f64) -> f64 {
    let stay = libm::exp(-r * eps);
    (-libm::expm1(-r * eps) * s + r * stay) / (s + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// `b_l - sigma_l` per source.
    pub slack: Vec<f64>,
}

pub fn energy_feasible(fleet: &Fleet, rates: &[f64]) -> Result<Feasibility> {
    check_len(fleet.len(), rates.len())?;
    let sigma = transmit_fractions(rates, fleet.ts_ratio)?;
    let slack: Vec<f64> = fleet
        .sources
        .iter()
        .zip(&sigma)
        .map(|(src, s)| src.power_efficiency - s)
        .collect();
    Ok(Feasibility {
        feasible: slack.iter().all(|&d| d >= -FEASIBILITY_TOL),
        slack,
    })
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn access_examples() {
        let a = access_probabilities(&[1.0, 1.0, 1.0], 0.0).unwrap();
        assert!(a.iter().all(|&x| close(x, 1.0 / 3.0, 1e-15)));
        assert_eq!(access_probabilities(&[5.0], 0.0).unwrap(), vec![1.0]);
        // direct evaluation: r e^{r eps} / (e^{S eps} S)
        let a = access_probabilities(&[1.0, 2.0], 0.01).unwrap();
        let oracle = (0.01f64).exp() / ((0.03f64).exp() * 3.0);
        assert!(close(a[0], oracle, 1e-14));
        assert!(close(a[0], 0.326733, 1e-6));
    }

    #[test]
    fn access_rejects_bad_input() {
        assert_eq!(
            access_probabilities(&[1.0, 0.0], 0.1),
            Err(Error::NonPositiveRate {
                index: 1,
                value: 0.0
            })
        );
        match access_probabilities(&[500.0, 500.0], 1.0) {
            Err(Error::ExponentOverflow { exponent }) => assert_eq!(exponent, 1000.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn peak_age_examples() {
        let f1 = Fleet::from_slices(&[1.0], &[1.0], 0.0, 2.0).unwrap();
        let p = expected_weighted_peak_age(&f1, &[1.0]).unwrap();
        assert_eq!(p.per_source, vec![3.0]);
        assert_eq!(p.total, 3.0);
        assert_eq!(p.total_seconds, 6.0);

        let f2 = Fleet::from_slices(&[1.0, 1.0], &[1.0, 1.0], 0.0, 1.0).unwrap();
        let p = expected_weighted_peak_age(&f2, &[1.0, 1.0]).unwrap();
        assert_eq!(p.per_source, vec![4.0, 4.0]);
        assert_eq!(p.total, 8.0);
    }

    #[test]
    fn peak_age_composes_from_cycle_counts() {
        // 1 + E[N_l] E[cycle]
        let rates = [0.7, 2.5, 4.0];
        let eps = 0.03;
        let f = Fleet::from_slices(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], eps, 1.0).unwrap();
        let n = expected_cycles_between_successes(&rates, eps).unwrap();
        let c = expected_cycle_length(&rates).unwrap();
        let p = expected_weighted_peak_age(&f, &rates).unwrap();
        for (nl, pl) in n.iter().zip(&p.per_source) {
            assert!(close(1.0 + nl * c, *pl, 1e-12));
        }
    }

    #[test]
    fn transmit_fraction_examples() {
        let s = transmit_fractions(&[1.0, 1.0], 0.0).unwrap();
        assert!(s.iter().all(|&x| close(x, 1.0 / 3.0, 1e-15)));
        let s = transmit_fractions(&[1.0, 1.0], 0.01).unwrap();
        let e = (-0.01f64).exp();
        let oracle = (2.0 * (1.0 - e) + e) / 3.0;
        assert!(close(s[0], oracle, 1e-14));
        assert!(close(s[0], 0.336650, 1e-6));
        for eps in [0.0, 0.3, 2.0] {
            let s = transmit_fractions(&[1.7], eps).unwrap();
            assert!(close(s[0], 1.7 / 2.7, 1e-14));
        }
    }

    #[test]
    fn feasibility_examples() {
        let f = Fleet::from_slices(&[1.0, 1.0], &[0.3, 0.3], 0.0, 1.0).unwrap();
        let r = energy_feasible(&f, &[1.0, 1.0]).unwrap();
        assert!(!r.feasible);
        assert!(r.slack.iter().all(|&d| close(d, -1.0 / 30.0, 1e-14)));

        let f = Fleet::from_slices(&[1.0, 1.0], &[0.4, 0.4], 0.0, 1.0).unwrap();
        let r = energy_feasible(&f, &[1.0, 1.0]).unwrap();
        assert!(r.feasible);
        assert!(r.slack.iter().all(|&d| close(d, 1.0 / 15.0, 1e-14)));

        let f = Fleet::from_slices(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], 0.2, 1.0).unwrap();
        assert!(energy_feasible(&f, &[50.0, 0.1, 9.0]).unwrap().feasible);
    }

    #[test]
    fn battery_examples() {
        let b = BatterySpec {
            initial_energy: BatterySpec::mah_to_joules(8.0, 5.0),
            target_lifetime: 10.0 * 365.0 * 86400.0,
            replenish_rate: 0.0,
            avg_tx_power: 24.75e-3,
        };
        assert!(close(b.initial_energy, 144.0, 1e-15));
        let eff = power_efficiency_from_battery(&b).unwrap();
        assert!(close(eff, 144.0 / 3.1536e8 / 24.75e-3, 1e-15));
        assert!((eff - 1.8449e-5).abs() < 1e-9);

        let unit = BatterySpec {
            initial_energy: 5.0 * 0.1,
            target_lifetime: 5.0,
            replenish_rate: 0.0,
            avg_tx_power: 0.1,
        };
        assert!(close(power_efficiency_from_battery(&unit).unwrap(), 1.0, 1e-15));

        let solar = BatterySpec {
            initial_energy: 1.0,
            target_lifetime: 1e15,
            replenish_rate: 0.2,
            avg_tx_power: 0.2,
        };
        assert!(close(power_efficiency_from_battery(&solar).unwrap(), 1.0, 1e-12));

        let zero = BatterySpec {
            target_lifetime: 0.0,
            ..unit
        };
        assert!(matches!(
            power_efficiency_from_battery(&zero),
            Err(Error::InvalidParameter {
                name: "target_lifetime",
                ..
            })
        ));
    }

    #[test]
    fn fleet_validation_names_the_source() {
        assert_eq!(
            Fleet::from_slices(&[1.0, -2.0], &[0.5, 0.5], 0.0, 1.0),
            Err(Error::InvalidSource {
                index: 1,
                field: "weight",
                value: -2.0
            })
        );
        assert_eq!(
            Fleet::from_slices(&[], &[], 0.0, 1.0),
            Err(Error::EmptyFleet)
        );
        assert!(Fleet::from_slices(&[1.0], &[1.0], -0.1, 1.0).is_err());
        assert!(Fleet::from_slices(&[1.0], &[1.0], 0.1, 0.0).is_err());
    }

    #[test]
    fn broadcast_rate_matches_local_formula() {
        assert_eq!(source_rate(4.0, 0.9, 1.0 / 3.0, 3.0), 2.0);
        assert_eq!(source_rate(4.0, 0.5, 1.0 / 3.0, 3.0), 1.5);
    }
}
