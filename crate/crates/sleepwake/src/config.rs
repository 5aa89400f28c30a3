//! JSON experiment configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sleepwake_core::model::{BatterySpec, Fleet, Regime};
use sleepwake_core::sim::{TimerPolicy, TxTimeDist};
use sleepwake_core::SplitRng;

use crate::error::{CliError, Result};

/// Seconds in a (365-day) year.
pub const YEAR: f64 = 365.0 * 24.0 * 3600.0;

/// Relative tolerance between the declared `mean_tx_time` and the
/// distribution's mean.
pub const MEAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Solve,
    Simulate,
    Learn,
    SweepTsRatio,
    SweepM,
    SweepEfficiency,
    SweepLifetime,
    CompareBaselines,
    Oracle,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Solve => "solve",
            Scenario::Simulate => "simulate",
            Scenario::Learn => "learn",
            Scenario::SweepTsRatio => "sweep_ts_ratio",
            Scenario::SweepM => "sweep_m",
            Scenario::SweepEfficiency => "sweep_efficiency",
            Scenario::SweepLifetime => "sweep_lifetime",
            Scenario::CompareBaselines => "compare_baselines",
            Scenario::Oracle => "oracle",
        }
    }

    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            Scenario::SweepTsRatio | Scenario::SweepM | Scenario::SweepEfficiency | Scenario::SweepLifetime
        )
    }
}

/// Explicit weight/efficiency lists, or a seeded uniform draw.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FleetSpec {
    Explicit(ExplicitFleet),
    Random(RandomWrapper),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitFleet {
    pub weights: Vec<f64>,
    pub efficiencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWrapper {
    pub random: RandomFleet,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFleet {
    pub count: usize,
    #[serde(default = "default_weight_range")]
    pub weight_range: (f64, f64),
    #[serde(default = "default_efficiency_range")]
    pub efficiency_range: (f64, f64),
    pub master_seed: u64,
}

fn default_weight_range() -> (f64, f64) {
    (0.0, 10.0)
}

fn default_efficiency_range() -> (f64, f64) {
    (0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TxDistSpec {
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
    TruncatedExponential { mean_raw: f64, t_max: f64 },
}

impl From<TxDistSpec> for TxTimeDist {
    fn from(s: TxDistSpec) -> Self {
        match s {
            TxDistSpec::Deterministic { value } => TxTimeDist::Deterministic { value },
            TxDistSpec::Uniform { lo, hi } => TxTimeDist::Uniform { lo, hi },
            TxDistSpec::TruncatedExponential { mean_raw, t_max } => {
                TxTimeDist::TruncatedExponential { mean_raw, t_max }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerPolicySpec {
    #[default]
    ResampleAll,
    PreserveResidual,
}

impl From<TimerPolicySpec> for TimerPolicy {
    fn from(s: TimerPolicySpec) -> Self {
        match s {
            TimerPolicySpec::ResampleAll => TimerPolicy::ResampleAll,
            TimerPolicySpec::PreserveResidual => TimerPolicy::PreserveResidual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunControls {
    /// Simulated cycles per run; 0 skips simulation in sweeps.
    #[serde(default)]
    pub cycles: u64,
    /// Learning horizon in sampled steps.
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "one")]
    pub seeds: u64,
    /// Independent streams per seed.
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default)]
    pub timer_policy: TimerPolicySpec,
    /// Normalized rates to simulate instead of the plan.
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            cycles: 0,
            horizon: default_horizon(),
            seeds: 1,
            replications: 1,
            timer_policy: TimerPolicySpec::default(),
            rates: None,
        }
    }
}

fn default_horizon() -> u64 {
    1 << 16
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub ts_ratios: Vec<f64>,
    #[serde(default)]
    pub counts: Vec<usize>,
    /// Multipliers applied to every efficiency.
    #[serde(default)]
    pub efficiency_scales: Vec<f64>,
    #[serde(default)]
    pub lifetimes_years: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub capacity_mah: f64,
    pub volts: f64,
    /// Watts drawn while transmitting.
    pub avg_tx_power: f64,
    /// Watts.
    #[serde(default)]
    pub replenish_rate: f64,
}

impl BatteryConfig {
    pub fn spec(&self, years: f64) -> BatterySpec {
        BatterySpec {
            initial_energy: BatterySpec::mah_to_joules(self.capacity_mah, self.volts),
            target_lifetime: years * YEAR,
            replenish_rate: self.replenish_rate,
            avg_tx_power: self.avg_tx_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnSettings {
    /// Seconds.
    pub sensing_time: f64,
    /// Seconds; defaults to half the largest transmission time.
    #[serde(default)]
    pub theta_init: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Skips the Monte Carlo oracle run when given.
    #[serde(default)]
    pub oracle_cost_per_step: Option<f64>,
    #[serde(default = "default_oracle_steps")]
    pub oracle_steps: u64,
    /// Keep every n-th trace row (dyadic steps are always kept).
    #[serde(default = "one")]
    pub trace_stride: u64,
}

fn default_gamma() -> f64 {
    4.0
}

fn default_oracle_steps() -> u64 {
    10_000_000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub fleet: FleetSpec,
    /// Sensing time over mean transmission time.
    #[serde(default)]
    pub ts_ratio: f64,
    /// Declared mean transmission time in seconds; defaults to the
    /// distribution's mean, or 1 without a distribution.
    #[serde(default)]
    pub mean_tx_time: Option<f64>,
    #[serde(default)]
    pub tx_dist: Option<TxDistSpec>,
    #[serde(default)]
    pub run: RunControls,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub battery: Option<BatteryConfig>,
    #[serde(default)]
    pub learn: Option<LearnSettings>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Findings of a successful validation that do not stop a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Notes(pub Vec<String>);

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn tx_dist(&self) -> TxTimeDist {
        match self.tx_dist {
            Some(d) => d.into(),
            None => TxTimeDist::Deterministic {
                value: self.mean_tx_time.unwrap_or(1.0),
            },
        }
    }

    pub fn declared_mean(&self) -> f64 {
        self.mean_tx_time.unwrap_or_else(|| self.tx_dist().mean())
    }

    /// The fleet for `instance`: explicit lists ignore it, a random spec
    /// draws from stream `instance` of its master seed. `count` overrides the
    /// random spec's size.
    pub fn fleet(&self, instance: u64, count: Option<usize>, ts_ratio: f64) -> Result<Fleet> {
        let mean = self.declared_mean();
        let fleet = match &self.fleet {
            FleetSpec::Explicit(ExplicitFleet { weights, efficiencies }) => {
                if count.is_some() {
                    return Err(CliError::Config(
                        "sweep over source counts needs a random fleet".into(),
                    ));
                }
                Fleet::from_slices(weights, efficiencies, ts_ratio, mean)
            }
            FleetSpec::Random(RandomWrapper { random }) => {
                let mut rng = SplitRng::new(random.master_seed, instance);
                Fleet::random(
                    count.unwrap_or(random.count),
                    random.weight_range,
                    random.efficiency_range,
                    ts_ratio,
                    mean,
                    &mut rng,
                )
            }
        };
        fleet.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Full check without running anything.
    pub fn validate(&self) -> Result<Notes> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let mut notes = Notes::default();
        if let FleetSpec::Explicit(ExplicitFleet { weights, efficiencies }) = &self.fleet {
            if weights.len() != efficiencies.len() {
                return bad(format!(
                    "fleet has {} weights but {} efficiencies",
                    weights.len(),
                    efficiencies.len()
                ));
            }
        }
        if let FleetSpec::Random(RandomWrapper { random }) = &self.fleet {
            let (w, b) = (random.weight_range, random.efficiency_range);
            if !(w.0 >= 0.0 && w.1 > w.0 && w.1.is_finite()) {
                return bad(format!("weight_range {w:?} must satisfy 0 <= lo < hi"));
            }
            if !(b.0 >= 0.0 && b.1 > b.0 && b.1.is_finite()) {
                return bad(format!("efficiency_range {b:?} must satisfy 0 <= lo < hi"));
            }
        }
        if !(self.ts_ratio.is_finite() && self.ts_ratio >= 0.0) {
            return bad(format!("ts_ratio must be finite and >= 0, got {}", self.ts_ratio));
        }
        let dist = self.tx_dist();
        dist.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let declared = self.declared_mean();
        let actual = dist.mean();
        if !(declared.is_finite() && declared > 0.0) {
            return bad(format!("mean_tx_time must be positive, got {declared}"));
        }
        if (declared - actual).abs() > MEAN_TOL * declared.max(1.0) {
            return bad(format!(
                "tx_dist mean {actual} s differs from declared mean_tx_time {declared} s"
            ));
        }
        if self.run.seeds == 0 || self.run.replications == 0 {
            return bad("run.seeds and run.replications must be >= 1".into());
        }
        let fleet = self.fleet(0, None, self.ts_ratio)?;
        if let Some(r) = &self.run.rates {
            if r.len() != fleet.len() {
                return bad(format!("run.rates has {} entries for {} sources", r.len(), fleet.len()));
            }
        }
        if fleet.regime() == Regime::EnergyScarce {
            notes.0.push(format!(
                "energy-scarce regime: sum of efficiencies {:.6} < 1, every source runs at its energy budget",
                fleet.total_efficiency()
            ));
        }
        let uses_ts_ratio = !matches!(self.scenario, Scenario::Learn | Scenario::Oracle | Scenario::SweepTsRatio);
        if uses_ts_ratio && fleet.regime() == Regime::EnergyAdequate && self.ts_ratio == 0.0 {
            notes.0.push(
                "ts_ratio = 0 in the energy-adequate regime: plans are unbounded, solve reports the zero-sensing limit"
                    .into(),
            );
        }
        self.validate_scenario(&mut notes)?;
        Ok(notes)
    }

    fn validate_scenario(&self, notes: &mut Notes) -> Result<()> {
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(CliError::Config(msg.into())) };
        let g = &self.sweep;
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        match self.scenario {
            Scenario::Simulate => need(self.run.cycles > 0, "simulate needs run.cycles > 0"),
            Scenario::Learn | Scenario::Oracle => {
                let l = self.learn.as_ref().ok_or_else(|| CliError::Config(format!(
                    "{} needs a learn section",
                    self.scenario.name()
                )))?;
                need(l.sensing_time.is_finite() && l.sensing_time >= 0.0, "learn.sensing_time must be >= 0")?;
                need(l.trace_stride >= 1, "learn.trace_stride must be >= 1")?;
                need(l.oracle_steps >= 1, "learn.oracle_steps must be >= 1")?;
                need(self.run.horizon >= 2, "run.horizon must be >= 2")?;
                if self.ts_ratio != 0.0 {
                    notes.0.push("ts_ratio is ignored by learning: learn.sensing_time is used".into());
                }
                Ok(())
            }
            Scenario::SweepTsRatio => need(
                !g.ts_ratios.is_empty() && g.ts_ratios.iter().all(|x| x.is_finite() && *x >= 0.0),
                "sweep_ts_ratio needs sweep.ts_ratios (finite, >= 0)",
            ),
            Scenario::SweepM => {
                need(!g.counts.is_empty() && g.counts.iter().all(|&c| c > 0), "sweep_m needs sweep.counts (>= 1)")?;
                need(matches!(self.fleet, FleetSpec::Random(_)), "sweep_m needs a random fleet")
            }
            Scenario::SweepEfficiency => need(
                !g.efficiency_scales.is_empty() && positive(&g.efficiency_scales),
                "sweep_efficiency needs sweep.efficiency_scales (> 0)",
            ),
            Scenario::SweepLifetime => {
                need(self.battery.is_some(), "sweep_lifetime needs a battery section")?;
                need(
                    !g.lifetimes_years.is_empty() && positive(&g.lifetimes_years),
                    "sweep_lifetime needs sweep.lifetimes_years (> 0)",
                )?;
                let b = self.battery.unwrap();
                b.spec(1.0).validate().map_err(|e| CliError::Config(format!("battery: {e}")))
            }
            Scenario::Solve | Scenario::CompareBaselines => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVE: &str = r#"{"scenario":"solve","fleet":{"weights":[1,4],"efficiencies":[0.5,0.9]},"ts_ratio":0.01}"#;

    #[test]
    fn parses_a_minimal_config() {
        let c = ExperimentConfig::from_json(SOLVE).unwrap();
        assert_eq!(c.scenario, Scenario::Solve);
        assert_eq!(c.declared_mean(), 1.0);
        assert_eq!(c.run, RunControls::default());
        assert!(c.validate().unwrap().0.is_empty());
    }

    #[test]
    fn rejects_unknown_keys() {
        let typo = SOLVE.replace("ts_ratio", "ts_ration");
        assert!(matches!(ExperimentConfig::from_json(&typo), Err(CliError::Config(_))));
        let nested = SOLVE.replace(r#""ts_ratio":0.01"#, r#""ts_ratio":0.01,"run":{"cycle":5}"#);
        assert!(ExperimentConfig::from_json(&nested).is_err());
    }

    #[test]
    fn random_fleets_are_seeded() {
        let text = r#"{"scenario":"solve","fleet":{"random":{"count":5,"master_seed":9}}}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        let a = c.fleet(3, None, 0.0).unwrap();
        assert_eq!(a, c.fleet(3, None, 0.0).unwrap());
        assert_ne!(a, c.fleet(4, None, 0.0).unwrap());
        assert_eq!(c.fleet(0, Some(7), 0.0).unwrap().len(), 7);
    }

    #[test]
    fn scarce_fleets_get_a_note() {
        let c = ExperimentConfig::from_json(&SOLVE.replace("0.5,0.9", "0.2,0.3")).unwrap();
        let notes = c.validate().unwrap();
        assert!(notes.0[0].contains("energy-scarce regime"));
    }

    #[test]
    fn mean_mismatch_names_both_values() {
        let text = SOLVE.replace(
            r#""ts_ratio":0.01"#,
            r#""mean_tx_time":2.0,"tx_dist":{"kind":"uniform","lo":0.5,"hi":1.5}"#,
        );
        let err = ExperimentConfig::from_json(&text).unwrap().validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("1 s") && msg.contains("2 s"), "{msg}");
    }

    #[test]
    fn negative_weight_names_the_source() {
        let c = ExperimentConfig::from_json(&SOLVE.replace("[1,4]", "[1,-4]")).unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("source 1"), "{msg}");
    }
}
