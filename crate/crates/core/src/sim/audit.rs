use alloc::vec::Vec;

use super::SimReport;
use crate::error::{Error, Result};
use crate::model::{check_len, BatterySpec, Fleet};

/// Relative slack on `actual_power <= P_max`.
pub const AUDIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAudit {
    /// Watts.
    pub actual_power: Vec<f64>,
    /// Watts.
    pub max_power: Vec<f64>,
    pub lifetime_met: Vec<bool>,
}

/// Compares each source's simulated power draw with its battery budget.
pub fn energy_audit(report: &SimReport, fleet: &Fleet, battery: &[BatterySpec]) -> Result<EnergyAudit> {
    check_len(fleet.len(), report.per_source.len())?;
    check_len(fleet.len(), battery.len())?;
    if report.aggregate.cycles == 0 || report.aggregate.total_time.is_nan() || report.aggregate.total_time <= 0.0 {
        return Err(Error::EmptyRun {
            what: "audit of a zero-length run",
        });
    }
    let mut audit = EnergyAudit {
        actual_power: Vec::with_capacity(fleet.len()),
        max_power: Vec::with_capacity(fleet.len()),
        lifetime_met: Vec::with_capacity(fleet.len()),
    };
    for (s, b) in report.per_source.iter().zip(battery) {
        b.validate()?;
        let actual = s.empirical_transmit_fraction * b.avg_tx_power;
        let max = b.max_power();
        audit.actual_power.push(actual);
        audit.max_power.push(max);
        audit.lifetime_met.push(actual <= max * (1.0 + AUDIT_TOL));
    }
    Ok(audit)
}
