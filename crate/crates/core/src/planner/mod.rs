//! Near-optimal sleep rates, analytic bounds and reference solutions.

mod grid;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{self, check_len, Fleet, Regime, SleepPlan, MAX_EXPONENT};

pub use grid::{grid_oracle, GridOptimum, GridSearch, DEFAULT_REFINE_ROUNDS};

pub const BETA_MAX_ITERATIONS: usize = 200;
pub const BETA_TOLERANCE: f64 = 1e-12;

/// A plan with its optimality certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSolution {
    pub plan: SleepPlan,
    /// Multiplier of the leading sub-optimality term.
    pub gap_constant: f64,
    /// Leading-order sub-optimality bound at the fleet's `ts_ratio`.
    pub gap_bound: f64,
    /// Lower bound on the optimal weighted peak age.
    pub lower_bound: f64,
    /// Weighted peak age attained by `plan`.
    pub upper_bound: f64,
    /// Limit of the optimum as `ts_ratio -> 0`.
    pub asymptote: f64,
}

impl RegimeSolution {
    pub fn objective(&self) -> f64 {
        self.upper_bound
    }
}

fn check_inputs(weights: &[f64], efficiencies: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptyFleet);
    }
    check_len(weights.len(), efficiencies.len())?;
    for (index, (&w, &b)) in weights.iter().zip(efficiencies).enumerate() {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidSource {
                index,
                field: "weight",
                value: w,
            });
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidSource {
                index,
                field: "power_efficiency",
                value: b,
            });
        }
    }
    Ok(())
}

fn share_sum(weights: &[f64], efficiencies: &[f64], level: f64) -> f64 {
    weights
        .iter()
        .zip(efficiencies)
        .map(|(&w, &b)| b.min(level * libm::sqrt(w)))
        .sum()
}

/// Share level solving `sum(min(b_i, beta sqrt(w_i))) = target`.
fn share_level(weights: &[f64], efficiencies: &[f64], target: f64) -> Result<f64> {
    check_inputs(weights, efficiencies)?;
    let total: f64 = efficiencies.iter().sum();
    if total < target {
        return Err(Error::NoRoot { total, target });
    }
    let mut hi = weights
        .iter()
        .zip(efficiencies)
        .map(|(&w, &b)| b / libm::sqrt(w))
        .fold(0.0, f64::max);
    // Saturated: every level >= hi is a root, take the smallest.
    if total - target <= BETA_TOLERANCE {
        return Ok(hi);
    }
    let mut lo = 0.0;
    let mut best = (f64::INFINITY, hi);
    for _ in 0..BETA_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let residual = share_sum(weights, efficiencies, mid) - target;
        if residual.abs() < best.0 {
            best = (residual.abs(), mid);
        }
        if residual.abs() <= BETA_TOLERANCE {
            break;
        }
        if residual < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// Share level `beta*` of the energy-adequate regime.
pub fn solve_beta_star(weights: &[f64], efficiencies: &[f64]) -> Result<f64> {
    share_level(weights, efficiencies, 1.0)
}

/// Aggregate rate of the energy-adequate regime, `-1/2 + sqrt(1/4 + 1/eps)`,
/// in a cancellation-free form.
pub fn x_star_adequate(ts_ratio: f64) -> f64 {
    let inv = 1.0 / ts_ratio;
    inv / (0.5 + libm::sqrt(0.25 + inv))
}

fn shares(weights: &[f64], efficiencies: &[f64], beta: f64) -> Vec<f64> {
    weights
        .iter()
        .zip(efficiencies)
        .map(|(&w, &b)| b.min(beta * libm::sqrt(w)))
        .collect()
}

/// `sum(w_i / a_i + w_i)`.
fn share_objective(weights: &[f64], shares: &[f64]) -> f64 {
    weights.iter().zip(shares).map(|(&w, &a)| w / a + w).sum()
}

pub fn plan_energy_adequate(fleet: &Fleet) -> Result<RegimeSolution> {
    let total = fleet.total_efficiency();
    if total < 1.0 {
        return Err(Error::WrongRegime {
            total,
            expected: Regime::EnergyAdequate,
        });
    }
    let eps = fleet.ts_ratio();
    if eps == 0.0 {
        return Err(Error::UnboundedRates);
    }
    let weights = fleet.weights();
    let effs = fleet.efficiencies();
    let beta = solve_beta_star(&weights, &effs)?;
    let x = x_star_adequate(eps);
    let rates: Vec<f64> = weights
        .iter()
        .zip(&effs)
        .map(|(&w, &b)| model::source_rate(w, b, beta, x))
        .collect();
    let a = shares(&weights, &effs, beta);
    let c1: f64 = weights.iter().zip(&a).map(|(&w, &a)| w / a).sum();
    let asymptote = share_objective(&weights, &a);
    let upper = model::weighted_peak_age(&weights, &rates, eps)?;
    Ok(RegimeSolution {
        plan: SleepPlan {
            rates,
            regime: Regime::EnergyAdequate,
            beta_star: beta,
            x_star: x,
        },
        gap_constant: c1,
        gap_bound: 2.0 * libm::sqrt(eps) * c1,
        lower_bound: asymptote,
        upper_bound: upper,
        asymptote,
    })
}

/// Per-source feasibility factors `c_l` of the energy-scarce regime.
pub fn feasibility_factors(efficiencies: &[f64], ts_ratio: f64) -> Vec<f64> {
    let total: f64 = efficiencies.iter().sum();
    let idle = 1.0 - total;
    let idle2 = idle * idle;
    efficiencies
        .iter()
        .map(|&b| {
            let q = b * idle2
                + libm::sqrt(b * b * idle2 * idle2 + 4.0 * b * b * idle2 * (total - b) * ts_ratio);
            2.0 * b * idle2 / q
        })
        .collect()
}

pub fn plan_energy_scarce(fleet: &Fleet) -> Result<RegimeSolution> {
    let total = fleet.total_efficiency();
    if total >= 1.0 {
        return Err(Error::WrongRegime {
            total,
            expected: Regime::EnergyScarce,
        });
    }
    let eps = fleet.ts_ratio();
    let weights = fleet.weights();
    let effs = fleet.efficiencies();
    let idle = 1.0 - total;
    let c = feasibility_factors(&effs, eps);
    let x = c.iter().copied().fold(f64::INFINITY, f64::min) / idle;
    let beta: f64 = weights.iter().map(|&w| 1.0 / libm::sqrt(w)).sum();
    let rates: Vec<f64> = weights
        .iter()
        .zip(&effs)
        .map(|(&w, &b)| model::source_rate(w, b, beta, x))
        .collect();
    let b_min = effs.iter().copied().fold(f64::INFINITY, f64::min);
    let c2: f64 = weights
        .iter()
        .zip(&effs)
        .map(|(&w, &b)| w / (b * idle))
        .sum::<f64>()
        * (3.0 * total - b_min);
    let z = total / idle;
    let w_sum: f64 = weights.iter().sum();
    let w_over_b: f64 = weights.iter().zip(&effs).map(|(&w, &b)| w / b).sum();
    let lower = w_over_b * libm::exp(-z * eps) + w_sum;
    let upper = model::weighted_peak_age(&weights, &rates, eps)?;
    Ok(RegimeSolution {
        plan: SleepPlan {
            rates,
            regime: Regime::EnergyScarce,
            beta_star: beta,
            x_star: x,
        },
        gap_constant: c2,
        gap_bound: eps * c2,
        lower_bound: lower,
        upper_bound: upper,
        asymptote: w_over_b + w_sum,
    })
}

/// Dispatches on the regime (`sum(b) >= 1` is energy-adequate).
pub fn plan(fleet: &Fleet) -> Result<RegimeSolution> {
    match fleet.regime() {
        Regime::EnergyAdequate => plan_energy_adequate(fleet),
        Regime::EnergyScarce => plan_energy_scarce(fleet),
    }
}

/// Outer-layer variable of the zero-sensing nested problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterLayer {
    /// `y = sum(r) + 1`, must exceed 1.
    Finite(f64),
    /// `y -> infinity`.
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedSolution {
    /// Channel shares `min(b_l, beta sqrt(w_l))`.
    pub shares: Vec<f64>,
    /// Inner-layer optimal rates; `None` in the limit.
    pub rates: Option<Vec<f64>>,
    pub beta: f64,
    pub objective: f64,
}

/// Zero-sensing problem solved through the two-layer formulation.
pub fn plan_ts_zero(fleet: &Fleet, outer: OuterLayer) -> Result<NestedSolution> {
    let weights = fleet.weights();
    let effs = fleet.efficiencies();
    let (beta, y) = match outer {
        OuterLayer::Finite(y) => {
            if !(y.is_finite() && y > 1.0) {
                return Err(Error::InvalidParameter {
                    name: "outer layer y",
                    value: y,
                });
            }
            (share_level(&weights, &effs, 1.0 - 1.0 / y)?, Some(y))
        }
        OuterLayer::Limit => (solve_beta_star(&weights, &effs)?, None),
    };
    let a = shares(&weights, &effs, beta);
    let objective = share_objective(&weights, &a);
    let rates = y.map(|y| a.iter().map(|&s| s * y).collect());
    Ok(NestedSolution {
        shares: a,
        rates,
        beta,
        objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncSolution {
    pub shares: Vec<f64>,
    pub value: f64,
}

/// Optimal scheduler that assigns channel-time shares directly.
pub fn synchronized_optimum(weights: &[f64], efficiencies: &[f64]) -> Result<SyncSolution> {
    check_inputs(weights, efficiencies)?;
    let total: f64 = efficiencies.iter().sum();
    let a = if total >= 1.0 {
        shares(weights, efficiencies, solve_beta_star(weights, efficiencies)?)
    } else {
        efficiencies.to_vec()
    };
    Ok(SyncSolution {
        value: share_objective(weights, &a),
        shares: a,
    })
}

/// Transmit fraction of any source when all `m` sources use rate `k`.
fn equal_rate_sigma(k: f64, m: usize, eps: f64) -> f64 {
    model::sigma_term(k, k * m as f64, eps)
}

/// Same rate `k` for every source, as large as the tightest budget allows.
///
/// When no budget ever binds, `k = x*/M` so the aggregate rate matches the
/// optimal plan. The returned plan has `beta_star = NaN`.
pub fn fixed_rate_baseline(fleet: &Fleet) -> Result<SleepPlan> {
    let m = fleet.len();
    let eps = fleet.ts_ratio();
    let b_min = fleet
        .sources()
        .iter()
        .map(|s| s.power_efficiency)
        .fold(f64::INFINITY, f64::min);
    // Largest k the overflow guard admits.
    let k_max = if eps > 0.0 {
        MAX_EXPONENT / (m as f64 * eps)
    } else {
        1e12
    };
    let k = if equal_rate_sigma(k_max, m, eps) <= b_min {
        let x_ref = match plan(fleet) {
            Ok(sol) => sol.plan.x_star,
            Err(Error::UnboundedRates) => x_star_adequate(f64::EPSILON),
            Err(e) => return Err(e),
        };
        (x_ref / m as f64).min(k_max)
    } else {
        let (mut lo, mut hi) = (0.0, k_max);
        for _ in 0..BETA_MAX_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if equal_rate_sigma(mid, m, eps) <= b_min {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(SleepPlan {
        rates: alloc::vec![k; m],
        regime: fleet.regime(),
        beta_star: f64::NAN,
        x_star: k * m as f64,
    })
}
