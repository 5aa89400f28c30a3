//! Brute-force reference optimum over a logarithmic rate grid.
//!
//! All axes but the last are gridded; the last rate is optimized exactly
//! along its line (see [`GridSearch::line_search`]). Plain lattices cannot
//! follow an active budget constraint, which is where the optimum usually
//! sits.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{plan, x_star_adequate};
use crate::error::{Error, Result};
use crate::model::{sigma_term, Fleet, FEASIBILITY_TOL, MAX_EXPONENT};

/// Window shrinks of the pattern search run by [`grid_oracle`].
pub const DEFAULT_REFINE_ROUNDS: usize = 12;

const MAX_SOURCES: usize = 3;
const REFINE_POINTS: usize = 41;
const MAX_MOVES: usize = 2000;
const LINE_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub best_rates: Vec<f64>,
    pub best_objective: f64,
}

impl GridOptimum {
    /// Order-independent reduction: lower objective, then lexicographically
    /// smaller rate vector.
    pub fn better(self, other: Self) -> Self {
        match self.best_objective.total_cmp(&other.best_objective) {
            Ordering::Less => self,
            Ordering::Greater => other,
            Ordering::Equal => {
                if lex_cmp(&other.best_rates, &self.best_rates) == Ordering::Less {
                    other
                } else {
                    self
                }
            }
        }
    }

    pub fn merge(a: Option<Self>, b: Option<Self>) -> Option<Self> {
        match (a, b) {
            (Some(a), Some(b)) => Some(a.better(b)),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Grid over `[min(1e-3 x*, r_min / 10), 10 x*]` per axis, split into shards
/// along the first axis so workers can scan them independently.
#[derive(Debug, Clone)]
pub struct GridSearch {
    weights: Vec<f64>,
    efficiencies: Vec<f64>,
    ts_ratio: f64,
    axis: Vec<f64>,
    log_range: (f64, f64),
    log_step: f64,
}

impl GridSearch {
    pub fn new(fleet: &Fleet, per_axis_points: usize) -> Result<Self> {
        if fleet.len() > MAX_SOURCES {
            return Err(Error::Unsupported {
                what: "grid search needs at most 3 sources",
            });
        }
        if per_axis_points < 2 {
            return Err(Error::InvalidParameter {
                name: "per_axis_points",
                value: per_axis_points as f64,
            });
        }
        let (x_ref, r_min) = match plan(fleet) {
            Ok(sol) => {
                let r_min = sol.plan.rates.iter().copied().fold(f64::INFINITY, f64::min);
                (sol.plan.x_star, r_min)
            }
            Err(Error::UnboundedRates) => (x_star_adequate(f64::EPSILON), f64::INFINITY),
            Err(e) => return Err(e),
        };
        // widened below when a tiny budget puts a planned rate under 1e-3 x*
        let lo = libm::log((1e-3 * x_ref).min(0.1 * r_min));
        let hi = libm::log(10.0 * x_ref);
        let log_step = (hi - lo) / (per_axis_points - 1) as f64;
        let axis = (0..per_axis_points)
            .map(|i| libm::exp(lo + log_step * i as f64))
            .collect();
        Ok(Self {
            weights: fleet.weights(),
            efficiencies: fleet.efficiencies(),
            ts_ratio: fleet.ts_ratio(),
            axis,
            log_range: (lo, hi),
            log_step,
        })
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    fn outer_dims(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn shard_count(&self) -> usize {
        if self.outer_dims() == 0 {
            1
        } else {
            self.axis.len()
        }
    }

    /// Best feasible point whose first coordinate is `axis()[shard]` (the
    /// whole line search when there is a single source).
    pub fn search_shard(&self, shard: usize) -> Option<GridOptimum> {
        let outer = self.outer_dims();
        if outer == 0 {
            return self.line_search(&[]);
        }
        let first = [self.axis[shard]];
        let mut axes: Vec<&[f64]> = vec![&first];
        axes.extend(core::iter::repeat_n(self.axis.as_slice(), outer - 1));
        self.scan(&axes)
    }

    /// Plain scan of the whole grid.
    pub fn coarse(&self) -> Option<GridOptimum> {
        (0..self.shard_count())
            .map(|s| self.search_shard(s))
            .fold(None, GridOptimum::merge)
    }

    /// Pattern search over the gridded axes on a log-window centred on the
    /// incumbent, clipped to the grid range. The window doubles (up to its
    /// initial size) after a move and shrinks by `4/40` when the incumbent
    /// stays put; the search ends `rounds` shrinks below the initial size.
    /// Never returns a worse point than `start`.
    pub fn refine(&self, start: GridOptimum, rounds: usize) -> GridOptimum {
        let outer = self.outer_dims();
        let mut best = start;
        if outer == 0 {
            return best;
        }
        let initial = 2.0 * self.log_step;
        let shrink = 4.0 / (REFINE_POINTS - 1) as f64;
        let stop = initial * libm::pow(shrink, rounds as f64);
        let mut half_width = initial;
        let mut moves = 0;
        while half_width > stop * (1.0 + 1e-9) {
            let axes: Vec<Vec<f64>> = best.best_rates[..outer]
                .iter()
                .map(|&r| {
                    let c = libm::log(r);
                    let lo = (c - half_width).max(self.log_range.0);
                    let hi = (c + half_width).min(self.log_range.1);
                    (0..REFINE_POINTS)
                        .map(|i| {
                            let t = i as f64 / (REFINE_POINTS - 1) as f64;
                            libm::exp(lo + (hi - lo) * t)
                        })
                        .collect()
                })
                .collect();
            let views: Vec<&[f64]> = axes.iter().map(Vec::as_slice).collect();
            let moved = match self.scan(&views) {
                Some(found) if found.best_objective < best.best_objective => {
                    best = found;
                    true
                }
                _ => false,
            };
            if moved && moves < MAX_MOVES {
                moves += 1;
                half_width = (2.0 * half_width).min(initial);
            } else {
                half_width *= shrink;
            }
        }
        best
    }

    /// Objective at a feasible point, `None` if infeasible or out of range.
    pub fn evaluate(&self, rates: &[f64]) -> Option<f64> {
        let s: f64 = rates.iter().sum();
        if (s * self.ts_ratio).is_nan() || s * self.ts_ratio > MAX_EXPONENT {
            return None;
        }
        let eps = self.ts_ratio;
        let mut total = 0.0;
        for ((&r, &w), &b) in rates.iter().zip(&self.weights).zip(&self.efficiencies) {
            if sigma_term(r, s, eps) > b + FEASIBILITY_TOL {
                return None;
            }
            total += w * (libm::exp((s - r) * eps) * (1.0 + s) / r + 1.0);
        }
        Some(total)
    }

    /// Best last rate for the given leading rates. Each budget (and the
    /// overflow guard) is monotone along the line, so the feasible set is an
    /// interval whose ends are found by bisection. The objective is scanned
    /// on a log grid over that interval and polished by golden section.
    pub fn line_search(&self, prefix: &[f64]) -> Option<GridOptimum> {
        let m = prefix.len() + 1;
        let eps = self.ts_ratio;
        let rest: f64 = prefix.iter().sum();
        let mut point = [0.0; MAX_SOURCES];
        point[..m - 1].copy_from_slice(prefix);
        let at = |log_x: f64| {
            let mut p = point;
            p[m - 1] = libm::exp(log_x);
            p
        };
        // slack of constraint `l` at `log_x`, feasible when <= 0
        let slack = |l: usize, log_x: f64| -> f64 {
            let p = at(log_x);
            let s = rest + p[m - 1];
            if l == m {
                s * eps - MAX_EXPONENT
            } else {
                sigma_term(p[l], s, eps) - self.efficiencies[l] - FEASIBILITY_TOL
            }
        };

        let (mut lo, mut hi) = self.log_range;
        for l in 0..=m {
            let (a, b) = (slack(l, lo) <= 0.0, slack(l, hi) <= 0.0);
            match (a, b) {
                (true, true) => {}
                (false, false) => return None,
                _ => {
                    let (mut inside, mut outside) = if a { (lo, hi) } else { (hi, lo) };
                    for _ in 0..LINE_ITERATIONS {
                        let mid = 0.5 * (inside + outside);
                        if mid == inside || mid == outside {
                            break;
                        }
                        if slack(l, mid) <= 0.0 {
                            inside = mid;
                        } else {
                            outside = mid;
                        }
                    }
                    if a {
                        hi = inside;
                    } else {
                        lo = inside;
                    }
                }
            }
            if lo > hi {
                return None;
            }
        }

        let value = |log_x: f64| self.evaluate(&at(log_x)[..m]).unwrap_or(f64::INFINITY);
        let mut best = (f64::INFINITY, hi);
        let mut offer = |v: f64, x: f64| {
            if v < best.0 || (v == best.0 && x < best.1) {
                best = (v, x);
            }
        };
        let n = self.axis.len();
        let step = (hi - lo) / (n - 1) as f64;
        let logs: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        let mut best_index = 0;
        let mut best_scan = f64::INFINITY;
        for (i, &x) in logs.iter().enumerate() {
            let v = value(x);
            if v < best_scan {
                best_scan = v;
                best_index = i;
            }
            offer(v, x);
        }
        offer(value(hi), hi);
        if step > 0.0 {
            let g = 0.5 * (libm::sqrt(5.0) - 1.0);
            let mut a = logs[best_index.saturating_sub(1)];
            let mut b = logs[(best_index + 1).min(n - 1)];
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (value(c), value(d));
            for _ in 0..LINE_ITERATIONS {
                if b - a <= 1e-15 * a.abs().max(1.0) {
                    break;
                }
                if fc <= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = value(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = value(d);
                }
            }
            offer(fc, c);
            offer(fd, d);
        }
        if !best.0.is_finite() {
            return None;
        }
        let mut rates = prefix.to_vec();
        rates.push(libm::exp(best.1));
        Some(GridOptimum {
            best_rates: rates,
            best_objective: best.0,
        })
    }

    /// Line search at every point of the product of the leading `axes`.
    fn scan(&self, axes: &[&[f64]]) -> Option<GridOptimum> {
        let m = axes.len();
        let mut idx = [0usize; MAX_SOURCES];
        let mut point = [0.0; MAX_SOURCES];
        let mut best = None;
        loop {
            for d in 0..m {
                point[d] = axes[d][idx[d]];
            }
            best = GridOptimum::merge(best, self.line_search(&point[..m]));
            // odometer, last axis fastest
            let mut d = m;
            loop {
                if d == 0 {
                    return best;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

/// Best feasible rate vector: grid scan with an exact line search on the
/// last axis, then a pattern search with [`DEFAULT_REFINE_ROUNDS`] shrinks.
pub fn grid_oracle(fleet: &Fleet, per_axis_points: usize) -> Result<GridOptimum> {
    let search = GridSearch::new(fleet, per_axis_points)?;
    let coarse = search.coarse().ok_or(Error::EmptyRun {
        what: "no feasible grid point",
    })?;
    Ok(search.refine(coarse, DEFAULT_REFINE_ROUNDS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::plan;

    fn fleet(w: &[f64], b: &[f64], eps: f64) -> Fleet {
        Fleet::from_slices(w, b, eps, 1.0).unwrap()
    }

    #[test]
    fn single_source_runs_to_the_grid_edge() {
        // one source never collides: the objective 2 + 1/r keeps falling
        let f = fleet(&[1.0], &[1.0], 0.01);
        let s = GridSearch::new(&f, 2000).unwrap();
        let g = grid_oracle(&f, 2000).unwrap();
        let sol = plan(&f).unwrap();
        let top = *s.axis().last().unwrap();
        assert!((g.best_rates[0] - top).abs() <= 1e-9 * top);
        assert!((g.best_objective - (2.0 + 1.0 / top)).abs() < 1e-12);
        assert!(g.best_objective >= sol.lower_bound);
        assert!(g.best_objective <= sol.upper_bound);
    }

    #[test]
    fn single_source_budget_boundary_is_exact() {
        // sigma = r / (r + 1) binds at r = b / (1 - b)
        let f = fleet(&[2.0], &[0.4], 0.01);
        let g = grid_oracle(&f, 50).unwrap();
        let r = 0.4 / 0.6;
        assert!((g.best_rates[0] - r).abs() <= 1e-11 * r, "{g:?}");
    }

    #[test]
    fn two_sources_both_regimes() {
        for b in [[0.5, 0.9], [0.2, 0.3]] {
            let f = fleet(&[1.0, 4.0], &b, 1e-4);
            let g = grid_oracle(&f, 200).unwrap();
            let sol = plan(&f).unwrap();
            assert!((g.best_objective - sol.upper_bound).abs() / sol.asymptote <= 0.01);
            assert!(g.best_objective >= sol.lower_bound);
            assert!(g.best_objective <= sol.upper_bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn follows_a_single_active_budget() {
        // a lattice-only search stalls here 5e-5 above the plan
        let f = fleet(&[0.232, 9.540], &[0.5368, 0.3278], 1.16e-5);
        let g = grid_oracle(&f, 60).unwrap();
        let sol = plan(&f).unwrap();
        assert!(g.best_objective <= sol.upper_bound * (1.0 + 1e-9));
    }

    #[test]
    fn refinement_never_worsens_and_shards_agree() {
        let f = fleet(&[2.0, 1.0, 0.5], &[0.3, 0.2, 0.1], 0.01);
        let s = GridSearch::new(&f, 24).unwrap();
        let coarse = s.coarse().unwrap();
        let rev = (0..s.shard_count())
            .rev()
            .map(|i| s.search_shard(i))
            .fold(None, GridOptimum::merge)
            .unwrap();
        assert_eq!(coarse, rev);
        let fine = s.refine(coarse.clone(), 4);
        assert!(fine.best_objective <= coarse.best_objective);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let a = GridOptimum {
            best_rates: vec![1.0, 2.0],
            best_objective: 5.0,
        };
        let b = GridOptimum {
            best_rates: vec![1.0, 1.5],
            best_objective: 5.0,
        };
        assert_eq!(a.clone().better(b.clone()), b);
        assert_eq!(b.clone().better(a), b);
    }

    #[test]
    fn rejects_large_fleets() {
        let f = fleet(&[1.0; 4], &[0.5; 4], 0.01);
        assert!(matches!(grid_oracle(&f, 10), Err(Error::Unsupported { .. })));
    }
}
