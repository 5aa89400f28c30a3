#![allow(dead_code)]

use sleepwake_core::model::Regime;
use sleepwake_core::SplitRng;

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Weights in (0, 10) and efficiencies in (0, 1). A scarce request rescales
/// the efficiencies to a uniform total in (0, 1); an adequate request redraws
/// (needs `m >= 2`).
pub fn random_instance(rng: &mut SplitRng, m: usize, regime: Option<Regime>) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2 || regime != Some(Regime::EnergyAdequate));
    loop {
        let w: Vec<f64> = (0..m).map(|_| rng.uniform(0.0, 10.0)).collect();
        let mut b: Vec<f64> = (0..m).map(|_| rng.uniform(0.0, 1.0)).collect();
        let total: f64 = b.iter().sum();
        match (regime, Regime::of_total(total)) {
            (Some(Regime::EnergyScarce), Regime::EnergyAdequate) => {
                let target = rng.uniform(0.0, 1.0);
                b.iter_mut().for_each(|x| *x *= target / total);
                return (w, b);
            }
            (Some(want), got) if want != got => continue,
            _ => return (w, b),
        }
    }
}

/// Log-uniform draw on [lo, hi].
pub fn log_uniform(rng: &mut SplitRng, lo: f64, hi: f64) -> f64 {
    (rng.uniform(lo.ln(), hi.ln())).exp()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn stddev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {}
