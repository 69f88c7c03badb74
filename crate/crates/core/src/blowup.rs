//! Blow-up time and rate from the tail of the `‖ψ‖∞` history.
//!
//! Fits `ln‖ψ‖∞ ≈ α + γ ln(t* − t)` by Nelder–Mead on `(α, γ, t*)`, with
//! `t* > t_last` enforced by an infinite penalty.

use crate::error::{Error, Result};
use crate::simplex::{nelder_mead, SimplexConfig};

pub const DEFAULT_WINDOW: usize = 1000;
pub const MIN_WINDOW: usize = 10;

/// Offsets of the additional seeds beyond the last sample, in units of the window span.
const EXTRA_STARTS: [f64; 3] = [0.1, 0.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupFit {
    pub alpha: f64,
    pub gamma: f64,
    pub t_star: f64,
    /// Root mean square of the log residual over the window.
    pub residual: f64,
    /// First and last index (inclusive) of the fitted window in the input series.
    pub window: (usize, usize),
    pub iterations: usize,
}

impl BlowupFit {
    pub fn model(&self, t: f64) -> f64 {
        self.alpha + self.gamma * (self.t_star - t).ln()
    }
}

fn sum_of_squares(times: &[f64], logs: &[f64], p: &[f64]) -> f64 {
    let (alpha, gamma, t_star) = (p[0], p[1], p[2]);
    let t_last = *times.last().expect("non-empty window");
    if !(t_star > t_last) {
        return f64::INFINITY;
    }
    times
        .iter()
        .zip(logs)
        .map(|(&t, &l)| {
            let r = l - alpha - gamma * (t_star - t).ln();
            r * r
        })
        .sum()
}

/// Initial guess `(α₀, γ₀, t*₀)` from the last two samples of the window.
pub fn initial_guess(times: &[f64], linf: &[f64]) -> [f64; 3] {
    let n = times.len();
    let t_last = times[n - 1];
    let t_star = t_last + 2.0 * (t_last - times[n - 2]);
    let gamma = -1.0;
    let alpha = linf[n - 1].ln() - gamma * (t_star - t_last).ln();
    [alpha, gamma, t_star]
}

/// Seed with `t*` fixed and `(α, γ)` from the linear least-squares fit at that `t*`.
fn linear_seed(times: &[f64], logs: &[f64], t_star: f64) -> [f64; 3] {
    let n = times.len() as f64;
    let u: Vec<f64> = times.iter().map(|t| (t_star - t).ln()).collect();
    let (mu, ml) = (u.iter().sum::<f64>() / n, logs.iter().sum::<f64>() / n);
    let suu: f64 = u.iter().map(|a| (a - mu).powi(2)).sum();
    let sul: f64 = u.iter().zip(logs).map(|(a, l)| (a - mu) * (l - ml)).sum();
    let gamma = if suu > 0.0 { sul / suu } else { -1.0 };
    [ml - gamma * mu, gamma, t_star]
}

/// Fits the last `window_size` points of `series` (pairs `(t, ‖ψ‖∞)`).
pub fn fit_blowup(series: &[(f64, f64)], window_size: usize, config: &SimplexConfig) -> Result<BlowupFit> {
    if window_size < MIN_WINDOW {
        return Err(Error::Config(format!("fit window must hold at least {MIN_WINDOW} points")));
    }
    if series.len() < window_size {
        return Err(Error::Fit(format!(
            "series has {} points, fit window needs {window_size}",
            series.len()
        )));
    }
    let first = series.len() - window_size;
    let tail = &series[first..];
    let times: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let linf: Vec<f64> = tail.iter().map(|p| p.1).collect();
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Fit("times are not strictly increasing".into()));
    }
    if linf.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Fit("L-infinity values must be positive and finite".into()));
    }
    let logs: Vec<f64> = linf.iter().map(|v| v.ln()).collect();
    let (lo, hi) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(Error::Fit("L-infinity is constant over the window; no blow-up to fit".into()));
    }

    let span = times[times.len() - 1] - times[0];
    let mut cfg = config.clone();
    if cfg.initial_steps.is_none() {
        cfg.initial_steps = Some(vec![0.1, 0.05, 0.05 * span]);
    }
    let objective = |p: &[f64]| sum_of_squares(&times, &logs, p);
    let mut min = nelder_mead(objective, &initial_guess(&times, &linf), &cfg)?;
    // the α–γ–t* valley is long and shallow; extra starts catch runs that stall in it
    for frac in EXTRA_STARTS {
        let seed = linear_seed(&times, &logs, times[times.len() - 1] + frac * span);
        let alt = nelder_mead(objective, &seed, &cfg)?;
        if alt.value < min.value {
            min = alt;
        }
    }
    if !min.value.is_finite() {
        return Err(Error::Fit("optimizer ended on an infeasible point".into()));
    }
    Ok(BlowupFit {
        alpha: min.x[0],
        gamma: min.x[1],
        t_star: min.x[2],
        residual: (min.value / window_size as f64).sqrt(),
        window: (first, series.len() - 1),
        iterations: min.iterations,
    })
}

/// Fits for each window length that fits in the series, for sensitivity reporting.
pub fn window_sensitivity(series: &[(f64, f64)], windows: &[usize], config: &SimplexConfig) -> Vec<(usize, Result<BlowupFit>)> {
    windows
        .iter()
        .filter(|&&w| w <= series.len())
        .map(|&w| (w, fit_blowup(series, w, config)))
        .collect()
}
