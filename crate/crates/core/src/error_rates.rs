//! Error-rate bounds for the refined approximation and the rate-optimal
//! choice of `k`.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::tail_model::require_theory_xi;

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain(format!("delta must be positive and finite, got {delta}")));
    }
    Ok(())
}

fn check_inputs(xi: f64, delta: f64) -> Result<()> {
    require_theory_xi(xi)?;
    check_delta(delta)
}

#[inline]
fn pow(base: f64, e: f64) -> f64 {
    (e * base.ln()).exp()
}

fn rate_bound_unchecked(k: f64, n: f64, xi: f64, delta: f64) -> f64 {
    let common = pow(k / n, delta) * k.sqrt() + k / n;
    if xi < 0.5 {
        pow(n, -0.5) * pow(n / k, 3.0 * xi - 1.0) + common
    } else {
        pow(k, -xi) + common
    }
}

/// `R(k, n, ξ, δ)`:
///
/// * `ξ < 1/2`: `n^{-1/2}(n/k)^{3ξ-1} + (k/n)^δ k^{1/2} + k/n`
/// * `ξ ≥ 1/2`: `k^{-ξ} + (k/n)^δ k^{1/2} + k/n`
pub fn rate_bound(k: u64, n: u64, xi: f64, delta: f64) -> Result<f64> {
    check_inputs(xi, delta)?;
    if k < 1 || k >= n {
        return Err(domain(format!("need 1 <= k < n, got k={k} n={n}")));
    }
    Ok(rate_bound_unchecked(k as f64, n as f64, xi, delta))
}

/// The `k` in `1..n` minimising `R(k, n, ξ, δ)` and the minimum.
///
/// Each term of `R` is a power of `k`, so `R` is convex in `ln k` and the
/// integer minimiser is found by ternary search.
pub fn min_rate_bound(n: u64, xi: f64, delta: f64) -> Result<(u64, f64)> {
    check_inputs(xi, delta)?;
    if n < 2 {
        return Err(domain(format!("need n >= 2, got {n}")));
    }
    let r = |k: u64| rate_bound_unchecked(k as f64, n as f64, xi, delta);
    let (mut lo, mut hi) = (1u64, n - 1);
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if r(m1) <= r(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok((lo..=hi).map(|k| (k, r(k))).fold((lo, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best }))
}

/// Growth exponent `α*` of the rate-optimal `k* ≍ n^{α*}`.
pub fn alpha_star(xi: f64, delta: f64) -> Result<f64> {
    check_inputs(xi, delta)?;
    Ok(if xi < 0.5 {
        let a = (6.0 * xi - 1.0) / (6.0 * xi);
        let b = (6.0 * xi + 2.0 * delta - 3.0) / (6.0 * xi + 2.0 * delta - 1.0);
        a.min(b).max(0.0)
    } else {
        (2.0 * delta / (1.0 + 2.0 * (delta + xi))).min(1.0 / (1.0 + xi))
    })
}

/// Error-rate exponent `β*`: the bound at `k*` decays like `n^{β*}`.
pub fn beta_star(xi: f64, delta: f64) -> Result<f64> {
    check_inputs(xi, delta)?;
    Ok(match regime(xi, delta) {
        Regime::LightDelta => -delta,
        Regime::LightMixed => -(3.0 + 2.0 * delta - 6.0 * xi) / (12.0 * xi + 4.0 * delta - 2.0),
        Regime::LightMoment => -1.0 / (6.0 * xi),
        Regime::HeavyDelta | Regime::HeavyTail => -xi * alpha_star(xi, delta)?,
    })
}

/// Which piece of the optimal-rate formulas applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `ξ < 1/2`, `δ ≤ 3(1/2 - ξ)`: fixed `k`, rate `n^{-δ}`.
    LightDelta,
    /// `ξ < 1/2`, `3(1/2 - ξ) < δ ≤ 1/2 + 3ξ`.
    LightMixed,
    /// `ξ < 1/2`, `δ > 1/2 + 3ξ`: rate `n^{-1/(6ξ)}`.
    LightMoment,
    /// `ξ ≥ 1/2`, `α*` set by the tail deviation `δ`.
    HeavyDelta,
    /// `ξ ≥ 1/2`, `α* = 1/(1+ξ)`.
    HeavyTail,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::LightDelta => "light-delta",
            Regime::LightMixed => "light-mixed",
            Regime::LightMoment => "light-moment",
            Regime::HeavyDelta => "heavy-delta",
            Regime::HeavyTail => "heavy-tail",
        }
    }
}

fn regime(xi: f64, delta: f64) -> Regime {
    if xi < 0.5 {
        if delta <= 3.0 * (0.5 - xi) {
            Regime::LightDelta
        } else if delta <= 0.5 + 3.0 * xi {
            Regime::LightMixed
        } else {
            Regime::LightMoment
        }
    } else if 2.0 * delta / (1.0 + 2.0 * (delta + xi)) < 1.0 / (1.0 + xi) {
        Regime::HeavyDelta
    } else {
        Regime::HeavyTail
    }
}

pub fn rate_regime(xi: f64, delta: f64) -> Result<Regime> {
    check_inputs(xi, delta)?;
    Ok(regime(xi, delta))
}

/// Decay exponent of the classical approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Benchmark {
    /// Error `≍ n^{e}`.
    Power(f64),
    /// `ξ = 1/2`: the normal approximation converges only logarithmically.
    Logarithmic,
}

impl Benchmark {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Benchmark::Power(e) => Some(*e),
            Benchmark::Logarithmic => None,
        }
    }
}

impl std::fmt::Display for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Benchmark::Power(e) => write!(f, "{e}"),
            Benchmark::Logarithmic => f.write_str("log"),
        }
    }
}

/// Normal benchmark `1 - 1/(2ξ)` for `ξ < 1/2`; stable benchmark
/// `max(1 - 2ξ, -δ)` for `ξ > 1/2`.
pub fn benchmark_exponent(xi: f64, delta: f64) -> Result<Benchmark> {
    check_inputs(xi, delta)?;
    Ok(if xi < 0.5 {
        Benchmark::Power(1.0 - 1.0 / (2.0 * xi))
    } else if xi > 0.5 {
        Benchmark::Power((1.0 - 2.0 * xi).max(-delta))
    } else {
        Benchmark::Logarithmic
    })
}

/// `max(1, round(multiplier·n^{α*}))` capped at `n - 1`, with no fallback.
pub fn k_rate_optimal(n: u64, xi: f64, delta: f64, multiplier: f64) -> Result<u64> {
    if n < 2 {
        return Err(domain(format!("need n >= 2, got {n}")));
    }
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(domain(format!("k multiplier must be positive, got {multiplier}")));
    }
    let alpha = alpha_star(xi, delta)?;
    let k = (multiplier * pow(n as f64, alpha)).round();
    Ok((k.max(1.0) as u64).min(n - 1))
}

/// Like [`k_rate_optimal`], but 0 when the refined rate `β*` is no better
/// than the normal benchmark (`ξ < 1/2` only); 0 means "use the normal
/// baseline".
pub fn k_star(n: u64, xi: f64, delta: f64, multiplier: f64) -> Result<u64> {
    let k = k_rate_optimal(n, xi, delta, multiplier)?;
    Ok(if normal_preferred(xi, delta)? { 0 } else { k })
}

fn normal_preferred(xi: f64, delta: f64) -> Result<bool> {
    if xi >= 0.5 {
        return Ok(false);
    }
    let beta = beta_star(xi, delta)?;
    Ok(matches!(benchmark_exponent(xi, delta)?, Benchmark::Power(b) if beta > b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSpec {
    pub alpha_star: f64,
    pub beta_star: f64,
    pub k_star: u64,
    pub regime: Regime,
}

impl RateSpec {
    pub fn new(n: u64, xi: f64, delta: f64, multiplier: f64) -> Result<Self> {
        Ok(Self {
            alpha_star: alpha_star(xi, delta)?,
            beta_star: beta_star(xi, delta)?,
            k_star: k_star(n, xi, delta, multiplier)?,
            regime: regime(xi, delta),
        })
    }

    pub fn normal_fallback(&self) -> bool {
        self.k_star == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub xi: f64,
    pub beta_star: f64,
    pub alpha_star: f64,
    pub benchmark: Benchmark,
    pub regime: Regime,
}

pub fn rate_curves(xi_grid: &[f64], delta: f64) -> Result<Vec<RateRow>> {
    xi_grid
        .iter()
        .map(|&xi| {
            Ok(RateRow {
                xi,
                beta_star: beta_star(xi, delta)?,
                alpha_star: alpha_star(xi, delta)?,
                benchmark: benchmark_exponent(xi, delta)?,
                regime: regime(xi, delta),
            })
        })
        .collect()
}

/// CSV with header `xi,beta_star,alpha_star,benchmark,regime`; `benchmark`
/// is `log` at `ξ = 1/2`.
pub fn write_rate_curves_csv<W: std::io::Write>(out: W, rows: &[RateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["xi", "beta_star", "alpha_star", "benchmark", "regime"])?;
    for r in rows {
        w.write_record([
            r.xi.to_string(),
            r.beta_star.to_string(),
            r.alpha_star.to_string(),
            r.benchmark.to_string(),
            r.regime.label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
