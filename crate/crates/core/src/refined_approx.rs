//! Refined approximations to the law of `S_n = X_1 + … + X_n`.
//!
//! Each approximand is a deterministic map from a Poisson ladder
//! `Γ_1 < … < Γ_k` and an independent standard normal `Z` to a value on the
//! scale of `S_n`:
//!
//! ```text
//! n^ξ ω (Σ Γ_i^{-ξ} - Γ_k^{1-ξ}/(1-ξ))  +  n^{1/2} (V)_+^{1/2} Z
//! ```
//!
//! The variants differ in the conditional variance `V` of the bulk (and the
//! shifted variant adds `κ(k - Γ_k)`). The normal and stable baselines are
//! provided for comparison.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, domain, unsupported, Error, Result};
use crate::gamma_ladder::{centered_partial_sum, stable_from_ladder, GammaLadder, DEFAULT_STABLE_TRUNCATION};
use crate::par::{map_replicates, Execution};
use crate::rng::StreamKey;
use crate::tail_model::{
    variance_increment_unchecked, DistributionSpec, DoublyTruncatedVariance, Family, TailParams, TruncatedVariance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `σ₀² - ω²/(1-2ξ) (Γ_k/n)^{1-2ξ}`; needs ξ < 1/2.
    FiniteVariance,
    /// `σ²(ωu_n) + (ω²/ξ)∫_{u_n}^{(n/Γ_k)^ξ} y^{1-1/ξ} dy`.
    Unified,
    /// `σ²(ω(n/Γ_k)^ξ)` evaluated exactly.
    SimplifiedSigmaTau,
    /// `σ²(ωu_n)`: the unified variance without its integral.
    SimplifiedNoIntegral,
    /// Tail shifted by κ: adds `κ(k - Γ_k)` and uses `σ²(ω(n/Γ_k)^ξ + κ)`.
    Shifted,
    /// Both tails heavy, with an independent left ladder.
    TwoSided,
    /// `n^{1/2} σ₀ Z`.
    NormalBaseline,
    /// `n^ξ` times a draw from the one-sided stable limit.
    StableBaseline,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::FiniteVariance,
        Variant::Unified,
        Variant::SimplifiedSigmaTau,
        Variant::SimplifiedNoIntegral,
        Variant::Shifted,
        Variant::TwoSided,
        Variant::NormalBaseline,
        Variant::StableBaseline,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::FiniteVariance => "refined-finite-variance",
            Variant::Unified => "refined-unified",
            Variant::SimplifiedSigmaTau => "refined-sigma-tau",
            Variant::SimplifiedNoIntegral => "refined-no-integral",
            Variant::Shifted => "refined-shifted",
            Variant::TwoSided => "refined-two-sided",
            Variant::NormalBaseline => "normal-baseline",
            Variant::StableBaseline => "stable-baseline",
        }
    }

    /// Accepts the canonical names, with or without the `refined-` prefix.
    pub fn parse(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        let bare = trimmed.strip_prefix("refined-").unwrap_or(trimmed);
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == trimmed || v.name().strip_prefix("refined-") == Some(bare))
            .ok_or_else(|| config(format!("unknown variant '{trimmed}'")))
    }

    pub fn is_baseline(&self) -> bool {
        matches!(self, Variant::NormalBaseline | Variant::StableBaseline)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Output scale of a draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// The value on the scale of `S_n`.
    Sum,
    /// Multiplied by `a_n`, for comparison with `a_n S_n`.
    #[default]
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxConfig {
    pub n: u64,
    /// Retained upper order statistics; 0 for the baselines.
    pub k: usize,
    pub variant: Variant,
    pub scaling: Scaling,
}

impl ApproxConfig {
    pub fn new(n: u64, k: usize, variant: Variant) -> Result<Self> {
        let cfg = Self { n, k, variant, scaling: Scaling::Comparison };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(domain(format!("sum length n={} must be at least 2", self.n)));
        }
        if !self.variant.is_baseline() && !(self.k >= 1 && (self.k as u64) < self.n) {
            return Err(domain(format!("need 1 <= k < n, got k={} n={}", self.k, self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingTerms {
    pub a_n: f64,
    /// `(n/k)^ξ`.
    pub u_n: f64,
}

/// `a_n = (n ln n)^{-1/2}` at ξ = 1/2, otherwise `n^{-max(ξ, 1/2)}`.
pub fn scaling_a_n(n: f64, xi: f64) -> f64 {
    if xi == 0.5 {
        1.0 / (n * n.ln()).sqrt()
    } else {
        (-(xi.max(0.5)) * n.ln()).exp()
    }
}

pub fn scaling_terms(n: u64, k: usize, xi: f64) -> ScalingTerms {
    let nf = n as f64;
    ScalingTerms { a_n: scaling_a_n(nf, xi), u_n: (xi * (nf / k as f64).ln()).exp() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSidedConfig {
    pub right: TailParams,
    pub k_right: usize,
    pub left: TailParams,
    pub k_left: usize,
}

impl TwoSidedConfig {
    pub fn validate(&self, n: u64) -> Result<()> {
        self.right.require_theory_range()?;
        self.left.require_theory_range()?;
        for k in [self.k_right, self.k_left] {
            if !(k >= 1 && (k as u64) < n) {
                return Err(domain(format!("need 1 <= k < n on both tails, got k={k} n={n}")));
            }
        }
        Ok(())
    }
}

/// A single approximand value and whether the variance clamp bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub value: f64,
    pub clamped: bool,
}

/// Source of the bulk variance for the shifted approximand.
#[derive(Clone, Copy)]
pub enum ShiftedVariance<'a> {
    /// `σ²(ω(n/Γ_k)^ξ + κ)` from an accessor.
    Exact(&'a dyn TruncatedVariance),
    /// `σ²(ωu_n + κ)` plus the tail integral from `u_n` to `(n/Γ_k)^ξ`.
    Anchored { sigma_sq_at_un: f64 },
}

/// Source of `σ²(x, y)` for the two-sided approximand.
#[derive(Clone, Copy)]
pub enum TwoSidedVariance<'a> {
    Exact(&'a dyn DoublyTruncatedVariance),
    /// `σ²(ω_L v_n, ω_R u_n)` plus per-tail integrals (dropped for ξ > 1/2).
    Anchored {
        sigma_sq_at_anchor: f64,
    },
}

#[inline]
fn pow_ln(ln_base: f64, e: f64) -> f64 {
    (e * ln_base).exp()
}

fn check_ladder(ladder: &GammaLadder, k: usize) -> Result<()> {
    if ladder.len() != k {
        return Err(domain(format!("ladder has {} arrivals but k={k}", ladder.len())));
    }
    Ok(())
}

/// `n^ξ ω (Σ Γ_i^{-ξ} - Γ_k^{1-ξ}/(1-ξ))`.
#[inline]
fn extreme_part(n: u64, xi: f64, omega: f64, ladder: &GammaLadder) -> f64 {
    pow_ln((n as f64).ln(), xi) * omega * centered_partial_sum(ladder, xi)
}

#[inline]
fn bulk_part(n: u64, variance: f64, z: f64) -> (f64, bool) {
    let clamped = variance < 0.0;
    ((n as f64).sqrt() * variance.max(0.0).sqrt() * z, clamped)
}

/// `(n/Γ_k)^ξ`.
#[inline]
fn threshold_index(n: u64, xi: f64, gamma_k: f64) -> f64 {
    pow_ln((n as f64).ln() - gamma_k.ln(), xi)
}

fn unified_variance(n: u64, k: usize, params: &TailParams, sigma_sq_at_un: f64, gamma_k: f64) -> f64 {
    let u_n = scaling_terms(n, k, params.xi).u_n;
    let upper = threshold_index(n, params.xi, gamma_k);
    sigma_sq_at_un + variance_increment_unchecked(params.xi, params.omega, upper, u_n)
}

/// Finite-variance approximand, `ξ < 1/2`.
pub fn draw_finite_variance(
    cfg: &ApproxConfig,
    params: &TailParams,
    sigma0_sq: f64,
    ladder: &GammaLadder,
    z: f64,
) -> Result<Draw> {
    let xi = params.xi;
    if !(xi < 0.5) {
        return Err(unsupported(format!("finite-variance approximation needs xi < 1/2, got {xi}")));
    }
    check_ladder(ladder, cfg.k)?;
    let omega = params.omega;
    let ratio_ln = ladder.last().ln() - (cfg.n as f64).ln();
    let variance = sigma0_sq - omega * omega / (1.0 - 2.0 * xi) * pow_ln(ratio_ln, 1.0 - 2.0 * xi);
    let (bulk, clamped) = bulk_part(cfg.n, variance, z);
    Ok(Draw { value: extreme_part(cfg.n, xi, omega, ladder) + bulk, clamped })
}

/// Unified approximand driven by the truncated variance at `ωu_n`.
pub fn draw_unified(
    cfg: &ApproxConfig,
    params: &TailParams,
    sigma_sq_at_un: f64,
    ladder: &GammaLadder,
    z: f64,
) -> Result<Draw> {
    check_ladder(ladder, cfg.k)?;
    let variance = unified_variance(cfg.n, cfg.k, params, sigma_sq_at_un, ladder.last());
    let (bulk, clamped) = bulk_part(cfg.n, variance, z);
    Ok(Draw { value: extreme_part(cfg.n, params.xi, params.omega, ladder) + bulk, clamped })
}

/// Bulk variance evaluated exactly at the realized threshold `ω(n/Γ_k)^ξ`.
pub fn draw_simplified_sigma_tau(
    cfg: &ApproxConfig,
    params: &TailParams,
    variance: &dyn TruncatedVariance,
    ladder: &GammaLadder,
    z: f64,
) -> Result<Draw> {
    check_ladder(ladder, cfg.k)?;
    let t = params.omega * threshold_index(cfg.n, params.xi, ladder.last());
    let (bulk, clamped) = bulk_part(cfg.n, variance.truncated_variance(t), z);
    Ok(Draw { value: extreme_part(cfg.n, params.xi, params.omega, ladder) + bulk, clamped })
}

/// Unified approximand with the tail integral dropped.
pub fn draw_simplified_no_integral(
    cfg: &ApproxConfig,
    params: &TailParams,
    sigma_sq_at_un: f64,
    ladder: &GammaLadder,
    z: f64,
) -> Result<Draw> {
    check_ladder(ladder, cfg.k)?;
    let (bulk, clamped) = bulk_part(cfg.n, sigma_sq_at_un, z);
    Ok(Draw { value: extreme_part(cfg.n, params.xi, params.omega, ladder) + bulk, clamped })
}

/// Shifted-Pareto approximand:
/// `κ(k - Γ_k) + n^ξ ω (ΣΓ_i^{-ξ} - Γ_k^{1-ξ}/(1-ξ)) + n^{1/2} σ(ω(n/Γ_k)^ξ + κ) Z`.
pub fn draw_shifted(
    cfg: &ApproxConfig,
    params: &TailParams,
    variance: ShiftedVariance<'_>,
    ladder: &GammaLadder,
    z: f64,
) -> Result<Draw> {
    check_ladder(ladder, cfg.k)?;
    let gamma_k = ladder.last();
    let v = match variance {
        ShiftedVariance::Exact(acc) => {
            acc.truncated_variance(params.omega * threshold_index(cfg.n, params.xi, gamma_k) + params.kappa)
        }
        ShiftedVariance::Anchored { sigma_sq_at_un } => unified_variance(cfg.n, cfg.k, params, sigma_sq_at_un, gamma_k),
    };
    let (bulk, clamped) = bulk_part(cfg.n, v, z);
    let extreme = extreme_part(cfg.n, params.xi, params.omega, ladder);
    let value =
        if params.kappa == 0.0 { extreme + bulk } else { params.kappa * (cfg.k as f64 - gamma_k) + extreme + bulk };
    Ok(Draw { value, clamped })
}

/// Two-sided approximand with independent right (`Γ`) and left (`Υ`) ladders.
pub fn draw_two_sided(
    cfg: &TwoSidedConfig,
    n: u64,
    variance: TwoSidedVariance<'_>,
    right: &GammaLadder,
    left: &GammaLadder,
    z: f64,
) -> Result<Draw> {
    check_ladder(right, cfg.k_right)?;
    check_ladder(left, cfg.k_left)?;
    let (r, l) = (&cfg.right, &cfg.left);
    let v = match variance {
        TwoSidedVariance::Exact(acc) => {
            let x = l.omega * threshold_index(n, l.xi, left.last());
            let y = r.omega * threshold_index(n, r.xi, right.last());
            acc.doubly_truncated_variance(x, y)
        }
        TwoSidedVariance::Anchored { sigma_sq_at_anchor } => {
            let mut v = sigma_sq_at_anchor;
            for (p, k, ladder) in [(l, cfg.k_left, left), (r, cfg.k_right, right)] {
                if p.xi <= 0.5 {
                    let anchor = scaling_terms(n, k, p.xi).u_n;
                    v += variance_increment_unchecked(p.xi, p.omega, threshold_index(n, p.xi, ladder.last()), anchor);
                }
            }
            v
        }
    };
    let (bulk, clamped) = bulk_part(n, v, z);
    let value = extreme_part(n, r.xi, r.omega, right) - extreme_part(n, l.xi, l.omega, left) + bulk;
    Ok(Draw { value, clamped })
}

/// `n^{1/2} σ₀ z`.
pub fn normal_baseline_value(n: u64, sigma0_sq: f64, z: f64) -> f64 {
    (n as f64).sqrt() * sigma0_sq.sqrt() * z
}

/// Parameters of a baseline draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    Normal { sigma0_sq: f64 },
    Stable { xi: f64, omega: f64, truncation: usize },
}

/// One sum-scale baseline draw from `rng`, scaled by `a_n` if requested.
pub fn draw_baseline<R: Rng + ?Sized>(cfg: &ApproxConfig, baseline: Baseline, rng: &mut R) -> Result<f64> {
    let ln_n = (cfg.n as f64).ln();
    let (value, a_n) = match (cfg.variant, baseline) {
        (Variant::NormalBaseline, Baseline::Normal { sigma0_sq }) => {
            let z: f64 = StandardNormal.sample(rng);
            (normal_baseline_value(cfg.n, sigma0_sq, z), (-0.5 * ln_n).exp())
        }
        (Variant::StableBaseline, Baseline::Stable { xi, omega, truncation }) => {
            let s = crate::gamma_ladder::stable_limit_sample(xi, omega, truncation, rng)?;
            (pow_ln(ln_n, xi) * s, pow_ln(ln_n, -xi))
        }
        (v, b) => return Err(unsupported(format!("baseline {b:?} does not match variant {v}"))),
    };
    Ok(match cfg.scaling {
        Scaling::Sum => value,
        Scaling::Comparison => value * a_n,
    })
}

/// Options for building an [`Approximand`] from a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxOptions {
    /// Evaluate the shifted variance exactly (default) or by the anchored integral.
    pub shifted_exact: bool,
    /// Evaluate the two-sided variance exactly per draw instead of anchored.
    pub two_sided_exact: bool,
    pub stable_truncation: usize,
    /// Left-tail k for the two-sided variant; defaults to the right-tail k.
    pub k_left: Option<usize>,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self { shifted_exact: true, two_sided_exact: false, stable_truncation: DEFAULT_STABLE_TRUNCATION, k_left: None }
    }
}

#[derive(Clone)]
enum Plan {
    FiniteVariance { sigma0_sq: f64 },
    Unified { sigma_sq_at_un: f64 },
    SigmaTau { variance: Arc<dyn TruncatedVariance> },
    NoIntegral { sigma_sq_at_un: f64 },
    ShiftedExact { variance: Arc<dyn TruncatedVariance> },
    ShiftedAnchored { sigma_sq_at_un: f64 },
    TwoSidedExact { cfg: TwoSidedConfig, variance: Arc<dyn DoublyTruncatedVariance> },
    TwoSidedAnchored { cfg: TwoSidedConfig, sigma_sq_at_anchor: f64 },
    Normal { sigma0_sq: f64 },
    Stable { truncation: usize },
}

/// A fully resolved approximand: configuration, tail parameters and every
/// auxiliary input, ready to draw replicates.
#[derive(Clone)]
pub struct Approximand {
    cfg: ApproxConfig,
    params: TailParams,
    plan: Plan,
}

impl std::fmt::Debug for Approximand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Approximand").field("cfg", &self.cfg).field("params", &self.params).finish()
    }
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(unsupported(format!("{what} is infinite for this distribution")))
    }
}

impl Approximand {
    /// Resolves every auxiliary input (σ₀², σ²(ωu_n), κ, …) from a named distribution.
    pub fn from_spec(cfg: ApproxConfig, spec: &DistributionSpec, opts: ApproxOptions) -> Result<Self> {
        cfg.validate()?;
        let params = spec.params();
        params.require_theory_range()?;
        let sigma0 = spec.summary().sigma0_sq;
        let at_un = |shift: f64| -> Result<f64> {
            let u_n = scaling_terms(cfg.n, cfg.k, params.xi).u_n;
            finite(spec.truncated_variance(params.omega * u_n + shift), "the truncated variance")
        };
        let plan = match cfg.variant {
            Variant::FiniteVariance => {
                if !(params.xi < 0.5) {
                    return Err(unsupported("finite-variance approximation needs xi < 1/2"));
                }
                Plan::FiniteVariance { sigma0_sq: sigma0.ok_or_else(|| unsupported("variance is infinite"))? }
            }
            Variant::Unified => Plan::Unified { sigma_sq_at_un: at_un(0.0)? },
            Variant::SimplifiedSigmaTau => {
                at_un(0.0)?;
                Plan::SigmaTau { variance: Arc::new(*spec) }
            }
            Variant::SimplifiedNoIntegral => Plan::NoIntegral { sigma_sq_at_un: at_un(0.0)? },
            Variant::Shifted => {
                if opts.shifted_exact {
                    at_un(params.kappa)?;
                    Plan::ShiftedExact { variance: Arc::new(*spec) }
                } else {
                    Plan::ShiftedAnchored { sigma_sq_at_un: at_un(params.kappa)? }
                }
            }
            Variant::TwoSided => {
                if !matches!(spec.family(), Family::StudentT { .. }) {
                    return Err(unsupported(format!(
                        "two-sided approximation needs a heavy left tail; {} has a light one",
                        spec.family().name()
                    )));
                }
                // Symmetric family: the left tail mirrors the right.
                let ts = TwoSidedConfig {
                    right: params,
                    k_right: cfg.k,
                    left: params,
                    k_left: opts.k_left.unwrap_or(cfg.k),
                };
                ts.validate(cfg.n)?;
                if opts.two_sided_exact {
                    Plan::TwoSidedExact { cfg: ts, variance: Arc::new(*spec) }
                } else {
                    let v_n = ts.left.omega * scaling_terms(cfg.n, ts.k_left, ts.left.xi).u_n;
                    let u_n = ts.right.omega * scaling_terms(cfg.n, ts.k_right, ts.right.xi).u_n;
                    Plan::TwoSidedAnchored {
                        cfg: ts,
                        sigma_sq_at_anchor: spec.doubly_truncated_moments(-v_n, u_n)?.sigma_sq,
                    }
                }
            }
            Variant::NormalBaseline => {
                if !(params.xi < 0.5) {
                    return Err(unsupported("normal baseline needs xi < 1/2"));
                }
                Plan::Normal { sigma0_sq: sigma0.ok_or_else(|| unsupported("variance is infinite"))? }
            }
            Variant::StableBaseline => {
                if !(params.xi > 0.5) {
                    return Err(unsupported("stable baseline needs xi > 1/2"));
                }
                if opts.stable_truncation < 100 {
                    return Err(domain("stable truncation must be at least 100"));
                }
                Plan::Stable { truncation: opts.stable_truncation }
            }
        };
        Ok(Self { cfg, params, plan })
    }

    /// Unified approximand with a user-supplied `σ²(ωu_n)` (no distribution needed).
    pub fn unified(cfg: ApproxConfig, params: TailParams, sigma_sq_at_un: f64) -> Result<Self> {
        Self::manual(cfg, Variant::Unified, params, Plan::Unified { sigma_sq_at_un })
    }

    pub fn finite_variance(cfg: ApproxConfig, params: TailParams, sigma0_sq: f64) -> Result<Self> {
        if !(params.xi < 0.5) {
            return Err(unsupported("finite-variance approximation needs xi < 1/2"));
        }
        Self::manual(cfg, Variant::FiniteVariance, params, Plan::FiniteVariance { sigma0_sq })
    }

    pub fn no_integral(cfg: ApproxConfig, params: TailParams, sigma_sq_at_un: f64) -> Result<Self> {
        Self::manual(cfg, Variant::SimplifiedNoIntegral, params, Plan::NoIntegral { sigma_sq_at_un })
    }

    /// Shifted approximand with the anchored variance `σ²(ωu_n + κ)` supplied.
    pub fn shifted_anchored(cfg: ApproxConfig, params: TailParams, sigma_sq_at_un: f64) -> Result<Self> {
        Self::manual(cfg, Variant::Shifted, params, Plan::ShiftedAnchored { sigma_sq_at_un })
    }

    pub fn two_sided(cfg: ApproxConfig, ts: TwoSidedConfig, sigma_sq_at_anchor: f64) -> Result<Self> {
        ts.validate(cfg.n)?;
        Self::manual(cfg, Variant::TwoSided, ts.right, Plan::TwoSidedAnchored { cfg: ts, sigma_sq_at_anchor })
    }

    fn manual(cfg: ApproxConfig, expected: Variant, params: TailParams, plan: Plan) -> Result<Self> {
        if cfg.variant != expected {
            return Err(config(format!("config variant {} does not match {}", cfg.variant, expected)));
        }
        cfg.validate()?;
        params.require_theory_range()?;
        Ok(Self { cfg, params, plan })
    }

    pub fn config(&self) -> &ApproxConfig {
        &self.cfg
    }

    pub fn params(&self) -> &TailParams {
        &self.params
    }

    /// Multiplier applied to sum-scale values.
    pub fn output_scale(&self) -> f64 {
        match self.cfg.scaling {
            Scaling::Sum => 1.0,
            Scaling::Comparison => scaling_a_n(self.cfg.n as f64, self.params.xi),
        }
    }

    /// One replicate: ladder(s) first, then `Z`, all from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        let mut ladder = GammaLadder::with_capacity(self.cfg.k.max(1));
        let scale = self.output_scale();
        let cfg = &self.cfg;
        let p = &self.params;
        let result = match &self.plan {
            Plan::Normal { sigma0_sq } => {
                let z: f64 = StandardNormal.sample(rng);
                Ok(Draw { value: normal_baseline_value(cfg.n, *sigma0_sq, z), clamped: false })
            }
            Plan::Stable { truncation } => {
                ladder.refill(*truncation, rng);
                let s = stable_from_ladder(&ladder, p.xi, p.omega, rng);
                Ok(Draw { value: pow_ln((cfg.n as f64).ln(), p.xi) * s, clamped: false })
            }
            Plan::TwoSidedExact { cfg: ts, variance } => {
                let (right, left, z) = two_ladders(ts, rng);
                draw_two_sided(ts, cfg.n, TwoSidedVariance::Exact(variance.as_ref()), &right, &left, z)
            }
            Plan::TwoSidedAnchored { cfg: ts, sigma_sq_at_anchor } => {
                let (right, left, z) = two_ladders(ts, rng);
                let v = TwoSidedVariance::Anchored { sigma_sq_at_anchor: *sigma_sq_at_anchor };
                draw_two_sided(ts, cfg.n, v, &right, &left, z)
            }
            plan => {
                ladder.refill(cfg.k, rng);
                let z: f64 = StandardNormal.sample(rng);
                match plan {
                    Plan::FiniteVariance { sigma0_sq } => draw_finite_variance(cfg, p, *sigma0_sq, &ladder, z),
                    Plan::Unified { sigma_sq_at_un } => draw_unified(cfg, p, *sigma_sq_at_un, &ladder, z),
                    Plan::SigmaTau { variance } => draw_simplified_sigma_tau(cfg, p, variance.as_ref(), &ladder, z),
                    Plan::NoIntegral { sigma_sq_at_un } => {
                        draw_simplified_no_integral(cfg, p, *sigma_sq_at_un, &ladder, z)
                    }
                    Plan::ShiftedExact { variance } => {
                        draw_shifted(cfg, p, ShiftedVariance::Exact(variance.as_ref()), &ladder, z)
                    }
                    Plan::ShiftedAnchored { sigma_sq_at_un } => {
                        draw_shifted(cfg, p, ShiftedVariance::Anchored { sigma_sq_at_un: *sigma_sq_at_un }, &ladder, z)
                    }
                    _ => unreachable!("handled above"),
                }
            }
        };
        // Ladder lengths are fixed by construction, so the draw ops cannot fail here.
        let d = result.expect("approximand inputs validated at construction");
        Draw { value: d.value * scale, clamped: d.clamped }
    }
}

fn two_ladders<R: Rng + ?Sized>(ts: &TwoSidedConfig, rng: &mut R) -> (GammaLadder, GammaLadder, f64) {
    let mut right = GammaLadder::with_capacity(ts.k_right);
    right.refill(ts.k_right, rng);
    let mut left = GammaLadder::with_capacity(ts.k_left);
    left.refill(ts.k_left, rng);
    let z: f64 = StandardNormal.sample(rng);
    (right, left, z)
}

/// Replicate values plus the number of draws whose variance clamp bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub values: Vec<f64>,
    pub clamped: u64,
}

/// `reps` independent draws; replicate `r` uses stream `key.replicate(r)`.
pub fn sample_approx(approx: &Approximand, reps: u64, key: StreamKey, exec: Execution) -> Result<Ensemble> {
    if reps < 1 {
        return Err(domain("replicate count must be at least 1"));
    }
    let draws = map_replicates(reps, exec, |r| approx.draw(&mut key.replicate(r)))?;
    let clamped = draws.iter().filter(|d| d.clamped).count() as u64;
    let values: Vec<f64> = draws.into_iter().map(|d| d.value).collect();
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("approximand produced a non-finite value {bad}")));
    }
    Ok(Ensemble { values, clamped })
}

/// Writes an ensemble as CSV with header `replicate,value`.
pub fn write_ensemble_csv<W: std::io::Write>(out: W, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}
