//! Heavy-tailed distributions with Pareto-like right tails.
//!
//! A [`DistributionSpec`] pairs a concrete sampleable family with the
//! [`TailParams`] `(ξ, ω, δ, x₀, κ)` describing its right tail: beyond `x₀`
//! the density is `(ωξ)^{-1}(x/ω)^{-1/ξ-1}(1 + h(x))` with
//! `|h(x)| ≲ x^{-δ/ξ}`, optionally after shifting by `κ`.
//!
//! Truncated moments `μ(t)`, `σ²(t)` of `X | X ≤ t` come from closed forms
//! where one exists and from adaptive quadrature otherwise; the tail
//! approximations `mu_tail_approx`, `sigma_sq_tail_approx` and
//! `variance_increment` depend on the tail parameters alone.

mod families;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, unsupported, Error, Result};
use crate::quadrature::integrate;
use families::{CenteredPareto, FrechetCentered, SplicedPareto, StudentTail};

/// Exponent cap used for δ of an exact (shifted) Pareto tail.
pub const SHIFTED_PARETO_DELTA: f64 = 10.0;

/// Bound on `|h(x)|` that defines the default tail onset `x₀`.
pub const X0_DEVIATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub xi: f64,
    pub omega: f64,
    pub delta: f64,
    pub x0: f64,
    #[serde(default)]
    pub kappa: f64,
}

impl TailParams {
    pub fn new(xi: f64, omega: f64, delta: f64, x0: f64) -> Result<Self> {
        let p = Self { xi, omega, delta, x0, kappa: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Structural checks. Distributions are accepted for any `ξ ∈ (0, 1)`;
    /// the refined approximations additionally call [`Self::require_theory_range`].
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(domain(format!("tail index xi={} must lie in (0, 1)", self.xi)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(domain(format!("tail scale omega={} must be positive", self.omega)));
        }
        if !(self.delta > 0.0) {
            return Err(domain(format!("delta={} must be positive", self.delta)));
        }
        if !(self.x0 > 0.0) {
            return Err(domain(format!("x0={} must be positive", self.x0)));
        }
        if !self.kappa.is_finite() {
            return Err(domain("kappa must be finite"));
        }
        Ok(())
    }

    /// The refined approximations and rate formulas cover `1/3 < ξ < 1` only.
    pub fn require_theory_range(&self) -> Result<()> {
        require_theory_xi(self.xi)
    }

    /// Density of the reference Pareto tail, `(ωξ)^{-1}(x/ω)^{-1/ξ-1}`.
    pub fn pareto_density(&self, x: f64) -> f64 {
        ((-1.0 / self.xi - 1.0) * (x / self.omega).ln()).exp() / (self.omega * self.xi)
    }
}

/// The sampleable families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Pareto(ω, 1/ξ) minus its mean.
    CenteredPareto,
    /// Standard Student-t; ξ = 1/ν.
    StudentT { nu: f64 },
    /// Standard Fréchet(α) minus its mean; ξ = 1/α.
    FrechetCentered { alpha: f64 },
    /// Uniform body spliced at `x₀` to an exact Pareto tail, mean zero.
    /// δ is not implied by the family and must be supplied.
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::CenteredPareto => "centered-pareto",
            Family::StudentT { .. } => "student-t",
            Family::FrechetCentered { .. } => "frechet-centered",
            Family::Custom => "custom",
        }
    }
}

/// How the tail of a shifted family is described: with κ = 0 (Condition-1
/// form, δ reduced by the shift) or around its shift κ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Treatment {
    Unshifted,
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub mu: f64,
    pub sigma_sq: f64,
    pub abs3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSummary {
    /// `None` when the variance is infinite (ξ ≥ 1/2).
    pub sigma0_sq: Option<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    family: Family,
    params: TailParams,
    // Resolved family object; keeps the sampling hot path branch-light.
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Pareto(CenteredPareto),
    Student(StudentTail),
    Frechet(FrechetCentered),
    Spliced(SplicedPareto),
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("tail index xi={xi} must lie in (0, 1)")))
    }
}

pub(crate) fn require_theory_xi(xi: f64) -> Result<()> {
    if xi > 1.0 / 3.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("tail index xi={xi} must lie in (1/3, 1)")))
    }
}

impl DistributionSpec {
    pub fn centered_pareto(xi: f64, omega: f64) -> Result<Self> {
        check_xi(xi)?;
        if !(omega > 0.0) {
            return Err(domain(format!("omega={omega} must be positive")));
        }
        let kind = Kind::Pareto(CenteredPareto { xi, omega });
        let kappa = -omega / (1.0 - xi);
        Self::assemble(Family::CenteredPareto, kind, xi, omega, xi, kappa)
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        check_xi(1.0 / nu)?;
        let st = StudentTail { nu };
        let xi = 1.0 / nu;
        Self::assemble(Family::StudentT { nu }, Kind::Student(st), xi, st.omega(), 2.0 * xi, 0.0)
    }

    pub fn frechet_centered(alpha: f64) -> Result<Self> {
        check_xi(1.0 / alpha)?;
        let fr = FrechetCentered { alpha };
        Self::assemble(Family::FrechetCentered { alpha }, Kind::Frechet(fr), 1.0 / alpha, 1.0, 1.0, -fr.shift())
    }

    /// Mean-zero uniform body on `[b, x0]` with an exact Pareto(ω, 1/ξ) tail above `x0`.
    pub fn custom(xi: f64, omega: f64, delta: f64, x0: f64) -> Result<Self> {
        check_xi(xi)?;
        if !(x0 > omega) {
            return Err(domain(format!("custom family needs x0={x0} above omega={omega}")));
        }
        let params = TailParams::new(xi, omega, delta, x0)?;
        Ok(Self { family: Family::Custom, params, kind: Kind::Spliced(SplicedPareto { xi, omega, x0 }) })
    }

    fn assemble(family: Family, kind: Kind, xi: f64, omega: f64, delta: f64, kappa: f64) -> Result<Self> {
        let mut spec = Self { family, params: TailParams { xi, omega, delta, x0: 1.0, kappa }, kind };
        spec.params.x0 = spec.default_x0()?;
        spec.params.validate()?;
        Ok(spec)
    }

    /// Overrides δ (e.g. a user-supplied neighbourhood exponent).
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.params.delta = delta;
        self.params.validate()?;
        Ok(self)
    }

    pub fn with_x0(mut self, x0: f64) -> Result<Self> {
        self.params.x0 = x0;
        self.params.validate()?;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        self.params.kappa = kappa;
        self.params.validate()?;
        Ok(self)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> TailParams {
        self.params
    }

    pub fn support_lower(&self) -> f64 {
        match self.kind {
            Kind::Pareto(p) => p.lower(),
            Kind::Student(_) => f64::NEG_INFINITY,
            Kind::Frechet(f) => -f.shift(),
            Kind::Spliced(s) => s.body_lower(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match self.kind {
            Kind::Pareto(p) => p.cdf(x),
            Kind::Student(s) => s.cdf(x),
            Kind::Frechet(f) => f.cdf(x),
            Kind::Spliced(s) => s.cdf(x),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Pareto(p) => p.density(x),
            Kind::Student(s) => s.density(x),
            Kind::Frechet(f) => f.density(x),
            Kind::Spliced(s) => s.density(x),
        }
    }

    /// Points where the density is not smooth, for splitting integrals.
    fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            Kind::Pareto(p) => vec![p.lower()],
            Kind::Student(_) => vec![0.0],
            Kind::Frechet(f) => vec![-f.shift()],
            Kind::Spliced(s) => vec![s.body_lower(), s.x0],
        }
    }

    /// `h(x) = f(x) / pareto(x) - 1`, the relative deviation from the
    /// reference Pareto tail (ignoring κ).
    pub fn tail_deviation(&self, x: f64) -> f64 {
        self.density(x) / self.params.pareto_density(x) - 1.0
    }

    /// Smallest point of a geometric grid beyond which `|h| ≤ 0.5`, refined
    /// by bisection.
    fn default_x0(&self) -> Result<f64> {
        if let Kind::Spliced(s) = self.kind {
            return Ok(s.x0);
        }
        let bad = |x: f64| !(self.tail_deviation(x).abs() <= X0_DEVIATION);
        let mut hi = 1e8;
        if bad(hi) {
            return Err(Error::Numeric(format!("{} tail never enters the |h| <= 0.5 band", self.family.name())));
        }
        let mut lo = hi;
        while !bad(lo) {
            hi = lo;
            lo /= 1.25;
            if lo < 1e-6 {
                return Ok(hi);
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if bad(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    pub fn summary(&self) -> DistributionSummary {
        let sigma0_sq = match self.kind {
            Kind::Pareto(p) => p.sigma0_sq(),
            Kind::Student(s) => s.sigma0_sq(),
            Kind::Frechet(f) => f.sigma0_sq(),
            Kind::Spliced(s) => s.sigma0_sq(),
        };
        DistributionSummary { sigma0_sq, mean: 0.0 }
    }

    /// One draw from F.
    #[inline]
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            Kind::Pareto(p) => p.sample(rng),
            Kind::Student(s) => s.sampler().sample(rng),
            Kind::Frechet(f) => f.sample(rng),
            Kind::Spliced(s) => s.sample(rng),
        }
    }

    /// Sum of `count` i.i.d. draws.
    pub fn sample_sum<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> f64 {
        match self.kind {
            Kind::Pareto(p) => (0..count).map(|_| p.sample(rng)).sum(),
            Kind::Student(s) => {
                let d = s.sampler();
                (0..count).map(|_| d.sample(rng)).sum()
            }
            Kind::Frechet(f) => (0..count).map(|_| f.sample(rng)).sum(),
            Kind::Spliced(s) => (0..count).map(|_| s.sample(rng)).sum(),
        }
    }

    /// Moments of `X | X ≤ t`.
    pub fn truncated_moments(&self, t: f64) -> Result<TruncatedMoments> {
        if t.is_nan() {
            return Err(domain("truncation point is NaN"));
        }
        match self.kind {
            Kind::Pareto(p) => p.truncated(t),
            Kind::Student(s) => s.truncated(t),
            Kind::Frechet(f) => f.truncated(t),
            Kind::Spliced(s) => s.truncated(t),
        }
    }

    /// Moments of `X | lower ≤ X ≤ upper`, by quadrature.
    pub fn doubly_truncated_moments(&self, lower: f64, upper: f64) -> Result<TruncatedMoments> {
        if !(lower < upper) {
            return Err(domain(format!("empty truncation window [{lower}, {upper}]")));
        }
        let lo = lower.max(self.support_lower());
        if !(lo < upper) {
            return Err(domain("truncation window lies below the support"));
        }
        let mut cuts: Vec<f64> = self.breakpoints().into_iter().filter(|&c| c > lo && c < upper).collect();
        cuts.push(lo);
        cuts.push(upper);
        cuts.sort_by(f64::total_cmp);
        let piecewise = |g: &dyn Fn(f64) -> f64, cuts: &[f64]| -> Result<f64> {
            let mut acc = 0.0;
            for w in cuts.windows(2) {
                acc += integrate(g, w[0], w[1], 1e-10, 1e-300)?.value;
            }
            Ok(acc)
        };
        let mass = piecewise(&|x| self.density(x), &cuts)?;
        if !(mass > 0.0) {
            return Err(domain("truncation window has zero probability"));
        }
        let mu = piecewise(&|x| x * self.density(x), &cuts)? / mass;
        let sigma_sq = piecewise(&|x| (x - mu) * (x - mu) * self.density(x), &cuts)? / mass;
        let mut cuts3 = cuts.clone();
        if mu > lo && mu < upper {
            cuts3.push(mu);
            cuts3.sort_by(f64::total_cmp);
        }
        let abs3 = piecewise(&|x| (x - mu).abs().powi(3) * self.density(x), &cuts3)? / mass;
        Ok(TruncatedMoments { mu, sigma_sq, abs3 })
    }
}

/// Truncated-variance accessor `t ↦ σ²(t)` used by the refined approximations.
/// Returns 0 when `t` lies at or below the support.
pub trait TruncatedVariance: Send + Sync {
    fn truncated_variance(&self, t: f64) -> f64;
}

impl TruncatedVariance for DistributionSpec {
    fn truncated_variance(&self, t: f64) -> f64 {
        self.truncated_moments(t).map(|m| m.sigma_sq).unwrap_or(0.0)
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> TruncatedVariance for F {
    fn truncated_variance(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Doubly-truncated variance `σ²(x, y) = Var(X | -x ≤ X ≤ y)`.
pub trait DoublyTruncatedVariance: Send + Sync {
    fn doubly_truncated_variance(&self, left: f64, right: f64) -> f64;
}

impl DoublyTruncatedVariance for DistributionSpec {
    fn doubly_truncated_variance(&self, left: f64, right: f64) -> f64 {
        self.doubly_truncated_moments(-left, right).map(|m| m.sigma_sq).unwrap_or(0.0)
    }
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> DoublyTruncatedVariance for F {
    fn doubly_truncated_variance(&self, left: f64, right: f64) -> f64 {
        self(left, right)
    }
}

pub fn cdf(spec: &DistributionSpec, x: f64) -> f64 {
    spec.cdf(x)
}

pub fn sample_iid<R: Rng + ?Sized>(spec: &DistributionSpec, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(domain("sample count must be at least 1"));
    }
    Ok((0..count).map(|_| spec.sample_one(rng)).collect())
}

pub fn truncated_moments(spec: &DistributionSpec, t: f64) -> Result<TruncatedMoments> {
    spec.truncated_moments(t)
}

/// Tail approximation of the truncated mean of a mean-zero F,
/// `-ω^{1/ξ} x^{1-1/ξ} / ((1-ξ)(1-(x/ω)^{-1/ξ}))`.
pub fn mu_tail_approx(params: &TailParams, x: f64) -> Result<f64> {
    if !(x >= params.x0) {
        return Err(domain(format!("x={x} is below the tail onset x0={}", params.x0)));
    }
    if !(x > params.omega) {
        return Err(domain(format!("x={x} must exceed omega={}", params.omega)));
    }
    let xi = params.xi;
    let lx = (x / params.omega).ln();
    // ω^{1/ξ} x^{1-1/ξ} = x (x/ω)^{-1/ξ}
    let surv = (-lx / xi).exp();
    let below = -(-lx / xi).exp_m1();
    Ok(-x * surv / ((1.0 - xi) * below))
}

/// `σ₀² - ω^{1/ξ} x^{2-1/ξ} / (1-2ξ)`, unclamped.
pub fn sigma_sq_tail_approx(params: &TailParams, sigma0_sq: f64, x: f64) -> Result<f64> {
    let xi = params.xi;
    if !(xi < 0.5) {
        return Err(unsupported(format!("finite-variance tail approximation needs xi < 1/2, got {xi}")));
    }
    if !(x >= params.x0) {
        return Err(domain(format!("x={x} is below the tail onset x0={}", params.x0)));
    }
    let surv = (-(x / params.omega).ln() / xi).exp();
    Ok(sigma0_sq - x * x * surv / (1.0 - 2.0 * xi))
}

/// `(ω²/ξ) ∫_y^x t^{1-1/ξ} dt`, the approximate change `σ²(ωx) - σ²(ωy)`.
pub fn variance_increment(params: &TailParams, x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(domain(format!("variance increment needs positive endpoints, got ({x}, {y})")));
    }
    Ok(variance_increment_unchecked(params.xi, params.omega, x, y))
}

pub(crate) fn variance_increment_unchecked(xi: f64, omega: f64, x: f64, y: f64) -> f64 {
    let coeff = omega * omega / xi;
    let e = 2.0 - 1.0 / xi;
    if x == y {
        return 0.0;
    }
    // Ordered so that swapping x and y flips the sign exactly.
    let (hi, lo, sign) = if x > y { (x, y, 1.0) } else { (y, x, -1.0) };
    if e.abs() < 1e-12 {
        return sign * coeff * (hi / lo).ln();
    }
    // (hi^e - lo^e)/e without cancellation.
    let lo_e = (e * lo.ln()).exp();
    sign * coeff * lo_e * (e * (hi / lo).ln()).exp_m1() / e
}

/// Neighbourhood exponent δ implied by a named family.
pub fn default_delta(spec: &DistributionSpec, treatment: Treatment) -> Result<f64> {
    let xi = spec.params.xi;
    match (spec.family, treatment) {
        (Family::StudentT { .. }, _) => Ok(2.0 * xi),
        (Family::FrechetCentered { .. }, _) => Ok(1.0),
        (Family::CenteredPareto, Treatment::Unshifted) => Ok(xi),
        (Family::CenteredPareto, Treatment::Shifted) => Ok(SHIFTED_PARETO_DELTA),
        (Family::Custom, _) => Err(config("custom family has no implied delta; supply one")),
    }
}

/// Wire form `{family, xi, omega, delta, x0, kappa, extra}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpecJson {
    pub family: String,
    pub xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub extra: FamilyExtra,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyExtra {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

fn agrees(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

impl TryFrom<DistributionSpecJson> for DistributionSpec {
    type Error = Error;

    fn try_from(j: DistributionSpecJson) -> Result<Self> {
        let implied = |name: &str, given: Option<f64>, value: f64| -> Result<()> {
            match given {
                Some(g) if !agrees(g, value) => {
                    Err(config(format!("{name}={g} conflicts with the value {value} implied by family {}", j.family)))
                }
                _ => Ok(()),
            }
        };
        let mut spec = match j.family.as_str() {
            "centered-pareto" => DistributionSpec::centered_pareto(j.xi, j.omega.unwrap_or(1.0))?,
            "student-t" => {
                let nu = 1.0 / j.xi;
                implied("extra.nu", j.extra.nu, nu)?;
                let s = DistributionSpec::student_t(nu)?;
                implied("omega", j.omega, s.params.omega)?;
                s
            }
            "frechet-centered" => {
                let alpha = 1.0 / j.xi;
                implied("extra.alpha", j.extra.alpha, alpha)?;
                let s = DistributionSpec::frechet_centered(alpha)?;
                implied("omega", j.omega, 1.0)?;
                s
            }
            "custom" => {
                let delta = j.delta.ok_or_else(|| config("custom family requires delta"))?;
                let x0 = j.x0.ok_or_else(|| config("custom family requires x0"))?;
                DistributionSpec::custom(j.xi, j.omega.unwrap_or(1.0), delta, x0)?
            }
            other => return Err(config(format!("unknown family '{other}'"))),
        };
        if let Some(d) = j.delta {
            spec = spec.with_delta(d)?;
        }
        if let Some(x0) = j.x0 {
            if spec.family != Family::Custom {
                spec = spec.with_x0(x0)?;
            }
        }
        if let Some(k) = j.kappa {
            spec = spec.with_kappa(k)?;
        }
        Ok(spec)
    }
}

impl From<&DistributionSpec> for DistributionSpecJson {
    fn from(s: &DistributionSpec) -> Self {
        let p = s.params;
        let extra = match s.family {
            Family::StudentT { nu } => FamilyExtra { nu: Some(nu), alpha: None },
            Family::FrechetCentered { alpha } => FamilyExtra { nu: None, alpha: Some(alpha) },
            _ => FamilyExtra::default(),
        };
        Self {
            family: s.family.name().to_string(),
            xi: p.xi,
            omega: Some(p.omega),
            delta: Some(p.delta),
            x0: Some(p.x0),
            kappa: Some(p.kappa),
            extra,
        }
    }
}

impl Serialize for DistributionSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DistributionSpecJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let j = DistributionSpecJson::deserialize(deserializer)?;
        DistributionSpec::try_from(j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests;
