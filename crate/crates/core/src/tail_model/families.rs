//! Closed-form distribution functions and truncated moments per family.

use rand::Rng;
use rand_distr::StudentT;

use super::TruncatedMoments;
use crate::error::{domain, Result};
use crate::quadrature::integrate;
use crate::rng::{exp1, open01};
use crate::special::{gamma_fn, lower_incomplete_gamma, student_t_cdf, student_t_norm, upper_incomplete_gamma};

const QUAD_REL_TOL: f64 = 1e-10;

/// Pareto(scale ω, index 1/ξ) shifted by its mean `ω/(1-ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CenteredPareto {
    pub xi: f64,
    pub omega: f64,
}

impl CenteredPareto {
    pub fn shift(&self) -> f64 {
        self.omega / (1.0 - self.xi)
    }

    pub fn lower(&self) -> f64 {
        self.omega - self.shift()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let q = (x + self.shift()) / self.omega;
        if q <= 1.0 {
            0.0
        } else {
            -(-q.ln() / self.xi).exp_m1()
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let q = (x + self.shift()) / self.omega;
        if q < 1.0 {
            0.0
        } else {
            ((-1.0 / self.xi - 1.0) * q.ln()).exp() / (self.omega * self.xi)
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.omega * (-self.xi * open01(rng).ln()).exp() - self.shift()
    }

    pub fn sigma0_sq(&self) -> Option<f64> {
        let xi = self.xi;
        (xi < 0.5).then(|| xi * xi * self.omega * self.omega / ((1.0 - xi).powi(2) * (1.0 - 2.0 * xi)))
    }

    pub fn truncated(&self, t: f64) -> Result<TruncatedMoments> {
        let xi = self.xi;
        let alpha = 1.0 / xi;
        let q = (t + self.shift()) / self.omega;
        if !(q > 1.0) {
            return Err(domain(format!("truncation point {t} is at or below the support edge {}", self.lower())));
        }
        if q.is_infinite() {
            return Ok(TruncatedMoments {
                mu: 0.0,
                sigma_sq: self.sigma0_sq().unwrap_or(f64::INFINITY),
                abs3: f64::INFINITY,
            });
        }
        let lq = q.ln();
        let surv = (-alpha * lq).exp();
        let mass = -(-alpha * lq).exp_m1();
        // ∫_1^q α r^{j-α-1} dr
        let partial = |j: f64, lo: f64, hi: f64| -> f64 {
            let e = j - alpha;
            if e.abs() < 1e-12 {
                alpha * (hi / lo).ln()
            } else {
                alpha * (hi.powf(e) - lo.powf(e)) / e
            }
        };
        let mu = -self.omega * surv * (q - 1.0) / ((1.0 - xi) * mass);
        let m1 = partial(1.0, 1.0, q) / mass;
        let m2 = partial(2.0, 1.0, q) / mass;
        let var_r = (m2 - m1 * m1).max(0.0);
        // E|r - c|^3 over [1, q], split at the conditional mean c.
        let c = m1.clamp(1.0, q);
        let cubic = |lo: f64, hi: f64| -> f64 {
            partial(3.0, lo, hi) - 3.0 * c * partial(2.0, lo, hi) + 3.0 * c * c * partial(1.0, lo, hi)
                - c * c * c * partial(0.0, lo, hi)
        };
        let abs3_r = ((cubic(c, q) - cubic(1.0, c)) / mass).max(0.0);
        Ok(TruncatedMoments { mu, sigma_sq: self.omega * self.omega * var_r, abs3: self.omega.powi(3) * abs3_r })
    }
}

/// Standard Student-t with `nu` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StudentTail {
    pub nu: f64,
}

impl StudentTail {
    /// Scale ω of the Pareto tail: `1 - F(x) ~ ω^ν x^{-ν}`.
    pub fn omega(&self) -> f64 {
        let nu = self.nu;
        (student_t_norm(nu) * nu.powf((nu - 1.0) / 2.0)).powf(1.0 / nu)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        student_t_cdf(x, self.nu)
    }

    pub fn density(&self, x: f64) -> f64 {
        let nu = self.nu;
        student_t_norm(nu) * (-(nu + 1.0) / 2.0 * (x * x / nu).ln_1p()).exp()
    }

    pub fn sigma0_sq(&self) -> Option<f64> {
        (self.nu > 2.0).then(|| self.nu / (self.nu - 2.0))
    }

    pub fn sampler(&self) -> StudentT<f64> {
        StudentT::new(self.nu).expect("nu validated positive")
    }

    pub fn truncated(&self, t: f64) -> Result<TruncatedMoments> {
        let nu = self.nu;
        if t.is_infinite() && t > 0.0 {
            return Ok(TruncatedMoments {
                mu: 0.0,
                sigma_sq: self.sigma0_sq().unwrap_or(f64::INFINITY),
                abs3: f64::INFINITY,
            });
        }
        let mass = self.cdf(t);
        if !(mass > 0.0) {
            return Err(domain(format!("truncation point {t} has zero probability below it")));
        }
        let k = student_t_norm(nu);
        let first = -k * nu / (nu - 1.0) * (-(nu - 1.0) / 2.0 * (t * t / nu).ln_1p()).exp();
        let mu = first / mass;
        let sigma_sq = if nu > 2.0 {
            let rescale = ((nu - 2.0) / nu).sqrt();
            let g = k / student_t_norm(nu - 2.0) / rescale * student_t_cdf(t * rescale, nu - 2.0);
            let second = nu * (g - mass);
            second / mass - mu * mu
        } else {
            f64::INFINITY
        };
        let abs3 = if nu > 3.0 {
            let f = |x: f64| (x - mu).abs().powi(3) * self.density(x);
            let lo = integrate(f, f64::NEG_INFINITY, mu.min(t), QUAD_REL_TOL, 0.0)?.value;
            let hi = if t > mu { integrate(f, mu, t, QUAD_REL_TOL, 0.0)?.value } else { 0.0 };
            (lo + hi) / mass
        } else {
            f64::INFINITY
        };
        Ok(TruncatedMoments { mu, sigma_sq, abs3 })
    }
}

/// Standard Fréchet(α) shifted by its mean `Γ(1 - 1/α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FrechetCentered {
    pub alpha: f64,
}

impl FrechetCentered {
    pub fn shift(&self) -> f64 {
        gamma_fn(1.0 - 1.0 / self.alpha)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s = x + self.shift();
        if s <= 0.0 {
            0.0
        } else {
            (-s.powf(-self.alpha)).exp()
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let s = x + self.shift();
        if s <= 0.0 {
            return 0.0;
        }
        let w = s.powf(-self.alpha);
        self.alpha * w / s * (-w).exp()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (-exp1(rng).ln() / self.alpha).exp() - self.shift()
    }

    pub fn sigma0_sq(&self) -> Option<f64> {
        let xi = 1.0 / self.alpha;
        (xi < 0.5).then(|| gamma_fn(1.0 - 2.0 * xi) - gamma_fn(1.0 - xi).powi(2))
    }

    pub fn truncated(&self, t: f64) -> Result<TruncatedMoments> {
        let xi = 1.0 / self.alpha;
        let m = self.shift();
        if t.is_infinite() && t > 0.0 {
            return Ok(TruncatedMoments {
                mu: 0.0,
                sigma_sq: self.sigma0_sq().unwrap_or(f64::INFINITY),
                abs3: f64::INFINITY,
            });
        }
        let s = t + m;
        if !(s > 0.0) {
            return Err(domain(format!("truncation point {t} is at or below the support edge {}", -m)));
        }
        // Y = W^{-ξ} with W ~ Exp(1); {Y ≤ s} = {W ≥ w}.
        let w = s.powf(-self.alpha);
        let mass = (-w).exp();
        if !(mass > 0.0) {
            return Err(domain(format!("truncation point {t} has zero probability below it")));
        }
        let body_first = upper_incomplete_gamma(1.0 - xi, w);
        // The tail form cancels when little mass lies below t; the body form when most does.
        let mu = if mass < 0.5 {
            body_first / mass - m
        } else {
            let upper_tail_mass = -(-w).exp_m1();
            -(lower_incomplete_gamma(1.0 - xi, w) - m * upper_tail_mass) / mass
        };
        let body_second = if xi < 0.5 {
            upper_incomplete_gamma(1.0 - 2.0 * xi, w)
        } else {
            let fy = |y: f64| {
                if y <= 0.0 {
                    return 0.0;
                }
                let v = y.powf(-self.alpha);
                y * y * self.alpha * v / y * (-v).exp()
            };
            integrate(fy, 0.0, s, QUAD_REL_TOL, 0.0)?.value
        };
        let mean_y = body_first / mass;
        let mut sigma_sq = (body_second / mass - mean_y * mean_y).max(0.0);
        let lo = -m;
        let split = mu.clamp(lo, t);
        if sigma_sq < 1e-4 * mean_y * mean_y {
            // Nearly degenerate near the support edge; the moment difference has cancelled.
            let g = |x: f64| (x - mu).powi(2) * self.density(x);
            sigma_sq = (integrate(g, lo, split, QUAD_REL_TOL, 0.0)?.value
                + integrate(g, split, t, QUAD_REL_TOL, 0.0)?.value)
                / mass;
        }
        let f = |x: f64| (x - mu).abs().powi(3) * self.density(x);
        let abs3 = (integrate(f, lo, split, QUAD_REL_TOL, 0.0)?.value
            + integrate(f, split, t, QUAD_REL_TOL, 0.0)?.value)
            / mass;
        Ok(TruncatedMoments { mu, sigma_sq, abs3 })
    }
}

/// Uniform body on `[b, x0]` spliced to an exact Pareto tail beyond `x0`,
/// with `b` chosen so the mean is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplicedPareto {
    pub xi: f64,
    pub omega: f64,
    pub x0: f64,
}

impl SplicedPareto {
    pub fn tail_mass(&self) -> f64 {
        (self.x0 / self.omega).powf(-1.0 / self.xi)
    }

    pub fn body_lower(&self) -> f64 {
        let p = self.tail_mass();
        -self.x0 - 2.0 * p * self.x0 / ((1.0 - self.xi) * (1.0 - p))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let b = self.body_lower();
        let p = self.tail_mass();
        if x <= b {
            0.0
        } else if x <= self.x0 {
            (1.0 - p) * (x - b) / (self.x0 - b)
        } else {
            1.0 - (x / self.omega).powf(-1.0 / self.xi)
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let b = self.body_lower();
        if x < b {
            0.0
        } else if x <= self.x0 {
            (1.0 - self.tail_mass()) / (self.x0 - b)
        } else {
            (x / self.omega).powf(-1.0 / self.xi - 1.0) / (self.omega * self.xi)
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open01(rng);
        let v = open01(rng);
        if u < self.tail_mass() {
            self.x0 * (-self.xi * v.ln()).exp()
        } else {
            let b = self.body_lower();
            b + (self.x0 - b) * v
        }
    }

    /// `E[X^2; X <= t]` for `t >= x0`.
    fn second_moment_below(&self, t: f64) -> f64 {
        let b = self.body_lower();
        let p = self.tail_mass();
        let alpha = 1.0 / self.xi;
        let body = (1.0 - p) * (b * b + b * self.x0 + self.x0 * self.x0) / 3.0;
        let scale = alpha * self.omega.powf(alpha);
        let tail = if t.is_infinite() {
            scale * self.x0.powf(2.0 - alpha) / (alpha - 2.0)
        } else if (alpha - 2.0).abs() < 1e-12 {
            scale * (t / self.x0).ln()
        } else {
            scale * (t.powf(2.0 - alpha) - self.x0.powf(2.0 - alpha)) / (2.0 - alpha)
        };
        body + tail
    }

    pub fn sigma0_sq(&self) -> Option<f64> {
        (self.xi < 0.5).then(|| self.second_moment_below(f64::INFINITY))
    }

    pub fn truncated(&self, t: f64) -> Result<TruncatedMoments> {
        let b = self.body_lower();
        if !(t > b) {
            return Err(domain(format!("truncation point {t} is at or below the support edge {b}")));
        }
        if t <= self.x0 {
            let w = t - b;
            return Ok(TruncatedMoments { mu: 0.5 * (b + t), sigma_sq: w * w / 12.0, abs3: w * w * w / 32.0 });
        }
        if t.is_infinite() {
            return Ok(TruncatedMoments {
                mu: 0.0,
                sigma_sq: self.sigma0_sq().unwrap_or(f64::INFINITY),
                abs3: f64::INFINITY,
            });
        }
        let surv = (t / self.omega).powf(-1.0 / self.xi);
        let mass = 1.0 - surv;
        let mu = -surv * t / ((1.0 - self.xi) * mass);
        let sigma_sq = self.second_moment_below(t) / mass - mu * mu;
        let f = |x: f64| (x - mu).abs().powi(3) * self.density(x);
        let mut abs3 = 0.0;
        let mut cuts = vec![b, self.x0, t];
        if mu > b && mu < t {
            cuts.push(mu);
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            abs3 += integrate(f, w[0], w[1], QUAD_REL_TOL, 0.0)?.value;
        }
        Ok(TruncatedMoments { mu, sigma_sq, abs3: abs3 / mass })
    }
}
