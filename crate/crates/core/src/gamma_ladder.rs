//! Poisson arrival ladders `Γ_i = E_1 + … + E_i` and the centered LePage
//! sums built on them.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, unsupported, Result};
use crate::rng::exp1;
use crate::special::gamma_ratio;

/// Default ladder length for the stable-limit sampler.
pub const DEFAULT_STABLE_TRUNCATION: usize = 2_000;

/// Strictly increasing positive arrival times `Γ_1 < … < Γ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaLadder {
    gammas: Vec<f64>,
}

impl GammaLadder {
    /// Builds a ladder from exponential spacings.
    pub fn from_spacings(spacings: &[f64]) -> Result<Self> {
        if spacings.is_empty() {
            return Err(domain("ladder length must be at least 1"));
        }
        if let Some(bad) = spacings.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(domain(format!("ladder spacing {bad} is not a positive finite number")));
        }
        let gammas = spacings
            .iter()
            .scan(0.0, |acc, e| {
                *acc += e;
                Some(*acc)
            })
            .collect();
        Ok(Self { gammas })
    }

    /// Builds a ladder from explicit arrival times.
    pub fn from_arrivals(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(domain("ladder length must be at least 1"));
        }
        if !(gammas[0] > 0.0) || gammas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("ladder arrivals must be positive and strictly increasing"));
        }
        Ok(Self { gammas })
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// `Γ_k`, the last arrival.
    pub fn last(&self) -> f64 {
        *self.gammas.last().expect("ladder is non-empty")
    }

    /// `Σ_{i≤k} Γ_i^{-ξ}`.
    pub fn inverse_power_sum(&self, xi: f64) -> f64 {
        self.gammas.iter().map(|g| (-xi * g.ln()).exp()).sum()
    }

    /// Redraws the ladder in place with `k` fresh spacings.
    pub(crate) fn refill<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) {
        self.gammas.clear();
        let mut acc = 0.0;
        for _ in 0..k {
            acc += exp1(rng);
            self.gammas.push(acc);
        }
    }

    pub(crate) fn with_capacity(k: usize) -> Self {
        Self { gammas: Vec::with_capacity(k) }
    }
}

pub fn sample_ladder<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<GammaLadder> {
    if k < 1 {
        return Err(domain("ladder length must be at least 1"));
    }
    let mut ladder = GammaLadder::with_capacity(k);
    ladder.refill(k, rng);
    Ok(ladder)
}

/// `E[Γ_i^{-ξ}] = Γ(i-ξ)/Γ(i)`.
pub fn expected_inverse_power(i: usize, xi: f64) -> Result<f64> {
    if i < 1 {
        return Err(domain("ladder index must be at least 1"));
    }
    if !(xi < i as f64) {
        return Err(domain(format!("E[Γ_{i}^(-{xi})] diverges for xi >= i")));
    }
    Ok(gamma_ratio(i as f64, xi))
}

/// `Σ_{i≤k} Γ_i^{-ξ} - Γ_k^{1-ξ}/(1-ξ)`, a mean-zero, right-skewed variable.
pub fn centered_partial_sum(ladder: &GammaLadder, xi: f64) -> f64 {
    ladder.inverse_power_sum(xi) - ((1.0 - xi) * ladder.last().ln()).exp() / (1.0 - xi)
}

/// A draw from the one-sided stable limit of `n^{-ξ} S_n`, `1/2 < ξ < 1`.
///
/// The centered LePage sum is carried to `truncation` terms; the rest of the
/// compensated series, conditionally on `Γ_K = g`, has mean zero and variance
/// `g^{1-2ξ}/(2ξ-1)` and is added as a Gaussian.
pub fn stable_limit_sample<R: Rng + ?Sized>(xi: f64, omega: f64, truncation: usize, rng: &mut R) -> Result<f64> {
    if !(xi > 0.5 && xi < 1.0) {
        return Err(unsupported(format!("stable limit needs 1/2 < xi < 1, got {xi}")));
    }
    if truncation < 100 {
        return Err(domain(format!("stable truncation {truncation} is below the minimum of 100")));
    }
    let mut ladder = GammaLadder::with_capacity(truncation);
    ladder.refill(truncation, rng);
    Ok(stable_from_ladder(&ladder, xi, omega, rng))
}

pub(crate) fn stable_from_ladder<R: Rng + ?Sized>(ladder: &GammaLadder, xi: f64, omega: f64, rng: &mut R) -> f64 {
    let head = centered_partial_sum(ladder, xi);
    let remainder_var = ((1.0 - 2.0 * xi) * ladder.last().ln()).exp() / (2.0 * xi - 1.0);
    let z: f64 = StandardNormal.sample(rng);
    omega * (head + remainder_var.sqrt() * z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn ladder_is_cumulative_sum() {
        let l = GammaLadder::from_spacings(&[0.693]).unwrap();
        assert_eq!(l.gammas(), &[0.693]);
        let l = GammaLadder::from_spacings(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(l.gammas(), &[1.0, 2.0, 3.0]);
        assert!(GammaLadder::from_spacings(&[]).is_err());
        assert!(GammaLadder::from_arrivals(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn sample_ladder_rejects_zero_length() {
        let mut rng = StreamKey::new(0, 0).replicate(0);
        assert!(sample_ladder(0, &mut rng).is_err());
    }

    #[test]
    fn sampled_ladders_are_strictly_increasing() {
        let key = StreamKey::new(3, 9);
        for r in 0..2000 {
            let l = sample_ladder(50, &mut key.replicate(r)).unwrap();
            assert!(l.gammas()[0] > 0.0);
            assert!(l.gammas().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn expected_inverse_power_examples() {
        assert_eq!(expected_inverse_power(3, 0.0).unwrap(), 1.0);
        assert!((expected_inverse_power(1, 0.5).unwrap() - 1.772_453_850_905_516).abs() < 1e-14);
        assert!((expected_inverse_power(2, 0.5).unwrap() - 0.886_226_925_452_758).abs() < 1e-14);
        assert!(expected_inverse_power(1, 1.0).is_err());
        assert!(expected_inverse_power(0, 0.5).is_err());
    }

    #[test]
    fn centered_partial_sum_examples() {
        let l = GammaLadder::from_arrivals(vec![1.0]).unwrap();
        assert!((centered_partial_sum(&l, 0.4) - (1.0 - 1.0 / 0.6)).abs() < 1e-15);
        // ξ = 0 gives k - Γ_k
        let l = GammaLadder::from_arrivals(vec![1.0, 2.0]).unwrap();
        assert_eq!(centered_partial_sum(&l, 0.0), 0.0);
    }

    #[test]
    fn stable_sampler_contract() {
        let key = StreamKey::new(5, 1);
        let a = stable_limit_sample(0.7, 1.0, 500, &mut key.replicate(3)).unwrap();
        let b = stable_limit_sample(0.7, 1.0, 500, &mut key.replicate(3)).unwrap();
        assert_eq!(a, b);
        assert!(stable_limit_sample(0.5, 1.0, 500, &mut key.replicate(3)).is_err());
        assert!(stable_limit_sample(0.7, 1.0, 99, &mut key.replicate(3)).is_err());
    }
}
