//! Test-only oracles, written independently of the library code.
#![allow(dead_code)]

use statrs::function::gamma::{gamma, ln_gamma};

/// Double-exponential (tanh-sinh) quadrature on a finite interval, refined
/// by halving the step until successive estimates agree.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let pi2 = std::f64::consts::FRAC_PI_2;
    // Nodes at ±t sit a distance d from b and a respectively.
    let pair = |t: f64| {
        let u = pi2 * t.sinh();
        let c = u.cosh();
        let d = half / (u.exp() * c);
        let w = half * pi2 * t.cosh() / (c * c);
        if d > 0.0 {
            w * (f(b - d) + f(a + d))
        } else {
            0.0
        }
    };
    let tmax = 6.5;
    let mut h = 0.5;
    let mut sum = f(0.5 * (a + b)) * half * pi2;
    let mut k = 1;
    while k as f64 * h <= tmax {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..12 {
        h /= 2.0;
        let mut k = 1;
        while k as f64 * h <= tmax {
            sum += pair(k as f64 * h);
            k += 2;
        }
        let est = sum * h;
        if (est - prev).abs() <= 1e-15 * est.abs().max(1e-300) {
            return est;
        }
        prev = est;
    }
    prev
}

/// `∫_a^b f` split at a geometric ladder of points so that each piece has
/// bounded dynamic range.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut pts: Vec<f64> = std::iter::once(a).chain(breaks.iter().copied().filter(|&x| x > a && x < b)).collect();
    pts.push(b);
    let mut total = 0.0;
    let mut comp = 0.0;
    for w in pts.windows(2) {
        let v = tanh_sinh(&f, w[0], w[1]) - comp;
        let t = total + v;
        comp = (t - total) - v;
        total = t;
    }
    total
}

/// `∫_{-∞}^{b} f` via the map `x = b - s/(1 - s)` onto `[0, 1)` pieces.
pub fn integrate_to<F: Fn(f64) -> f64>(f: F, b: f64, breaks: &[f64]) -> f64 {
    // Finite part down to the lowest break, then a mapped tail.
    let lo = breaks.iter().copied().fold(b, f64::min) - 1.0;
    let finite = integrate(&f, lo, b, breaks);
    let tail = tanh_sinh(
        |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let x = lo - s / (1.0 - s);
            f(x) / ((1.0 - s) * (1.0 - s))
        },
        0.0,
        1.0,
    );
    finite + tail
}

#[derive(Debug, Clone, Copy)]
pub enum Family {
    CenteredPareto { xi: f64, omega: f64 },
    StudentT { nu: f64 },
    FrechetCentered { alpha: f64 },
}

impl Family {
    pub fn lower(&self) -> f64 {
        match *self {
            Family::CenteredPareto { xi, omega } => omega - omega / (1.0 - xi),
            Family::StudentT { .. } => f64::NEG_INFINITY,
            Family::FrechetCentered { alpha } => -gamma(1.0 - 1.0 / alpha),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Family::CenteredPareto { xi, omega } => {
                let y = x + omega / (1.0 - xi);
                if y < omega {
                    0.0
                } else {
                    (1.0 / xi) / omega * (y / omega).powf(-1.0 / xi - 1.0)
                }
            }
            Family::StudentT { nu } => {
                let c = (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp() / (nu * std::f64::consts::PI).sqrt();
                c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0)
            }
            Family::FrechetCentered { alpha } => {
                let y = x + gamma(1.0 - 1.0 / alpha);
                if y <= 0.0 {
                    0.0
                } else {
                    alpha * y.powf(-1.0 - alpha) * (-y.powf(-alpha)).exp()
                }
            }
        }
    }

    fn breaks(&self, t: f64) -> Vec<f64> {
        let lo = if self.lower().is_finite() { self.lower() } else { -1.0 };
        let mut b = vec![lo + 0.25, lo + 0.5, 0.0, 1.0];
        let mut x = 2.0;
        while x < t {
            b.push(x);
            x *= 2.0;
        }
        b.sort_by(f64::total_cmp);
        b
    }

    fn integral<G: Fn(f64) -> f64>(&self, g: G, t: f64) -> f64 {
        let f = |x: f64| g(x) * self.density(x);
        let br = self.breaks(t);
        if self.lower().is_finite() {
            integrate(f, self.lower(), t, &br)
        } else {
            integrate_to(f, t, &br)
        }
    }

    /// `∫_t^∞ g f`.
    fn upper_integral<G: Fn(f64) -> f64>(&self, g: G, t: f64) -> f64 {
        let f = |x: f64| g(x) * self.density(x);
        let top = 4.0 * t.max(1.0);
        let finite = integrate(f, t, top, &[]);
        let tail = tanh_sinh(
            |s: f64| {
                if s >= 1.0 {
                    return 0.0;
                }
                let x = top + s / (1.0 - s);
                f(x) / ((1.0 - s) * (1.0 - s))
            },
            0.0,
            1.0,
        );
        finite + tail
    }

    /// `(μ, σ², E|X-μ|³)` of `X | X ≤ t`, each from a separate quadrature.
    /// For `t > 0` the mass and mean come from the upper tail, using `E X = 0`.
    pub fn truncated(&self, t: f64) -> (f64, f64, f64) {
        let (mass, mu) = if t > 0.0 {
            let mass = 1.0 - self.upper_integral(|_| 1.0, t);
            (mass, -self.upper_integral(|x| x, t) / mass)
        } else {
            let mass = self.integral(|_| 1.0, t);
            (mass, self.integral(|x| x, t) / mass)
        };
        let var = self.integral(|x| (x - mu).powi(2), t) / mass;
        let abs3 = self.integral(|x| (x - mu).abs().powi(3), t) / mass;
        (mu, var, abs3)
    }
}

/// Neumaier-compensated sum.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = kahan_sum(xs.iter().copied()) / n;
    let v = kahan_sum(xs.iter().map(|x| (x - m).powi(2))) / (n - 1.0);
    (m, (v / n).sqrt())
}
