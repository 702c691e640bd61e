//! Monte Carlo ground truth and Kolmogorov-distance comparisons.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{config, domain, Error, Result};
use crate::error_rates::{k_rate_optimal, k_star, rate_bound};
use crate::par::{map_replicates, Execution};
use crate::refined_approx::{sample_approx, scaling_a_n, ApproxConfig, ApproxOptions, Approximand, Variant};
use crate::rng::StreamKey;
use crate::tail_model::DistributionSpec;

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_BUDGET: u128 = 10_000_000_000;

/// Sorted sample with its step-function CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("empirical CDF needs at least one value"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Numeric("empirical CDF input contains NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// Fraction of the sample `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.values.partition_point(|v| *v <= x) as f64 / self.count() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Sum of the one-sample DKW margins of both samples; with probability at
    /// least the confidence level on each side, `|KS - true distance|` is below it.
    pub dkw_margin: f64,
    pub reps_a: usize,
    pub reps_b: usize,
}

impl KsResult {
    /// Statistic is within three margins of zero.
    pub fn noise_limited(&self) -> bool {
        self.statistic < 3.0 * self.dkw_margin
    }
}

/// `sqrt(ln(2/(1-confidence)) / (2·reps))`.
pub fn dkw_margin(reps: usize, confidence: f64) -> Result<f64> {
    if reps < 1 {
        return Err(domain("DKW margin needs at least one replicate"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(domain(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    Ok(((2.0 / (1.0 - confidence)).ln() / (2.0 * reps as f64)).sqrt())
}

/// Exact `sup |F̂_a - F̂_b|` over the pooled jump points, margins at 99%.
pub fn ks_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf) -> KsResult {
    ks_two_sample_with(a, b, DEFAULT_CONFIDENCE).expect("default confidence is valid")
}

pub fn ks_two_sample_with(a: &EmpiricalCdf, b: &EmpiricalCdf, confidence: f64) -> Result<KsResult> {
    let (xa, xb) = (a.values(), b.values());
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut sup = 0u128;
    // Work in integer units of 1/(na·nb) so the statistic is symmetric bit-for-bit.
    while i < na && j < nb {
        let x = if xa[i] <= xb[j] { xa[i] } else { xb[j] };
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        let d = (i as u128 * nb as u128).abs_diff(j as u128 * na as u128);
        sup = sup.max(d);
    }
    let statistic = sup as f64 / (na as f64 * nb as f64);
    let dkw = dkw_margin(na, confidence)? + dkw_margin(nb, confidence)?;
    Ok(KsResult { statistic, dkw_margin: dkw, reps_a: na, reps_b: nb })
}

/// Refuses simulations above `cap` summand draws.
pub fn check_budget(n: u64, reps: u64, cap: u128) -> Result<()> {
    let requested = n as u128 * reps as u128;
    if requested > cap {
        return Err(Error::Budget { requested, cap });
    }
    Ok(())
}

/// `a_n` for a true-sum ensemble; `a_1 = 1`.
fn true_sum_scale(n: u64, xi: f64) -> f64 {
    if n == 1 {
        1.0
    } else {
        scaling_a_n(n as f64, xi)
    }
}

/// `reps` draws of `a_n S_n`; replicate `r` uses stream `key.replicate(r)`.
pub fn simulate_true_sums(
    spec: &DistributionSpec,
    n: u64,
    reps: u64,
    key: StreamKey,
    exec: Execution,
    budget: u128,
) -> Result<Vec<f64>> {
    if n < 1 || reps < 1 {
        return Err(domain(format!("need n >= 1 and reps >= 1, got n={n} reps={reps}")));
    }
    check_budget(n, reps, budget)?;
    let a_n = true_sum_scale(n, spec.params().xi);
    map_replicates(reps, exec, |r| a_n * spec.sample_sum(n, &mut key.replicate(r)))
}

/// A method compared against the true sums in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Approx(VariantKey),
    /// Independent true-sum ensemble; checks the harness itself.
    TrueSum,
}

/// Orderable wrapper so methods can key maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariantKey(u8);

impl VariantKey {
    pub fn variant(&self) -> Variant {
        Variant::ALL[self.0 as usize]
    }
}

impl From<Variant> for VariantKey {
    fn from(v: Variant) -> Self {
        VariantKey(Variant::ALL.iter().position(|x| *x == v).expect("variant listed in ALL") as u8)
    }
}

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        if name.trim() == "true-sum" {
            Ok(Method::TrueSum)
        } else {
            Ok(Method::Approx(Variant::parse(name)?.into()))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Approx(v) => v.variant().name(),
            Method::TrueSum => "true-sum",
        }
    }

    fn task_id(&self) -> u64 {
        match self {
            Method::Approx(v) => 16 + v.0 as u64,
            Method::TrueSum => 1,
        }
    }
}

impl From<Variant> for Method {
    fn from(v: Variant) -> Self {
        Method::Approx(v.into())
    }
}

/// How `k` is set at each `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KChoice {
    Fixed(usize),
    /// `k*(n)` from the rate exponents, times `multiplier`.
    Auto {
        multiplier: f64,
    },
}

impl KChoice {
    /// Resolves `k` for a refined variant at tail parameters `(ξ, δ)`.
    pub fn resolve(&self, n: u64, xi: f64, delta: f64) -> Result<usize> {
        Ok(match *self {
            KChoice::Fixed(k) => k,
            KChoice::Auto { multiplier } => {
                let k = k_star(n, xi, delta, multiplier)?;
                if k == 0 {
                    // The rule prefers the normal baseline; keep the refinement at its rate-optimal k.
                    k_rate_optimal(n, xi, delta, multiplier)? as usize
                } else {
                    k as usize
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub methods: Vec<Method>,
    pub n_grid: Vec<u64>,
    pub reps: u64,
    pub seed: u64,
    pub k: KChoice,
    pub confidence: f64,
    pub options: ApproxOptions,
    pub budget: u128,
    /// δ used for `k` of the shifted variant; the distribution's δ when `None`.
    pub shifted_delta: Option<f64>,
}

impl StudyConfig {
    pub fn new(methods: Vec<Method>, n_grid: Vec<u64>, reps: u64, seed: u64) -> Self {
        Self {
            methods,
            n_grid,
            reps,
            seed,
            k: KChoice::Auto { multiplier: 1.0 },
            confidence: DEFAULT_CONFIDENCE,
            options: ApproxOptions::default(),
            budget: DEFAULT_BUDGET,
            shifted_delta: None,
        }
    }

    /// Checks everything that can be checked before sampling, including the budget.
    pub fn validate(&self, spec: &DistributionSpec, min_grid: usize) -> Result<()> {
        if self.methods.is_empty() {
            return Err(config("at least one variant is required"));
        }
        if self.n_grid.len() < min_grid {
            return Err(config(format!("n-grid needs at least {min_grid} points, got {}", self.n_grid.len())));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config("n-grid must be strictly increasing"));
        }
        if self.reps < 1 {
            return Err(domain("reps must be at least 1"));
        }
        dkw_margin(1, self.confidence)?;
        let total: u128 = self.n_grid.iter().map(|&n| n as u128 * self.reps as u128).sum::<u128>()
            * (1 + self.methods.contains(&Method::TrueSum) as u128);
        if total > self.budget {
            return Err(Error::Budget { requested: total, cap: self.budget });
        }
        for &n in &self.n_grid {
            for &m in &self.methods {
                self.approximand(spec, n, m)?;
            }
        }
        Ok(())
    }

    fn approximand(&self, spec: &DistributionSpec, n: u64, method: Method) -> Result<Option<Approximand>> {
        let Method::Approx(v) = method else {
            if n < 1 {
                return Err(domain("n must be at least 1"));
            }
            return Ok(None);
        };
        let variant = v.variant();
        let p = spec.params();
        let k = if variant.is_baseline() {
            0
        } else {
            let delta = match variant {
                Variant::Shifted => self.shifted_delta.unwrap_or(p.delta),
                _ => p.delta,
            };
            self.k.resolve(n, p.xi, delta)?
        };
        let cfg = ApproxConfig::new(n, k, variant)?;
        Approximand::from_spec(cfg, spec, self.options).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyCell {
    pub n: u64,
    pub variant: &'static str,
    pub k: usize,
    pub ks: KsResult,
    pub clamped: u64,
    /// `R(k, n, ξ, δ)` when defined for this cell.
    pub rate_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySlope {
    pub variant: &'static str,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyTable {
    pub cells: Vec<StudyCell>,
    pub slopes: Vec<StudySlope>,
}

/// Task id of the truth ensemble at `n`, disjoint from the method ids below 2^32.
fn truth_key(seed: u64, n: u64) -> StreamKey {
    StreamKey::new(seed, 0).child(n)
}

fn method_key(seed: u64, n: u64, m: Method) -> StreamKey {
    StreamKey::new(seed, m.task_id()).child(n)
}

/// Compares each method against a true-sum ensemble at every `n`, then fits
/// `ln KS` on `ln n` per method by least squares.
pub fn convergence_study(spec: &DistributionSpec, cfg: &StudyConfig, exec: Execution) -> Result<StudyTable> {
    cfg.validate(spec, 3)?;
    let cells = study_cells(spec, cfg, exec)?;
    let mut slopes = Vec::new();
    for m in &cfg.methods {
        let (xs, ys): (Vec<f64>, Vec<f64>) = cells
            .iter()
            .filter(|c| c.variant == m.name())
            .map(|c| ((c.n as f64).ln(), c.ks.statistic.max(f64::MIN_POSITIVE).ln()))
            .unzip();
        slopes.push(StudySlope { variant: m.name(), slope: ols_slope(&xs, &ys)? });
    }
    Ok(StudyTable { cells, slopes })
}

/// The per-`n` comparisons of a study, without slopes; a one-point grid is allowed.
pub fn study_cells(spec: &DistributionSpec, cfg: &StudyConfig, exec: Execution) -> Result<Vec<StudyCell>> {
    cfg.validate(spec, 1)?;
    let p = spec.params();
    let mut cells = Vec::new();
    for &n in &cfg.n_grid {
        let truth = simulate_true_sums(spec, n, cfg.reps, truth_key(cfg.seed, n), exec, cfg.budget)?;
        let truth = EmpiricalCdf::new(truth)?;
        for &m in &cfg.methods {
            let key = method_key(cfg.seed, n, m);
            let (values, clamped, k) = match cfg.approximand(spec, n, m)? {
                Some(a) => {
                    let e = sample_approx(&a, cfg.reps, key, exec)?;
                    (e.values, e.clamped, a.config().k)
                }
                None => (simulate_true_sums(spec, n, cfg.reps, key, exec, cfg.budget)?, 0, 0),
            };
            let ks = ks_two_sample_with(&truth, &EmpiricalCdf::new(values)?, cfg.confidence)?;
            let delta = match m {
                Method::Approx(v) if v.variant() == Variant::Shifted => cfg.shifted_delta.unwrap_or(p.delta),
                _ => p.delta,
            };
            let rate_bound = (k >= 1).then(|| rate_bound(k as u64, n, p.xi, delta).ok()).flatten();
            cells.push(StudyCell { n, variant: m.name(), k, ks, clamped, rate_bound });
        }
    }
    Ok(cells)
}

/// Least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(domain("slope needs at least two paired points"));
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(domain("slope undefined for a single distinct x"));
    }
    Ok(sxy / sxx)
}

/// Header `n,variant,k,ks,dkw,reps,clamped,noise_limited,rate_bound,slope`.
/// Cell rows leave `slope` empty; one slope row per variant follows with only
/// `variant` and `slope` set.
pub fn write_study_csv<W: std::io::Write>(out: W, table: &StudyTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "variant", "k", "ks", "dkw", "reps", "clamped", "noise_limited", "rate_bound", "slope"])?;
    for c in &table.cells {
        w.write_record([
            c.n.to_string(),
            c.variant.to_string(),
            c.k.to_string(),
            c.ks.statistic.to_string(),
            c.ks.dkw_margin.to_string(),
            c.ks.reps_b.to_string(),
            c.clamped.to_string(),
            c.ks.noise_limited().to_string(),
            c.rate_bound.map(|r| r.to_string()).unwrap_or_default(),
            String::new(),
        ])?;
    }
    for s in &table.slopes {
        let mut row = vec![String::new(); 10];
        row[1] = s.variant.to_string();
        row[9] = s.slope.to_string();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Written next to every CLI output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub reps: BTreeMap<String, u64>,
    pub clamp_counts: BTreeMap<String, u64>,
    pub started_at: String,
    pub wall_time_secs: f64,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed,
            reps: BTreeMap::new(),
            clamp_counts: BTreeMap::new(),
            started_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            wall_time_secs: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Records the digest of a file already written to disk.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.push(OutputDigest { file, sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}
