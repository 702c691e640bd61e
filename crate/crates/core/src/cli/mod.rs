//! Command-line front end.

pub mod config;
pub mod svg;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{config as config_err, Error, Result};
use crate::error_rates::{benchmark_exponent, beta_star, rate_curves, write_rate_curves_csv, RateSpec};
use crate::mc_harness::{
    convergence_study, simulate_true_sums, study_cells, write_study_csv, KChoice, Method, RunManifest, StudyCell,
    StudyConfig, StudyTable,
};
use crate::par::Execution;
use crate::refined_approx::{sample_approx, write_ensemble_csv, ApproxConfig, ApproxOptions, Approximand, Variant};
use crate::rng::StreamKey;
use crate::tail_model::{default_delta, mu_tail_approx, sigma_sq_tail_approx, DistributionSpec, Treatment};

use config::{defaults, KArg, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "heavysum", version, about = "Refined approximations for sums of heavy-tailed variables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncated moments and their tail approximations over a t-grid
    Moments(Opts),
    /// Draw an ensemble from one approximand (or true sums)
    Sample(Opts),
    /// Kolmogorov distance of each variant to true sums at one n
    Compare(Opts),
    /// Optimal-rate exponents over a xi-grid
    Rates(Opts),
    /// Kolmogorov distances over an n-grid with fitted slopes
    Sweep(Opts),
    /// Rate-optimal number of retained order statistics
    Kstar(Opts),
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// JSON file of defaults; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Moments(_) => "moments",
            Command::Sample(_) => "sample",
            Command::Compare(_) => "compare",
            Command::Rates(_) => "rates",
            Command::Sweep(_) => "sweep",
            Command::Kstar(_) => "kstar",
        }
    }

    fn opts(&self) -> &Opts {
        match self {
            Command::Moments(o)
            | Command::Sample(o)
            | Command::Compare(o)
            | Command::Rates(o)
            | Command::Sweep(o)
            | Command::Kstar(o) => o,
        }
    }
}

/// 2 validation, 3 budget refusal, 4 numeric failure.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::UnsupportedVariant(_) | Error::Config(_) | Error::Json(_) => 2,
        Error::Budget { .. } => 3,
        Error::Numeric(_) | Error::Io(_) | Error::Csv(_) => 4,
    }
}

/// Parses `std::env::args`, runs the command and maps errors to exit codes.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs one command and returns the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let opts = cli.command.opts();
    let file = match &opts.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    let cfg = opts.run.clone().overlay(file).overlay(defaults());
    let ctx = Ctx { command: cli.command.name(), cfg, started: Instant::now() };
    match &cli.command {
        Command::Moments(_) => ctx.moments(),
        Command::Sample(_) => ctx.sample(),
        Command::Compare(_) => ctx.compare(),
        Command::Rates(_) => ctx.rates(),
        Command::Sweep(_) => ctx.sweep(),
        Command::Kstar(_) => ctx.kstar(),
    }
}

struct Ctx {
    command: &'static str,
    cfg: RunConfig,
    started: Instant,
}

/// Every field below is filled by `defaults()`.
macro_rules! get {
    ($ctx:expr, $field:ident) => {
        $ctx.cfg.$field.clone().expect(concat!("default for ", stringify!($field)))
    };
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Ctx {
    fn exec(&self) -> Execution {
        Execution::from_workers(self.cfg.workers)
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = get!(self, out_dir);
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn spec(&self) -> Result<DistributionSpec> {
        let family = get!(self, family);
        let xi = get!(self, xi);
        let implied_omega = |name: &str| -> Result<()> {
            if self.cfg.omega.is_some() {
                return Err(config_err(format!("omega is implied by xi for family {name}; do not set it")));
            }
            Ok(())
        };
        let mut spec = match family.as_str() {
            "centered-pareto" => DistributionSpec::centered_pareto(xi, self.cfg.omega.unwrap_or(1.0))?,
            "student-t" => {
                implied_omega(&family)?;
                DistributionSpec::student_t(1.0 / xi)?
            }
            "frechet-centered" => {
                implied_omega(&family)?;
                DistributionSpec::frechet_centered(1.0 / xi)?
            }
            "custom" => {
                let delta = self.cfg.delta.ok_or_else(|| config_err("custom family needs --delta"))?;
                let x0 = self.cfg.x0.ok_or_else(|| config_err("custom family needs --x0"))?;
                DistributionSpec::custom(xi, self.cfg.omega.unwrap_or(1.0), delta, x0)?
            }
            other => return Err(config_err(format!("unknown family '{other}'"))),
        };
        if let Some(d) = self.cfg.delta {
            spec = spec.with_delta(d)?;
        }
        if let Some(x0) = self.cfg.x0 {
            spec = spec.with_x0(x0)?;
        }
        if let Some(kappa) = self.cfg.kappa {
            spec = spec.with_kappa(kappa)?;
        }
        Ok(spec)
    }

    /// δ for the shifted variant: the user's δ, else the family's shifted default.
    fn shifted_delta(&self, spec: &DistributionSpec) -> f64 {
        self.cfg.delta.unwrap_or_else(|| default_delta(spec, Treatment::Shifted).unwrap_or(spec.params().delta))
    }

    fn methods(&self, spec: &DistributionSpec) -> Result<Vec<Method>> {
        let names = match &self.cfg.variant {
            Some(v) if !v.is_empty() => v.clone(),
            _ if spec.params().xi < 0.5 => vec!["refined-shifted".into(), "normal-baseline".into()],
            _ => vec!["refined-unified".into(), "stable-baseline".into()],
        };
        let mut out: Vec<Method> = Vec::new();
        for name in &names {
            let m = Method::parse(name)?;
            if out.contains(&m) {
                return Err(config_err(format!("variant '{name}' listed twice")));
            }
            out.push(m);
        }
        Ok(out)
    }

    fn k_choice(&self) -> KChoice {
        match get!(self, k) {
            KArg::Fixed(k) => KChoice::Fixed(k),
            KArg::Auto => KChoice::Auto { multiplier: get!(self, k_multiplier) },
        }
    }

    fn study(&self, spec: &DistributionSpec, n_grid: Vec<u64>) -> Result<StudyConfig> {
        let mut s = StudyConfig::new(self.methods(spec)?, n_grid, get!(self, reps), get!(self, seed));
        s.k = self.k_choice();
        s.confidence = get!(self, confidence);
        s.budget = get!(self, budget) as u128;
        s.options = ApproxOptions::default();
        s.shifted_delta = Some(self.shifted_delta(spec));
        Ok(s)
    }

    fn manifest(&self) -> Result<RunManifest> {
        Ok(RunManifest::new(self.command, serde_json::to_value(&self.cfg)?, get!(self, seed)))
    }

    fn finish(&self, mut manifest: RunManifest, files: Vec<PathBuf>, dir: &Path) -> Result<Vec<PathBuf>> {
        for f in &files {
            manifest.add_output(f)?;
        }
        manifest.wall_time_secs = self.started.elapsed().as_secs_f64();
        let path = dir.join(format!("{}_manifest.json", self.command));
        manifest.write(&path)?;
        let mut all = files;
        all.push(path);
        Ok(all)
    }

    fn moments(&self) -> Result<Vec<PathBuf>> {
        let spec = self.spec()?;
        let params = spec.params();
        let sigma0 = spec.summary().sigma0_sq;
        let mut rows = Vec::new();
        for &t in &get!(self, t_grid) {
            let m = spec.truncated_moments(t)?;
            let mu_a = mu_tail_approx(&params, t).ok();
            let s_a = sigma0.and_then(|s0| sigma_sq_tail_approx(&params, s0, t).ok());
            rows.push([t.to_string(), m.mu.to_string(), m.sigma_sq.to_string(), fmt_opt(mu_a), fmt_opt(s_a)]);
        }
        let dir = self.out_dir()?;
        let path = dir.join("moments.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["t", "mu", "sigma_sq", "mu_tail_approx", "sigma_sq_tail_approx"])?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.finish(self.manifest()?, vec![path], &dir)
    }

    fn sample(&self) -> Result<Vec<PathBuf>> {
        let spec = self.spec()?;
        let methods = self.methods(&spec)?;
        let [method] = methods[..] else {
            return Err(config_err("sample takes exactly one variant"));
        };
        let n = get!(self, n);
        let reps = get!(self, reps);
        let key = StreamKey::new(get!(self, seed), 0);
        let budget = get!(self, budget) as u128;
        let mut manifest = self.manifest()?;
        let values = match method {
            Method::TrueSum => simulate_true_sums(&spec, n, reps, key, self.exec(), budget)?,
            Method::Approx(v) => {
                let study = self.study(&spec, vec![n])?;
                study.validate(&spec, 1)?;
                let variant = v.variant();
                let p = spec.params();
                let k = if variant.is_baseline() {
                    0
                } else {
                    let delta = if variant == Variant::Shifted { self.shifted_delta(&spec) } else { p.delta };
                    study.k.resolve(n, p.xi, delta)?
                };
                let a = Approximand::from_spec(ApproxConfig::new(n, k, variant)?, &spec, study.options)?;
                let e = sample_approx(&a, reps, key, self.exec())?;
                manifest.clamp_counts.insert(method.name().into(), e.clamped);
                e.values
            }
        };
        manifest.reps.insert(method.name().into(), reps);
        let dir = self.out_dir()?;
        let path = dir.join("sample.csv");
        write_ensemble_csv(std::fs::File::create(&path)?, &values)?;
        self.finish(manifest, vec![path], &dir)
    }

    fn beta_column(&self, spec: &DistributionSpec, c: &StudyCell) -> String {
        let p = spec.params();
        let delta = if c.variant == Variant::Shifted.name() { self.shifted_delta(spec) } else { p.delta };
        if c.k >= 1 {
            beta_star(p.xi, delta).map(|b| b.to_string()).unwrap_or_default()
        } else {
            String::new()
        }
    }

    fn record_cells(manifest: &mut RunManifest, cells: &[StudyCell]) {
        for c in cells {
            *manifest.clamp_counts.entry(c.variant.into()).or_default() += c.clamped;
            manifest.reps.insert(c.variant.into(), c.ks.reps_b as u64);
        }
    }

    fn compare(&self) -> Result<Vec<PathBuf>> {
        let spec = self.spec()?;
        let study = self.study(&spec, vec![get!(self, n)])?;
        let cells = study_cells(&spec, &study, self.exec())?;
        let bench = benchmark_exponent(spec.params().xi, spec.params().delta).ok();
        let dir = self.out_dir()?;
        let path = dir.join("compare.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "variant",
            "n",
            "k",
            "ks",
            "dkw",
            "reps",
            "clamped",
            "noise_limited",
            "rate_bound",
            "beta_star",
            "benchmark",
        ])?;
        for c in &cells {
            w.write_record([
                c.variant.to_string(),
                c.n.to_string(),
                c.k.to_string(),
                c.ks.statistic.to_string(),
                c.ks.dkw_margin.to_string(),
                c.ks.reps_b.to_string(),
                c.clamped.to_string(),
                c.ks.noise_limited().to_string(),
                fmt_opt(c.rate_bound),
                self.beta_column(&spec, c),
                bench.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        let mut manifest = self.manifest()?;
        Self::record_cells(&mut manifest, &cells);
        self.finish(manifest, vec![path], &dir)
    }

    fn rates(&self) -> Result<Vec<PathBuf>> {
        let delta = self.cfg.delta.unwrap_or(1.0);
        let rows = rate_curves(&get!(self, xi_grid), delta)?;
        let dir = self.out_dir()?;
        let path = dir.join("rates.csv");
        write_rate_curves_csv(std::fs::File::create(&path)?, &rows)?;
        let mut files = vec![path];
        if self.cfg.svg {
            let series = vec![
                svg::Series { name: "beta*".into(), points: rows.iter().map(|r| (r.xi, r.beta_star)).collect() },
                svg::Series {
                    name: "benchmark".into(),
                    points: rows.iter().filter_map(|r| r.benchmark.exponent().map(|b| (r.xi, b))).collect(),
                },
            ];
            let p = dir.join("rates.svg");
            std::fs::write(
                &p,
                svg::line_chart(&format!("Error rate exponents, delta = {delta}"), "xi", "exponent", &series),
            )?;
            files.push(p);
        }
        self.finish(self.manifest()?, files, &dir)
    }

    fn sweep(&self) -> Result<Vec<PathBuf>> {
        let spec = self.spec()?;
        let study = self.study(&spec, get!(self, n_grid))?;
        let table: StudyTable = convergence_study(&spec, &study, self.exec())?;
        let p = spec.params();
        let dir = self.out_dir()?;

        let main = dir.join("sweep.csv");
        write_study_csv(std::fs::File::create(&main)?, &table)?;

        let series_path = dir.join("sweep_series.csv");
        let mut w = csv::Writer::from_path(&series_path)?;
        w.write_record(["variant", "n", "ks", "dkw"])?;
        for c in &table.cells {
            w.write_record([
                c.variant.to_string(),
                c.n.to_string(),
                c.ks.statistic.to_string(),
                c.ks.dkw_margin.to_string(),
            ])?;
        }
        w.flush()?;

        let slopes_path = dir.join("sweep_slopes.csv");
        let mut w = csv::Writer::from_path(&slopes_path)?;
        w.write_record(["variant", "slope", "beta_star", "benchmark"])?;
        let bench = benchmark_exponent(p.xi, p.delta).ok();
        for s in &table.slopes {
            let refined = Variant::parse(s.variant).map(|v| !v.is_baseline()).unwrap_or(false);
            let delta = if s.variant == Variant::Shifted.name() { self.shifted_delta(&spec) } else { p.delta };
            let beta = if refined { beta_star(p.xi, delta).ok() } else { None };
            w.write_record([
                s.variant.to_string(),
                s.slope.to_string(),
                fmt_opt(beta),
                bench.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;

        let mut files = vec![main, series_path, slopes_path];
        if self.cfg.svg {
            let mut by_variant: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
            for c in &table.cells {
                by_variant.entry(c.variant).or_default().push(((c.n as f64).ln(), c.ks.statistic.ln()));
            }
            let series: Vec<svg::Series> =
                by_variant.into_iter().map(|(name, points)| svg::Series { name: name.into(), points }).collect();
            let path = dir.join("sweep.svg");
            std::fs::write(&path, svg::line_chart("Kolmogorov distance to true sums", "ln n", "ln KS", &series))?;
            files.push(path);
        }
        let mut manifest = self.manifest()?;
        Self::record_cells(&mut manifest, &table.cells);
        self.finish(manifest, files, &dir)
    }

    fn kstar(&self) -> Result<Vec<PathBuf>> {
        let spec = self.spec()?;
        let p = spec.params();
        let n = get!(self, n);
        let rs = RateSpec::new(n, p.xi, p.delta, get!(self, k_multiplier))?;
        let dir = self.out_dir()?;
        let path = dir.join("kstar.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["n", "xi", "delta", "alpha_star", "beta_star", "k_star", "regime", "normal_fallback"])?;
        w.write_record([
            n.to_string(),
            p.xi.to_string(),
            p.delta.to_string(),
            rs.alpha_star.to_string(),
            rs.beta_star.to_string(),
            rs.k_star.to_string(),
            rs.regime.label().to_string(),
            rs.normal_fallback().to_string(),
        ])?;
        w.flush()?;
        self.finish(self.manifest()?, vec![path], &dir)
    }
}
