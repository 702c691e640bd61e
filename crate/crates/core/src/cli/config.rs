//! Run configuration: command-line flags layered over an optional JSON file
//! layered over built-in defaults.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// `k` as given by the user: an integer or `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KArg {
    Fixed(usize),
    Auto,
}

impl std::str::FromStr for KArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(KArg::Auto);
        }
        s.parse().map(KArg::Fixed).map_err(|_| format!("k must be an integer or \"auto\", got \"{s}\""))
    }
}

impl Serialize for KArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KArg::Fixed(k) => s.serialize_u64(*k as u64),
            KArg::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for KArg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(k) => Ok(KArg::Fixed(k)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Every tunable of every subcommand. Unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// centered-pareto, student-t, frechet-centered or custom
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<String>,
    /// Tail index; student-t uses ν = 1/ξ and frechet-centered α = 1/ξ
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub xi: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub omega: Option<f64>,
    /// Tail-deviation exponent; defaults to the value implied by the family
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kappa: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<u64>,
    /// Integer or "auto"
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<KArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_multiplier: Option<f64>,
    /// Comma-separated variant names
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub variant: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reps: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_grid: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub xi_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confidence: Option<f64>,
    /// Maximum total summand draws before the run is refused
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub budget: Option<u64>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    #[serde(skip)]
    pub workers: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    /// Also write an SVG chart (rates and sweep)
    #[arg(long)]
    #[serde(skip)]
    pub svg: bool,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field),)* svg: $top.svg || $base.svg }
    };
}

impl RunConfig {
    /// Fields of `self` win; unset ones are taken from `base`.
    pub fn overlay(self, base: RunConfig) -> RunConfig {
        overlay!(
            self,
            base,
            family,
            xi,
            omega,
            delta,
            kappa,
            x0,
            n,
            k,
            k_multiplier,
            variant,
            reps,
            seed,
            n_grid,
            xi_grid,
            t_grid,
            confidence,
            budget,
            workers,
            out_dir
        )
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Values used when neither flags nor the config file set a field.
pub fn defaults() -> RunConfig {
    RunConfig {
        family: Some("centered-pareto".into()),
        xi: Some(0.45),
        omega: None,
        delta: None,
        kappa: None,
        x0: None,
        n: Some(1000),
        k: Some(KArg::Auto),
        k_multiplier: Some(1.0),
        variant: None,
        reps: Some(200_000),
        seed: Some(1),
        n_grid: Some(vec![100, 1000, 10_000]),
        xi_grid: Some((0..13).map(|i| (35 + 5 * i) as f64 / 100.0).collect()),
        t_grid: Some(vec![1.0, 10.0, 100.0, 1000.0]),
        confidence: Some(0.99),
        budget: Some(10_000_000_000),
        workers: None,
        out_dir: Some(PathBuf::from("heavysum-out")),
        svg: false,
    }
}
