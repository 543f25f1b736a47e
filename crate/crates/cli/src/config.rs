//! Run configuration: defaults, JSON file loading, environment and flag
//! precedence, and validation.
//!
//! Every key is optional in the file; omitted keys fall back to the default
//! experiment (the square-root payoff benchmark). Precedence, lowest to
//! highest: defaults, config file, `MFG_SEED` environment variable, command
//! line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mfg_core::{GameConfig, Grid, InitialLaw, MfgError, ModelParams, Payoff, QuadRule};

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub r: f64,
    pub c0: f64,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y0: f64,
    pub eta: f64,
    pub k_max: usize,
    pub n_max: usize,
    pub mc_paths: usize,
    pub seed: u64,
    pub payoff: PayoffKind,
    pub quad_rule: QuadRuleKind,
    pub out_dir: String,
    pub dump_iterations: bool,
    pub isotonic_projection: bool,
    pub oracle_check: bool,
    pub run_full_cap: bool,
    pub diag_paths: usize,
    pub diag_steps: usize,
    /// Optional discrete initial law as `[x, y, weight]` atoms; the uniform
    /// product law on the grid nodes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_law: Option<Vec<(f64, f64, f64)>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Sqrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadRuleKind {
    Trapezoid,
    Rectangle,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            r: 0.01,
            c0: 0.5,
            sigma: 1.0,
            horizon: 1.0,
            l1: 75,
            l2: 50,
            l3: 25,
            x_min: -5.0,
            x_max: 0.5,
            y0: 1e-3,
            eta: 1e-3,
            k_max: 10,
            n_max: 5,
            mc_paths: 10_000,
            seed: 42,
            payoff: PayoffKind::Sqrt,
            quad_rule: QuadRuleKind::Trapezoid,
            out_dir: "out".into(),
            dump_iterations: false,
            isotonic_projection: false,
            oracle_check: false,
            run_full_cap: false,
            diag_paths: 96,
            diag_steps: 700,
            initial_law: None,
        }
    }
}

/// File-level view: every key optional, unknown keys rejected with the list
/// of valid ones.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    r: Option<f64>,
    c0: Option<f64>,
    sigma: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    l1: Option<usize>,
    l2: Option<usize>,
    l3: Option<usize>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    y0: Option<f64>,
    eta: Option<f64>,
    k_max: Option<usize>,
    n_max: Option<usize>,
    mc_paths: Option<usize>,
    seed: Option<u64>,
    payoff: Option<PayoffKind>,
    quad_rule: Option<QuadRuleKind>,
    out_dir: Option<String>,
    dump_iterations: Option<bool>,
    isotonic_projection: Option<bool>,
    oracle_check: Option<bool>,
    run_full_cap: Option<bool>,
    diag_paths: Option<usize>,
    diag_steps: Option<usize>,
    initial_law: Option<Vec<(f64, f64, f64)>>,
}

macro_rules! merge {
    ($cfg:ident, $file:ident, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $file.$field { $cfg.$field = v; })+
    };
}

impl RunConfig {
    /// Parses a JSON config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FileConfig = serde_json::from_str(text)
            .map_err(|e| anyhow::anyhow!("config parse error: {e}"))?;
        let mut cfg = Self::default();
        merge!(
            cfg, file, r, c0, sigma, horizon, l1, l2, l3, x_min, x_max, y0, eta, k_max, n_max,
            mc_paths, seed, payoff, quad_rule, out_dir, dump_iterations, isotonic_projection,
            oracle_check, run_full_cap, diag_paths, diag_steps
        );
        if file.initial_law.is_some() {
            cfg.initial_law = file.initial_law;
        }
        Ok(cfg)
    }

    /// Serializes the fully resolved configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model_params().map_err(anyhow::Error::from)?;
        self.grid().map_err(anyhow::Error::from)?;
        // NaN-safe: a NaN tolerance must fail this check too.
        if self.eta.is_nan() || self.eta <= 0.0 {
            bail!("eta must be > 0, got {}", self.eta);
        }
        if self.k_max == 0 {
            bail!("k_max must be >= 1");
        }
        if self.mc_paths == 0 {
            bail!("mc_paths must be >= 1");
        }
        if self.diag_paths == 0 || self.diag_steps == 0 {
            bail!("diag_paths and diag_steps must be >= 1");
        }
        self.initial_law()
            .validate(&self.grid().map_err(anyhow::Error::from)?)
            .map_err(anyhow::Error::from)?;
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams, MfgError> {
        ModelParams::new(self.r, self.c0, self.sigma, self.horizon)
    }

    pub fn grid(&self) -> Result<Grid, MfgError> {
        Grid::new(
            self.l1,
            self.l2,
            self.l3,
            self.y0,
            self.x_min,
            self.x_max,
            self.horizon,
        )
    }

    pub fn payoff(&self) -> Payoff {
        match self.payoff {
            PayoffKind::Sqrt => Payoff::Sqrt,
        }
    }

    pub fn quad_rule(&self) -> QuadRule {
        match self.quad_rule {
            QuadRuleKind::Trapezoid => QuadRule::Trapezoid,
            QuadRuleKind::Rectangle => QuadRule::Rectangle,
        }
    }

    pub fn initial_law(&self) -> InitialLaw {
        match &self.initial_law {
            None => InitialLaw::UniformGrid,
            Some(atoms) => InitialLaw::Discrete(atoms.clone()),
        }
    }

    pub fn game_config(&self) -> GameConfig {
        GameConfig {
            eta: self.eta,
            k_max: self.k_max,
            n_max: self.n_max,
            mc_paths: self.mc_paths,
            seed: self.seed,
            rule: self.quad_rule(),
            isotonic_projection: self.isotonic_projection,
            law: self.initial_law(),
            run_full_cap: self.run_full_cap,
        }
    }
}
