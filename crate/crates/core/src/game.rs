//! Outer learning loop: alternate Picard boundary solves and Monte Carlo
//! mean-field updates until the boundary sequence stabilizes.
//!
//! Iteration `n` solves the boundary equation driven by `m^[n-1]` (with
//! `m^[-1] ≡ 1` and a cold start from the terminal boundary at `n = 0`, a
//! warm start from `b_{n-1}` afterwards), then re-estimates the mean field
//! from reflected paths. The loop stops when the Frobenius distance between
//! consecutive boundaries drops below the tolerance, or at the iteration
//! cap, in which case the run is returned with a warning flag rather than an
//! error. Every Monte Carlo update reuses the same seed, so consecutive
//! mean fields share their random draws and the game error measures the
//! systematic change rather than sampling noise.

use crate::error::MfgError;
use crate::meanfield::{estimate_mean_field, InitialLaw, InversionStats};
use crate::model::{Grid, ModelParams, Payoff};
use crate::solver::{PicardSolver, QuadRule};
use crate::surface::{BoundarySurface, MeanField};

/// Knobs of the nested iteration.
#[derive(Clone, Debug)]
pub struct GameConfig {
    /// Tolerance for both the Picard and the game stopping rules.
    pub eta: f64,
    /// Picard iteration cap per game iteration.
    pub k_max: usize,
    /// Game iteration cap; the loop runs `n = 0..=n_max`.
    pub n_max: usize,
    /// Paths per mean-field estimate.
    pub mc_paths: usize,
    /// Master seed; per-path streams derive from it.
    pub seed: u64,
    pub rule: QuadRule,
    /// Post-hoc isotonic projection of each converged boundary.
    pub isotonic_projection: bool,
    /// Initial law of `(X_0, Y_{0-})`.
    pub law: InitialLaw,
    /// Run all `n_max + 1` game iterations even if the tolerance rule fires
    /// earlier. The reference experiment fixes its iteration count a priori,
    /// so its artifact set needs the full sweep.
    pub run_full_cap: bool,
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), MfgError> {
        if !(self.eta > 0.0) {
            return Err(MfgError::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.k_max == 0 {
            return Err(MfgError::Config("k_max must be >= 1".into()));
        }
        if self.mc_paths == 0 {
            return Err(MfgError::Config("mc_paths must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything produced by one game iteration.
#[derive(Clone, Debug)]
pub struct GameIteration {
    /// Converged boundary `b_n`.
    pub boundary: BoundarySurface,
    /// Mean field `m^[n]` estimated from `b_n`.
    pub mean_field: MeanField,
    /// Picard error series `‖b^(k) - b^(k-1)‖` for this iteration.
    pub picard_errors: Vec<f64>,
    /// Distances `‖b^(k̂) - b^(k)‖` of each iterate to the converged one.
    pub picard_to_final: Vec<f64>,
    /// Every Picard iterate, for surface dumps.
    pub picard_iterates: Vec<BoundarySurface>,
    /// `‖b_n - b_{n-1}‖`; for `n = 0` the distance is to the terminal
    /// surface the scheme starts from.
    pub game_error: f64,
    /// Clamped kernel nodes across the iteration's Picard sweeps.
    pub clamped_nodes: usize,
    /// Smallest raw `A` seen.
    pub min_a: f64,
    /// Inversion regularization report from the mean-field estimate.
    pub inversion: InversionStats,
}

/// Final state of the outer loop.
#[derive(Debug)]
pub struct GameRun {
    pub iterations: Vec<GameIteration>,
    /// True when the tolerance rule fired before the cap.
    pub converged: bool,
    pub params: ModelParams,
    pub grid: Grid,
}

impl GameRun {
    /// Number of completed game iterations minus one (the index of the last).
    pub fn final_n(&self) -> usize {
        self.iterations.len() - 1
    }

    pub fn final_boundary(&self) -> &BoundarySurface {
        &self.iterations[self.final_n()].boundary
    }

    pub fn final_mean_field(&self) -> &MeanField {
        &self.iterations[self.final_n()].mean_field
    }

    /// The mean field that drove the final boundary solve: `m^[n-1]` for the
    /// last `n`, or the constant-one initializer when the loop stopped at
    /// `n = 0`.
    pub fn driver_mean_field(&self) -> Result<MeanField, MfgError> {
        let n = self.final_n();
        if n == 0 {
            MeanField::constant(1.0, self.grid.nt(), self.grid.dt())
        } else {
            Ok(self.iterations[n - 1].mean_field.clone())
        }
    }

    /// Game errors `‖b_n - b_{n-1}‖` for `n = 1..`.
    pub fn game_errors(&self) -> Vec<f64> {
        self.iterations.iter().skip(1).map(|it| it.game_error).collect()
    }
}

/// Runs the nested iteration to convergence or the cap.
pub fn run_game(
    params: &ModelParams,
    payoff: &Payoff,
    grid: &Grid,
    cfg: &GameConfig,
) -> Result<GameRun, MfgError> {
    cfg.validate()?;
    let solver = PicardSolver::new(*params, payoff.clone(), *grid, cfg.rule)?;
    let terminal = BoundarySurface::from_terminal(grid, params, payoff)?;
    let mut m_prev = MeanField::constant(1.0, grid.nt(), grid.dt())?;
    let mut b_prev = terminal.clone();
    let mut iterations = Vec::with_capacity(cfg.n_max + 1);
    let mut converged = false;

    for n in 0..=cfg.n_max {
        let b_init = if n == 0 { terminal.clone() } else { b_prev.clone() };
        let run = solver.solve(&b_init, &m_prev, cfg.eta, cfg.k_max)?;
        let mut b_n = run.surface.clone();
        b_n.game_index = n;
        if cfg.isotonic_projection {
            b_n.project_isotonic();
        }
        let (m_n, inversion) = estimate_mean_field(
            &b_n,
            &m_prev,
            params,
            cfg.mc_paths,
            cfg.seed,
            &cfg.law,
        )?;
        let game_error = b_n.frobenius_distance(&b_prev);
        iterations.push(GameIteration {
            boundary: b_n.clone(),
            mean_field: m_n.clone(),
            picard_errors: run.errors.clone(),
            picard_to_final: run.distances_to_final(),
            picard_iterates: run.iterates,
            game_error,
            clamped_nodes: run.clamped_nodes,
            min_a: run.min_a,
            inversion,
        });
        if n >= 1 && game_error < cfg.eta {
            converged = true;
            if !cfg.run_full_cap {
                break;
            }
        }
        m_prev = m_n;
        b_prev = b_n;
    }

    Ok(GameRun {
        iterations,
        converged,
        params: *params,
        grid: *grid,
    })
}
