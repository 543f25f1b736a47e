//! End-to-end run: game loop, diagnostics, and the optional oracle
//! cross-check, with wall-clock accounting per stage.

use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use mfg_core::diagnostics::{full_report, DiagnosticsReport};
use mfg_core::oracle::{compare_boundaries, solve_os_backward, OracleGrid, OracleSolution};
use mfg_core::{
    run_game, simulate_bundles, simulate_representative, BoundarySurface, GameRun, MeanField,
    PathBundle, PicardSolver,
};

use crate::config::RunConfig;

/// Fixed representative-path setup: start at the lower edge of the price box
/// with capacity 0.2, on a refined grid of 500 steps.
pub const REPRESENTATIVE_Y0: f64 = 0.2;
pub const REPRESENTATIVE_STEPS: usize = 500;

/// Oracle cross-check defaults: fine grid 300 x 600, 7-point quadrature,
/// capacity slices fixed by the benchmark.
pub const ORACLE_NT: usize = 300;
pub const ORACLE_NX: usize = 600;
pub const ORACLE_GH: usize = 7;
pub const ORACLE_SLICES: [f64; 3] = [0.25, 0.5, 1.0];

#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub y: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub solution: OracleSolution,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Timings {
    pub game_ms: f64,
    pub diagnostics_ms: f64,
    pub oracle_ms: f64,
}

/// Everything a run produces before artifact emission.
pub struct PipelineOutput {
    pub config: RunConfig,
    pub run: GameRun,
    pub driver: MeanField,
    pub diagnostics: DiagnosticsReport,
    pub diag_paths: Vec<PathBundle>,
    pub representative: PathBundle,
    pub oracle: Vec<OracleCheck>,
    pub timings: Timings,
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput> {
    config.validate().context("stage config")?;
    let params = config.model_params().context("stage config")?;
    let grid = config.grid().context("stage config")?;
    let payoff = config.payoff();
    let game_cfg = config.game_config();

    let t0 = Instant::now();
    let run = run_game(&params, &payoff, &grid, &game_cfg).context("stage game-loop")?;
    let game_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let solver = PicardSolver::new(params, payoff.clone(), grid, config.quad_rule())
        .context("stage diagnostics")?;
    let b_star = run.final_boundary();
    let driver = run.driver_mean_field().context("stage diagnostics")?;
    let diag_paths = simulate_bundles(
        b_star,
        run.final_mean_field(),
        &params,
        config.diag_steps,
        config.diag_paths,
        config.seed,
        &config.initial_law(),
    )
    .context("stage diagnostics")?;
    let diagnostics = full_report(&solver, b_star, &driver, &diag_paths, &[grid.dx()])
        .context("stage diagnostics")?;
    let representative = simulate_representative(
        b_star,
        run.final_mean_field(),
        &params,
        REPRESENTATIVE_STEPS,
        grid.x_min,
        REPRESENTATIVE_Y0,
        config.seed,
    );
    let diagnostics_ms = t1.elapsed().as_secs_f64() * 1e3;

    let t2 = Instant::now();
    let oracle = if config.oracle_check {
        oracle_checks(config).context("stage oracle")?
    } else {
        Vec::new()
    };
    let oracle_ms = t2.elapsed().as_secs_f64() * 1e3;

    Ok(PipelineOutput {
        config: config.clone(),
        run,
        driver,
        diagnostics,
        diag_paths,
        representative,
        oracle,
        timings: Timings {
            game_ms,
            diagnostics_ms,
            oracle_ms,
        },
    })
}

/// Solves the constant-drift problem on single-capacity slices with both the
/// Picard scheme and the backward-induction oracle, and compares.
///
/// The boundary equation decouples across capacity levels, so a two-column
/// grid whose first column sits at the requested level reproduces the full
/// solver's column exactly.
pub fn oracle_checks(config: &RunConfig) -> Result<Vec<OracleCheck>> {
    let params = config.model_params()?;
    let payoff = config.payoff();
    let mut out = Vec::new();
    for &y in &ORACLE_SLICES {
        let (y0, col) = if y < 1.0 { (y, 0) } else { (0.5, 1) };
        let slice_grid = mfg_core::Grid::new(
            config.l1,
            1,
            config.l3,
            y0,
            config.x_min,
            config.x_max,
            config.horizon,
        )?;
        let solver = PicardSolver::new(params, payoff.clone(), slice_grid, config.quad_rule())?;
        let b0 = BoundarySurface::from_terminal(&slice_grid, &params, &payoff)?;
        let m_one = MeanField::constant(1.0, slice_grid.nt(), slice_grid.dt())?;
        let picard = solver.solve(&b0, &m_one, config.eta, config.k_max)?;
        let slice = picard.surface.column(col);

        let og = OracleGrid::for_level(&params, &payoff, y, ORACLE_NT, ORACLE_NX, ORACLE_GH)?;
        let solution = solve_os_backward(&og, &params, &payoff, &m_one, slice_grid.dt())?;
        let coarse_t: Vec<f64> = (0..=slice_grid.l1).map(|i| slice_grid.t(i)).collect();
        let cmp = compare_boundaries(&coarse_t, &slice, &solution)?;
        let fine_dx = (og.x_hi - og.x_lo) / og.nx as f64;
        let tolerance = 2.0 * fine_dx;
        out.push(OracleCheck {
            y,
            max_deviation: cmp.max_deviation,
            tolerance,
            pass: cmp.max_deviation <= tolerance,
            solution,
        });
    }
    Ok(out)
}
