//! Validation suites for a converged run: the integral-equation residual,
//! Skorokhod feasibility/complementarity statistics on simulated paths,
//! monotonicity audits of the boundary surface, and a smooth-fit probe of
//! the value function at the boundary.

use crate::error::MfgError;
use crate::meanfield::PathBundle;
use crate::solver::PicardSolver;
use crate::surface::{BoundarySurface, MeanField};

/// A step counts as active when the control increment exceeds this; strict
/// positivity is unattainable in floating point.
pub const ACTIVE_STEP_TOL: f64 = 1e-14;

/// Residual of the boundary update map over interior time rows.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// `|Φ(b*; m†) - b*|` on rows `i = 0..l1`, row-major, `l1 x (l2 + 1)`.
    pub matrix: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub norm_inf: f64,
    pub norm_2: f64,
    /// Nodes clamped inside the single update application.
    pub clamped_nodes: usize,
}

/// Reflection statistics over a batch of simulated paths.
#[derive(Clone, Copy, Debug, Default)]
pub struct SkorokhodStats {
    /// `max |G_t|` over steps with a positive control increment; 0 when the
    /// active set is empty (see `empty_active_set`).
    pub max_abs_g_active: f64,
    /// Signed minimum of `G_t` over all steps of all paths.
    pub min_g: f64,
    /// Number of active steps found.
    pub n_active_steps: usize,
    /// True when no step was active; the max above is then a sentinel.
    pub empty_active_set: bool,
}

/// Largest forward differences violating the two monotonicity directions.
#[derive(Clone, Copy, Debug, Default)]
pub struct MonotonicityStats {
    /// `max (b(t_{i+1}, y) - b(t_i, y))^+`: boundary should not increase in t.
    pub max_t_violation: f64,
    /// `max (b(t, y_j) - b(t, y_{j+1}))^+`: boundary should not decrease in y.
    pub max_y_violation: f64,
}

/// Deviation of the value function from the cost level along the boundary.
#[derive(Clone, Copy, Debug, Default)]
pub struct SmoothFitStats {
    /// `max |u(t, b(t,y), y) - c0|` over the probed nodes.
    pub max_value_gap: f64,
    /// Largest one-sided finite-difference slope `|u(b) - u(b - h)| / h`.
    pub max_slope_below: f64,
}

/// Full diagnostics bundle for a converged run.
#[derive(Clone, Debug)]
pub struct DiagnosticsReport {
    pub residual: ResidualReport,
    pub skorokhod: SkorokhodStats,
    pub monotonicity: MonotonicityStats,
    pub smooth_fit: SmoothFitStats,
}

/// Runs every suite against a converged surface: the residual under the
/// driver mean field, reflection statistics over the supplied path batch,
/// the monotonicity audit, and the smooth-fit probe.
pub fn full_report(
    solver: &PicardSolver,
    b_star: &BoundarySurface,
    m_dag: &MeanField,
    paths: &[PathBundle],
    probe_offsets: &[f64],
) -> Result<DiagnosticsReport, MfgError> {
    Ok(DiagnosticsReport {
        residual: residual(solver, b_star, m_dag)?,
        skorokhod: skorokhod_check(paths, ACTIVE_STEP_TOL),
        monotonicity: monotonicity_audit(b_star),
        smooth_fit: smooth_fit_probe(solver, b_star, m_dag, probe_offsets)?,
    })
}

/// One application of the update map against the driver mean field; the
/// terminal row is excluded (the map is 0/0 there and the row is pinned).
pub fn residual(
    solver: &PicardSolver,
    b_star: &BoundarySurface,
    m_dag: &MeanField,
) -> Result<ResidualReport, MfgError> {
    let (updated, stats) = solver.update(b_star, m_dag)?;
    let g = solver.grid();
    let (rows, cols) = (g.l1, g.ny());
    let mut matrix = Vec::with_capacity(rows * cols);
    let mut norm_inf: f64 = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let r = (updated.get(i, j) - b_star.get(i, j)).abs();
            norm_inf = norm_inf.max(r);
            sum_sq += r * r;
            matrix.push(r);
        }
    }
    Ok(ResidualReport {
        matrix,
        rows,
        cols,
        norm_inf,
        norm_2: sum_sq.sqrt(),
        clamped_nodes: stats.clamped.len(),
    })
}

/// Feasibility (`G_t >= 0`) and complementarity (`Δξ > 0 ⇒ G_t = 0`)
/// statistics over a path batch.
pub fn skorokhod_check(paths: &[PathBundle], tol_active: f64) -> SkorokhodStats {
    let mut stats = SkorokhodStats {
        min_g: f64::INFINITY,
        ..Default::default()
    };
    for path in paths {
        let mut prev_xi = 0.0;
        for (step, (&xi, &g)) in path.xi.iter().zip(path.gaps().iter()).enumerate() {
            stats.min_g = stats.min_g.min(g);
            let dxi = xi - prev_xi;
            if dxi > tol_active {
                stats.n_active_steps += 1;
                stats.max_abs_g_active = stats.max_abs_g_active.max(g.abs());
            }
            prev_xi = xi;
            let _ = step;
        }
    }
    if paths.is_empty() {
        stats.min_g = 0.0;
    }
    stats.empty_active_set = stats.n_active_steps == 0;
    stats
}

/// Monotonicity audit over adjacent node pairs of the surface.
pub fn monotonicity_audit(b: &BoundarySurface) -> MonotonicityStats {
    let g = b.grid();
    let mut stats = MonotonicityStats::default();
    for i in 0..g.nt() {
        for j in 0..g.ny() {
            if i + 1 < g.nt() {
                stats.max_t_violation = stats.max_t_violation.max(b.get(i + 1, j) - b.get(i, j));
            }
            if j + 1 < g.ny() {
                stats.max_y_violation = stats.max_y_violation.max(b.get(i, j) - b.get(i, j + 1));
            }
        }
    }
    stats.max_t_violation = stats.max_t_violation.max(0.0);
    stats.max_y_violation = stats.max_y_violation.max(0.0);
    stats
}

/// Evaluates the value function on the boundary and just below it.
///
/// At each interior node, `u(t, b(t,y), y)` should sit at the cost level and
/// the slope from below should vanish (smooth fit). Probes are taken at
/// `x = b` and `x = b - h` for each offset `h`.
pub fn smooth_fit_probe(
    solver: &PicardSolver,
    b: &BoundarySurface,
    m: &MeanField,
    probe_offsets: &[f64],
) -> Result<SmoothFitStats, MfgError> {
    let g = solver.grid();
    let c0 = solver.params().c0;
    let mut stats = SmoothFitStats::default();
    for i in 0..g.l1 {
        for j in 0..g.ny() {
            let xb = b.get(i, j);
            let u_b = solver.value(i, xb, j, b, m)?;
            stats.max_value_gap = stats.max_value_gap.max((u_b - c0).abs());
            for &h in probe_offsets {
                let u_lo = solver.value(i, xb - h, j, b, m)?;
                stats.max_slope_below = stats.max_slope_below.max(((u_b - u_lo) / h).abs());
            }
        }
    }
    Ok(stats)
}
