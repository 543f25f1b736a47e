//! From boundary to mean field: generalized inversion of `b(t, ·)`, Euler
//! simulation of the drifted log-price, Skorokhod reflection of the capacity
//! against the action surface, and the Monte Carlo average that produces the
//! next mean-field curve.
//!
//! The action surface is the right-continuous generalized inverse
//! `c(t, x) = inf{ y : b(t, y) > x }`, clamped to 1 above the tabulated range
//! of `b(t, ·)` and to 0 below it. Along a path the optimal capacity is the
//! running max `Y_t = max(Y_{t-}, c(t, X_t))`, so the control acts only when
//! the target exceeds the current level and then by the minimal amount.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::MfgError;
use crate::model::{Grid, ModelParams};
use crate::surface::{BoundarySurface, MeanField};

/// Tolerance above which a non-monotone capacity row is reported before
/// running-max regularization.
pub const Y_MONOTONICITY_TOL: f64 = 5e-3;

/// Paths per work unit in the parallel Monte Carlo sweep. Partial sums are
/// folded in block order, so results do not depend on the thread count.
const MC_BLOCK: usize = 256;

/// The action surface `c(t_i, x_k)` on the time/log-price grid.
#[derive(Clone, Debug)]
pub struct InverseSurface {
    grid: Grid,
    values: Vec<f64>,
}

/// Row regularization report from an inversion.
#[derive(Clone, Copy, Debug, Default)]
pub struct InversionStats {
    /// Rows whose monotonicity violation exceeded [`Y_MONOTONICITY_TOL`].
    pub warned_rows: usize,
    /// Largest decrease found across all rows.
    pub max_violation: f64,
}

impl InverseSurface {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.grid.nx() + k]
    }

    /// Linear interpolation in `x` along row `i`, clamped to the row's edge
    /// values outside `[x_min, x_max]`.
    pub fn interp_x(&self, i: usize, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.x_min {
            return self.get(i, 0);
        }
        if x >= g.x_max {
            return self.get(i, g.l3);
        }
        let pos = (x - g.x_min) / g.dx();
        let k = (pos as usize).min(g.l3 - 1);
        let w = pos - k as f64;
        (1.0 - w) * self.get(i, k) + w * self.get(i, k + 1)
    }

    /// Bilinear interpolation: linear in `t` between tabulated rows, then
    /// linear in `x`. Exact at the grid nodes.
    pub fn interp_tx(&self, t: f64, x: f64) -> f64 {
        let g = &self.grid;
        if t <= 0.0 {
            return self.interp_x(0, x);
        }
        if t >= g.horizon {
            return self.interp_x(g.l1, x);
        }
        let pos = t / g.dt();
        let i = (pos as usize).min(g.l1 - 1);
        let w = pos - i as f64;
        (1.0 - w) * self.interp_x(i, x) + w * self.interp_x(i + 1, x)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Generalized inverse of the boundary in the capacity direction, row by
/// row. Rows that decrease in `y` beyond tolerance are regularized with a
/// running max before inversion (inverting a non-monotone profile is
/// otherwise ill-posed) and counted in the returned stats.
pub fn invert_boundary(b: &BoundarySurface) -> (InverseSurface, InversionStats) {
    let g = *b.grid();
    let mut stats = InversionStats::default();
    let mut values = Vec::with_capacity(g.nt() * g.nx());
    let mut row = vec![0.0; g.ny()];
    for i in 0..g.nt() {
        row.copy_from_slice(b.row(i));
        let mut violation: f64 = 0.0;
        for j in 1..g.ny() {
            violation = violation.max(row[j - 1] - row[j]);
            if row[j] < row[j - 1] {
                row[j] = row[j - 1];
            }
        }
        if violation > Y_MONOTONICITY_TOL {
            stats.warned_rows += 1;
        }
        stats.max_violation = stats.max_violation.max(violation);
        for k in 0..g.nx() {
            values.push(invert_row(&row, &g, g.x(k)));
        }
    }
    (InverseSurface { grid: g, values }, stats)
}

/// `inf{ y in [y0, 1] : row(y) > x }` for a non-decreasing tabulated row,
/// with the clamp convention: 1 above the row's range, 0 below it.
fn invert_row(row: &[f64], grid: &Grid, x: f64) -> f64 {
    let n = row.len();
    if x < row[0] {
        return 0.0;
    }
    if x >= row[n - 1] {
        return 1.0;
    }
    // Bisection for the first node with row[j] > x; the loop above
    // guarantees it exists and is not node 0.
    let (mut lo, mut hi) = (0usize, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if row[mid] > x {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (y_lo, y_hi) = (grid.y(lo), grid.y(hi));
    let (b_lo, b_hi) = (row[lo], row[hi]);
    if b_hi <= b_lo {
        return y_hi;
    }
    y_lo + (x - b_lo) / (b_hi - b_lo) * (y_hi - y_lo)
}

/// One Euler step of the drifted log-price.
#[inline]
pub fn euler_step(x: f64, drift: f64, dt: f64, z: f64, sigma: f64) -> f64 {
    x + drift * dt + sigma * dt.sqrt() * z
}

/// A simulated controlled path on a uniform time grid.
#[derive(Clone, Debug)]
pub struct PathBundle {
    /// Time nodes, length `n_steps + 1`.
    pub times: Vec<f64>,
    /// Log-price path.
    pub x: Vec<f64>,
    /// Reflected capacity, `Y_t = y0- + xi_t`.
    pub y: Vec<f64>,
    /// Cumulative control, non-decreasing from 0.
    pub xi: Vec<f64>,
    /// Action level `c(t, X_t)` seen by the reflection at each node.
    pub c_along: Vec<f64>,
    pub x0: f64,
    pub y0_minus: f64,
    /// RNG stream the path was drawn from.
    pub stream: u64,
}

impl PathBundle {
    /// Skorokhod gap `G_t = Y_t - c(t, X_t)` at each node.
    pub fn gaps(&self) -> Vec<f64> {
        self.y
            .iter()
            .zip(&self.c_along)
            .map(|(y, c)| y - c)
            .collect()
    }
}

/// Discrete initial law for `(X_0, Y_{0-})`.
#[derive(Clone, Debug)]
pub enum InitialLaw {
    /// Uniform over the product of the log-price and capacity grids.
    UniformGrid,
    /// User-supplied atoms `(x, y, weight)`; weights need not be normalized.
    Discrete(Vec<(f64, f64, f64)>),
}

impl InitialLaw {
    fn sample(&self, grid: &Grid, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match self {
            InitialLaw::UniformGrid => {
                let k = rng.random_range(0..grid.nx());
                let j = rng.random_range(0..grid.ny());
                (grid.x(k), grid.y(j))
            }
            InitialLaw::Discrete(atoms) => {
                let total: f64 = atoms.iter().map(|a| a.2).sum();
                let mut u = rng.random_range(0.0..total);
                for &(x, y, w) in atoms {
                    if u < w {
                        return (x, y);
                    }
                    u -= w;
                }
                let last = atoms.last().expect("non-empty law");
                (last.0, last.1)
            }
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), MfgError> {
        if let InitialLaw::Discrete(atoms) = self {
            if atoms.is_empty() {
                return Err(MfgError::Config("initial law must not be empty".into()));
            }
            for &(x, y, w) in atoms {
                if !(w > 0.0) {
                    return Err(MfgError::Config(format!(
                        "initial law weight must be positive, got {w}"
                    )));
                }
                if !(0.0..=1.0).contains(&y) {
                    return Err(MfgError::Config(format!(
                        "initial capacity {y} outside [0, 1]"
                    )));
                }
                if !x.is_finite() {
                    return Err(MfgError::Config("initial log-price not finite".into()));
                }
            }
            let _ = grid;
        }
        Ok(())
    }
}

/// Simulates one reflected path on `n_steps` uniform steps over the horizon.
///
/// The action level is read at the current state before the Euler move, the
/// capacity is the running max of those levels (so the complementarity
/// `Δξ > 0 ⇒ Y = c` holds exactly even in floating point), and the drift on
/// `[τ, τ + Δτ)` is the mean-field value at the enclosing coarse node.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    c: &InverseSurface,
    drift: &MeanField,
    params: &ModelParams,
    n_steps: usize,
    x0: f64,
    y0_minus: f64,
    rng: &mut ChaCha8Rng,
    stream: u64,
) -> PathBundle {
    let g = c.grid();
    let dt_fine = g.horizon / n_steps as f64;
    let coarse_dt = g.dt();
    let refined = n_steps != g.l1;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut ys = Vec::with_capacity(n_steps + 1);
    let mut xis = Vec::with_capacity(n_steps + 1);
    let mut cs = Vec::with_capacity(n_steps + 1);

    let mut x = x0;
    let mut y = y0_minus;
    for p in 0..=n_steps {
        let t = if p == n_steps {
            g.horizon
        } else {
            p as f64 * dt_fine
        };
        let c_here = if refined {
            c.interp_tx(t, x)
        } else {
            c.interp_x(p, x)
        };
        y = y.max(c_here);
        times.push(t);
        xs.push(x);
        ys.push(y);
        xis.push(y - y0_minus);
        cs.push(c_here);
        if p < n_steps {
            let coarse_idx = ((t / coarse_dt) as usize).min(g.l1 - 1);
            let z: f64 = rng.sample(StandardNormal);
            x = euler_step(x, drift.value(coarse_idx), dt_fine, z, params.sigma);
        }
    }
    PathBundle {
        times,
        x: xs,
        y: ys,
        xi: xis,
        c_along: cs,
        x0,
        y0_minus,
        stream,
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Monte Carlo estimate of the next mean-field curve from the current
/// boundary: paths drift with `m_prev`, reflect against the inverse of `b`,
/// and the node-wise average of the capacity is returned.
///
/// Per-path RNG streams derive from `(seed, path index)`, partial sums are
/// accumulated in fixed-size blocks, and blocks are folded in order, so the
/// estimate is bit-identical for any thread count.
pub fn estimate_mean_field(
    b: &BoundarySurface,
    m_prev: &MeanField,
    params: &ModelParams,
    n_paths: usize,
    seed: u64,
    law: &InitialLaw,
) -> Result<(MeanField, InversionStats), MfgError> {
    if n_paths == 0 {
        return Err(MfgError::Config("mc_paths must be >= 1".into()));
    }
    let g = *b.grid();
    if m_prev.len() != g.nt() {
        return Err(MfgError::GridMismatch(format!(
            "mean field has {} nodes, grid has {}",
            m_prev.len(),
            g.nt()
        )));
    }
    law.validate(&g)?;
    let (c, stats) = invert_boundary(b);
    let n_blocks = n_paths.div_ceil(MC_BLOCK);
    let partials: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut acc = vec![0.0; g.nt()];
            let lo = blk * MC_BLOCK;
            let hi = ((blk + 1) * MC_BLOCK).min(n_paths);
            for p in lo..hi {
                let mut rng = path_rng(seed, p as u64);
                let (x0, y0m) = law.sample(&g, &mut rng);
                let mut x = x0;
                let mut y = y0m;
                for (i, slot) in acc.iter_mut().enumerate() {
                    y = y.max(c.interp_x(i, x));
                    *slot += y;
                    if i < g.l1 {
                        let z: f64 = rng.sample(StandardNormal);
                        x = euler_step(x, m_prev.value(i), g.dt(), z, params.sigma);
                    }
                }
            }
            acc
        })
        .collect();
    let inv_n = 1.0 / n_paths as f64;
    let mut sums = vec![0.0; g.nt()];
    for part in &partials {
        for (s, v) in sums.iter_mut().zip(part) {
            *s += v;
        }
    }
    let values: Vec<f64> = sums.into_iter().map(|s| s * inv_n).collect();
    Ok((MeanField::new(values, g.dt())?, stats))
}

/// Simulates a batch of reflected paths with full trajectories retained,
/// e.g. for the Skorokhod diagnostics on a refined time grid.
pub fn simulate_bundles(
    b: &BoundarySurface,
    drift: &MeanField,
    params: &ModelParams,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    law: &InitialLaw,
) -> Result<Vec<PathBundle>, MfgError> {
    if n_paths == 0 || n_steps == 0 {
        return Err(MfgError::Config(
            "diagnostic batch needs n_paths >= 1 and n_steps >= 1".into(),
        ));
    }
    let g = *b.grid();
    law.validate(&g)?;
    let (c, _) = invert_boundary(b);
    let bundles: Vec<PathBundle> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let (x0, y0m) = law.sample(&g, &mut rng);
            simulate_path(&c, drift, params, n_steps, x0, y0m, &mut rng, p as u64)
        })
        .collect();
    Ok(bundles)
}

/// Simulates the single representative path from a fixed initial condition.
pub fn simulate_representative(
    b: &BoundarySurface,
    drift: &MeanField,
    params: &ModelParams,
    n_steps: usize,
    x0: f64,
    y0_minus: f64,
    seed: u64,
) -> PathBundle {
    let (c, _) = invert_boundary(b);
    // A dedicated stream far above the path-indexed ones.
    let stream = u64::MAX;
    let mut rng = path_rng(seed, stream);
    simulate_path(&c, drift, params, n_steps, x0, y0_minus, &mut rng, stream)
}
