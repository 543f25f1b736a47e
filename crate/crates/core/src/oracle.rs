//! Independent cross-check of the Picard boundary: for one capacity level
//! the auxiliary stopping problem is solved by explicit backward dynamic
//! programming on a fine grid, with the conditional expectation taken by
//! Gauss-Hermite quadrature and linear interpolation in space. The stopping
//! set's lower edge gives a boundary curve to compare against the integral
//! equation's solution.
//!
//! This solver shares nothing with the kernel path: no normal CDF, no
//! Gaussian closed forms, no Picard map.

use rayon::prelude::*;

use crate::error::MfgError;
use crate::model::{terminal_boundary, ModelParams, Payoff};
use crate::surface::MeanField;

/// Nodes and weights of the n-point Gauss-Hermite rule (physicists'
/// convention, weight `e^{-z^2}`), by Newton iteration on the recurrence for
/// orthonormal Hermite polynomials. Weights sum to sqrt(pi).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut roots: Vec<f64> = Vec::with_capacity(m);
    for i in 0..m {
        // Stroud & Secrest initial guesses for the largest root, then a
        // downward march off the previously found roots.
        let mut z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => roots[0] - 1.14 * nf.powf(0.426) / roots[0],
            2 => 1.86 * roots[1] - 0.86 * roots[0],
            3 => 1.91 * roots[2] - 0.91 * roots[1],
            _ => 2.0 * roots[i - 1] - roots[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // Orthonormal recurrence: p_j(z) = z sqrt(2/j) p_{j-1} - sqrt((j-1)/j) p_{j-2}.
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        roots.push(z);
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[m - 1] = 0.0;
    }
    // Return in increasing order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Grid of the dynamic-programming solver for one capacity level.
#[derive(Clone, Debug)]
pub struct OracleGrid {
    /// Fine time steps over `[0, T]`.
    pub nt: usize,
    /// Fine space intervals over `[x_lo, x_hi]`.
    pub nx: usize,
    /// The fixed capacity level.
    pub y: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    /// Gauss-Hermite order for the one-step expectation.
    pub gh_order: usize,
}

impl OracleGrid {
    /// Centers the space range on the terminal boundary with a half-width of
    /// six standard deviations of the terminal log-price.
    pub fn for_level(
        params: &ModelParams,
        payoff: &Payoff,
        y: f64,
        nt: usize,
        nx: usize,
        gh_order: usize,
    ) -> Result<Self, MfgError> {
        if nt == 0 || nx == 0 {
            return Err(MfgError::Config("oracle grid sizes must be positive".into()));
        }
        let xbar = terminal_boundary(params, payoff, y)?;
        let half_width = 6.0 * params.sigma * params.horizon.sqrt();
        Ok(Self {
            nt,
            nx,
            y,
            x_lo: xbar - half_width,
            x_hi: xbar + half_width,
            gh_order,
        })
    }

}

/// Backward-induction solution: the value matrix and the stopping edge.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    /// Time nodes, length `nt + 1`.
    pub t: Vec<f64>,
    /// Space nodes, length `nx + 1`.
    pub x: Vec<f64>,
    /// Value matrix, row-major `(nt + 1) x (nx + 1)`.
    pub u: Vec<f64>,
    /// Boundary curve: smallest `x` with `u(t, x)` at the stopping level.
    pub boundary: Vec<f64>,
}

impl OracleSolution {
    pub fn value(&self, ti: usize, xk: usize) -> f64 {
        self.u[ti * (self.x.len()) + xk]
    }
}

/// Explicit backward recursion for the optimal stopping value
/// `u(T, ·) = c0`,
/// `u(t, x) = min(c0, ∂_y f(x, y) Δt + e^{-r Δt} E[u(t + Δt, x + m Δt + σ√Δt Z)])`,
/// with the expectation by Gauss-Hermite quadrature and linear interpolation
/// in `x` (edge-clamped). The stopping obstacle is the constant `c0`, so the
/// `min` projection is exact per step.
pub fn solve_os_backward(
    og: &OracleGrid,
    params: &ModelParams,
    payoff: &Payoff,
    drift: &MeanField,
    coarse_dt: f64,
) -> Result<OracleSolution, MfgError> {
    let (nt, nx) = (og.nt, og.nx);
    let dt = params.horizon / nt as f64;
    let dx = (og.x_hi - og.x_lo) / nx as f64;
    let xs: Vec<f64> = (0..=nx).map(|k| og.x_lo + k as f64 * dx).collect();
    let ts: Vec<f64> = (0..=nt).map(|j| j as f64 * dt).collect();
    let gp = payoff.g_prime(og.y);
    let dyf: Vec<f64> = xs.iter().map(|x| x.exp() * gp).collect();
    let c0 = params.c0;
    let disc = (-params.r * dt).exp();

    let (gh_nodes, gh_weights) = gauss_hermite(og.gh_order);
    let norm: f64 = gh_weights.iter().sum();
    // Physical draw offsets: Z = sqrt(2) * node, scaled by sigma sqrt(dt).
    let offsets: Vec<f64> = gh_nodes
        .iter()
        .map(|z| params.sigma * dt.sqrt() * std::f64::consts::SQRT_2 * z)
        .collect();
    let weights: Vec<f64> = gh_weights.iter().map(|w| w / norm).collect();

    let mut u = vec![0.0; (nt + 1) * (nx + 1)];
    let mut boundary = vec![0.0; nt + 1];
    // Terminal slice: u = c0 everywhere; the stopping edge at T- is where the
    // marginal profit crosses the user cost of capital.
    for k in 0..=nx {
        u[nt * (nx + 1) + k] = c0;
    }
    boundary[nt] = locate_crossing(&xs, &dyf, params.r * c0)
        .ok_or_else(|| MfgError::OracleRange("marginal profit never crosses r c0".into()))?;

    let mut next: Vec<f64> = vec![c0; nx + 1];
    for j in (0..nt).rev() {
        let coarse_idx = ((ts[j] / coarse_dt) as usize).min(drift.len().saturating_sub(2));
        let m_j = drift.value(coarse_idx);
        let shift = m_j * dt;
        let row: Vec<f64> = (0..=nx)
            .into_par_iter()
            .map(|k| {
                let mut expect = 0.0;
                for (off, w) in offsets.iter().zip(&weights) {
                    expect += w * interp_clamped(&xs, &next, xs[k] + shift + off);
                }
                let cont = dyf[k] * dt + disc * expect;
                cont.min(c0)
            })
            .collect();
        boundary[j] = locate_boundary(&xs, &row, c0).ok_or_else(|| {
            MfgError::OracleRange(format!(
                "no stopping node at t = {}; enlarge the x-range",
                ts[j]
            ))
        })?;
        u[j * (nx + 1)..(j + 1) * (nx + 1)].copy_from_slice(&row);
        next = row;
    }
    Ok(OracleSolution {
        t: ts,
        x: xs,
        u,
        boundary,
    })
}

fn interp_clamped(xs: &[f64], vals: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return vals[0];
    }
    if x >= xs[n - 1] {
        return vals[n - 1];
    }
    let dx = xs[1] - xs[0];
    let pos = (x - xs[0]) / dx;
    let k = (pos as usize).min(n - 2);
    let w = pos - k as f64;
    (1.0 - w) * vals[k] + w * vals[k + 1]
}

/// Smallest grid x with `u(x) >= c0 - 1e-12`, refined linearly between the
/// bracketing nodes.
fn locate_boundary(xs: &[f64], u: &[f64], c0: f64) -> Option<f64> {
    let thresh = c0 - 1e-12;
    let k = u.iter().position(|&v| v >= thresh)?;
    if k == 0 {
        return Some(xs[0]);
    }
    let (u_lo, u_hi) = (u[k - 1], u[k]);
    if u_hi <= u_lo {
        return Some(xs[k]);
    }
    let w = ((thresh - u_lo) / (u_hi - u_lo)).clamp(0.0, 1.0);
    Some(xs[k - 1] + w * (xs[k] - xs[k - 1]))
}

/// First crossing of an increasing tabulated function above a level, with
/// linear refinement.
fn locate_crossing(xs: &[f64], vals: &[f64], level: f64) -> Option<f64> {
    let k = vals.iter().position(|&v| v >= level)?;
    if k == 0 {
        return Some(xs[0]);
    }
    let (lo, hi) = (vals[k - 1], vals[k]);
    if hi <= lo {
        return Some(xs[k]);
    }
    let w = ((level - lo) / (hi - lo)).clamp(0.0, 1.0);
    Some(xs[k - 1] + w * (xs[k] - xs[k - 1]))
}

/// Sup-norm comparison of a Picard time slice against the oracle curve,
/// excluding the last coarse step before the horizon where both schemes
/// carry their largest discretization error.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryComparison {
    pub max_deviation: f64,
    /// Coarse index attaining the maximum.
    pub argmax: usize,
}

pub fn compare_boundaries(
    coarse_t: &[f64],
    picard_slice: &[f64],
    oracle: &OracleSolution,
) -> Result<BoundaryComparison, MfgError> {
    if coarse_t.len() != picard_slice.len() {
        return Err(MfgError::GridMismatch(
            "time grid and boundary slice lengths differ".into(),
        ));
    }
    if coarse_t.len() < 3 {
        return Err(MfgError::Config("need at least three time nodes".into()));
    }
    let mut max_dev = 0.0;
    let mut argmax = 0;
    // Interior times only, excluding the final coarse step before T.
    for (i, (&t, &bv)) in coarse_t
        .iter()
        .zip(picard_slice)
        .enumerate()
        .take(coarse_t.len() - 2)
    {
        let o = interp_time(&oracle.t, &oracle.boundary, t);
        let dev = (bv - o).abs();
        if dev > max_dev {
            max_dev = dev;
            argmax = i;
        }
    }
    Ok(BoundaryComparison {
        max_deviation: max_dev,
        argmax,
    })
}

fn interp_time(ts: &[f64], vals: &[f64], t: f64) -> f64 {
    let n = ts.len();
    if t <= ts[0] {
        return vals[0];
    }
    if t >= ts[n - 1] {
        return vals[n - 1];
    }
    let dt = ts[1] - ts[0];
    let pos = (t - ts[0]) / dt;
    let j = (pos as usize).min(n - 2);
    let w = pos - j as f64;
    (1.0 - w) * vals[j] + w * vals[j + 1]
}
