//! Gaussian kernels of the boundary integral equation and the Picard
//! fixed-point iteration that solves it for a given mean-field input.
//!
//! With drift `m(t)` and constant volatility, the log-price transition is
//! Gaussian and the two time integrals of the equation reduce to closed
//! forms in the normal CDF:
//!
//! ```text
//! I1 = ∫_0^{T-t} e^{-r s} [1 - Φ(β(s))] ds
//! I2 = ∫_0^{T-t} exp(ΔM(s) + σ² s / 2 - r s) Φ(β(s) - σ√s) ds
//! β(s) = (b(t + s, y) - b(t, y) - ΔM(s)) / (σ√s),   β(0) := 0
//! ```
//!
//! where `ΔM(s) = ∫_0^s m(t + u) du`. The log-form update reads
//!
//! ```text
//! b(t, y) = log c0 + log A - log g'(y) - log I2,
//! A = (1 - e^{-r (T - t)}) - r I1  (must be positive)
//! ```
//!
//! and the terminal row stays pinned to `x̄(y)`.

use rayon::prelude::*;

use crate::error::MfgError;
use crate::model::{Grid, ModelParams, Payoff};
use crate::normal::{normal_cdf, normal_sf};
use crate::surface::{BoundarySurface, MeanField};

/// Quadrature weights for the time integrals on the shared grid.
///
/// `Trapezoid` gives half weight to both endpoints of `[0, T - t_i]` and
/// keeps the discrete `A` non-negative up to roundoff for any boundary;
/// `Rectangle` gives every node the full step weight, which matches the sums
/// written out in the plain nested-loop form but overweights the endpoints
/// and can drive `A` slightly negative on the last interior row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QuadRule {
    #[default]
    Trapezoid,
    Rectangle,
}

/// Floor applied to `A` when discretization pushes it non-positive.
pub const A_CLAMP: f64 = 1e-12;

/// Fraction of interior nodes that may be clamped before the update is
/// treated as a hard failure.
pub const MAX_CLAMPED_FRACTION: f64 = 0.01;

/// Per-update accounting of the `A > 0` requirement.
#[derive(Clone, Debug, Default)]
pub struct UpdateStats {
    /// Nodes where `A <= 0` was clamped, with the raw value.
    pub clamped: Vec<(usize, usize, f64)>,
    /// Smallest raw `A` seen across interior nodes.
    pub min_a: f64,
    /// Number of interior nodes in the update.
    pub interior: usize,
}

impl UpdateStats {
    pub fn degenerate(&self) -> bool {
        !self.clamped.is_empty()
    }

    pub fn clamped_fraction(&self) -> f64 {
        if self.interior == 0 {
            0.0
        } else {
            self.clamped.len() as f64 / self.interior as f64
        }
    }
}

/// Outcome of a Picard solve.
#[derive(Clone, Debug)]
pub struct PicardRun {
    /// Final iterate `b^(k̂)`.
    pub surface: BoundarySurface,
    /// `‖b^(k) - b^(k-1)‖_2` for `k = 1..=k̂`.
    pub errors: Vec<f64>,
    /// Every iterate `b^(0)..=b^(k̂)` (the grids are small).
    pub iterates: Vec<BoundarySurface>,
    /// True if any node was clamped in any iteration.
    pub degenerate: bool,
    /// Smallest raw `A` across all iterations.
    pub min_a: f64,
    /// Total clamped nodes across all iterations.
    pub clamped_nodes: usize,
}

impl PicardRun {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("at least one Picard iteration")
    }

    /// `‖b^(k̂) - b^(k)‖_2` for `k = 1..=k̂`.
    pub fn distances_to_final(&self) -> Vec<f64> {
        self.iterates
            .iter()
            .skip(1)
            .map(|b| self.surface.frobenius_distance(b))
            .collect()
    }
}

/// Evaluator of the boundary-equation right-hand side for fixed model data.
#[derive(Clone, Debug)]
pub struct PicardSolver {
    params: ModelParams,
    payoff: Payoff,
    grid: Grid,
    rule: QuadRule,
    /// log g'(y_j) cached per capacity node.
    log_gp: Vec<f64>,
}

impl PicardSolver {
    pub fn new(
        params: ModelParams,
        payoff: Payoff,
        grid: Grid,
        rule: QuadRule,
    ) -> Result<Self, MfgError> {
        params.validate()?;
        grid.validate()?;
        payoff.validate_on(&grid)?;
        if !(params.r > 0.0) {
            return Err(MfgError::Config(
                "the boundary equation requires r > 0".into(),
            ));
        }
        if (params.horizon - grid.horizon).abs() > 0.0 {
            return Err(MfgError::GridMismatch(
                "params.horizon and grid.horizon differ".into(),
            ));
        }
        let log_gp = (0..grid.ny())
            .map(|j| payoff.g_prime(grid.y(j)).ln())
            .collect();
        Ok(Self {
            params,
            payoff,
            grid,
            rule,
            log_gp,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn payoff(&self) -> &Payoff {
        &self.payoff
    }

    pub fn rule(&self) -> QuadRule {
        self.rule
    }

    #[inline]
    fn weight(&self, q: usize, big_q: usize) -> f64 {
        let dt = self.grid.dt();
        match self.rule {
            QuadRule::Rectangle => dt,
            QuadRule::Trapezoid => {
                if q == 0 || q == big_q {
                    0.5 * dt
                } else {
                    dt
                }
            }
        }
    }

    /// Normalized distance `β` between the boundary `q` steps ahead and the
    /// boundary now, net of the accumulated drift. Zero at zero lag.
    pub fn beta(&self, b: &BoundarySurface, m: &MeanField, i: usize, q: usize, j: usize) -> f64 {
        debug_assert!(i + q <= self.grid.l1);
        if q == 0 {
            return 0.0;
        }
        let s = q as f64 * self.grid.dt();
        let dm = m.cumulative(i + q) - m.cumulative(i);
        (b.get(i + q, j) - b.get(i, j) - dm) / (self.params.sigma * s.sqrt())
    }

    /// Both time integrals at node `(i, j)`. Empty horizon gives `(0, 0)`.
    pub fn kernels(&self, b: &BoundarySurface, m: &MeanField, i: usize, j: usize) -> (f64, f64) {
        self.check_mean_field(m).expect("mean field shape");
        let row = self.row_tables(m, i);
        self.kernels_with_tables(b, m, i, j, &row)
    }

    fn check_mean_field(&self, m: &MeanField) -> Result<(), MfgError> {
        if m.len() != self.grid.nt() {
            return Err(MfgError::GridMismatch(format!(
                "mean field has {} nodes, grid has {}",
                m.len(),
                self.grid.nt()
            )));
        }
        Ok(())
    }

    /// Per-row tables shared by every capacity node: lag times, discount
    /// factors, drift exponentials, and quadrature weights.
    fn row_tables(&self, m: &MeanField, i: usize) -> RowTables {
        let big_q = self.grid.l1 - i;
        let dt = self.grid.dt();
        let r = self.params.r;
        let half_sigma2 = 0.5 * self.params.sigma * self.params.sigma;
        let mut sqrt_s = Vec::with_capacity(big_q + 1);
        let mut disc = Vec::with_capacity(big_q + 1);
        let mut drift_exp = Vec::with_capacity(big_q + 1);
        let mut dm = Vec::with_capacity(big_q + 1);
        let mut w = Vec::with_capacity(big_q + 1);
        for q in 0..=big_q {
            let s = q as f64 * dt;
            let delta_m = m.cumulative(i + q) - m.cumulative(i);
            sqrt_s.push(s.sqrt());
            disc.push((-r * s).exp());
            drift_exp.push((delta_m + half_sigma2 * s - r * s).exp());
            dm.push(delta_m);
            w.push(self.weight(q, big_q));
        }
        RowTables {
            big_q,
            sqrt_s,
            disc,
            drift_exp,
            dm,
            w,
        }
    }

    fn kernels_with_tables(
        &self,
        b: &BoundarySurface,
        _m: &MeanField,
        i: usize,
        j: usize,
        row: &RowTables,
    ) -> (f64, f64) {
        if i == self.grid.l1 {
            return (0.0, 0.0);
        }
        let sigma = self.params.sigma;
        let b_here = b.get(i, j);
        let mut i1 = 0.0;
        let mut i2 = 0.0;
        for q in 0..=row.big_q {
            let beta = if q == 0 {
                0.0
            } else {
                (b.get(i + q, j) - b_here - row.dm[q]) / (sigma * row.sqrt_s[q])
            };
            i1 += row.disc[q] * normal_sf(beta) * row.w[q];
            i2 += row.drift_exp[q] * normal_cdf(beta - sigma * row.sqrt_s[q]) * row.w[q];
        }
        (i1, i2)
    }

    /// One application of the boundary update map. Returns a fresh surface
    /// (Jacobi sweep: node updates are independent and read only the input),
    /// with the terminal row copied through bit-exactly.
    pub fn update(
        &self,
        b: &BoundarySurface,
        m: &MeanField,
    ) -> Result<(BoundarySurface, UpdateStats), MfgError> {
        self.check_mean_field(m)?;
        let l1 = self.grid.l1;
        let ny = self.grid.ny();
        let r = self.params.r;
        let c0 = self.params.c0;
        let log_c0 = c0.ln();
        let horizon = self.grid.horizon;

        type RowResult = (Vec<f64>, Vec<(usize, f64)>, f64);
        let rows: Vec<RowResult> = (0..l1)
            .into_par_iter()
            .map(|i| {
                let tables = self.row_tables(m, i);
                let one_minus_disc = -(-r * (horizon - self.grid.t(i))).exp_m1();
                let mut out = Vec::with_capacity(ny);
                let mut clamped = Vec::new();
                let mut min_a = f64::INFINITY;
                for j in 0..ny {
                    let (i1, i2) = self.kernels_with_tables(b, m, i, j, &tables);
                    let mut a = one_minus_disc - r * i1;
                    min_a = min_a.min(a);
                    if a <= 0.0 {
                        clamped.push((j, a));
                        a = A_CLAMP;
                    }
                    out.push(log_c0 + a.ln() - self.log_gp[j] - i2.ln());
                }
                (out, clamped, min_a)
            })
            .collect();

        let mut next = b.clone();
        let mut stats = UpdateStats {
            clamped: Vec::new(),
            min_a: f64::INFINITY,
            interior: l1 * ny,
        };
        for (i, (row, clamped, min_a)) in rows.into_iter().enumerate() {
            next.row_mut(i).copy_from_slice(&row);
            stats.min_a = stats.min_a.min(min_a);
            stats
                .clamped
                .extend(clamped.into_iter().map(|(j, a)| (i, j, a)));
        }
        if stats.clamped_fraction() > MAX_CLAMPED_FRACTION {
            let &(wi, wj, wa) = stats
                .clamped
                .iter()
                .min_by(|x, y| x.2.total_cmp(&y.2))
                .expect("clamped nonempty");
            return Err(MfgError::DegenerateKernel {
                clamped: stats.clamped.len(),
                interior: stats.interior,
                worst_a: wa,
                worst_i: wi,
                worst_j: wj,
            });
        }
        Ok((next, stats))
    }

    /// Picard iteration from `b_init`, stopping when the Frobenius distance
    /// between successive iterates drops below `eta` or after `k_max` sweeps.
    pub fn solve(
        &self,
        b_init: &BoundarySurface,
        m: &MeanField,
        eta: f64,
        k_max: usize,
    ) -> Result<PicardRun, MfgError> {
        if !(eta > 0.0) {
            return Err(MfgError::Config(format!("eta must be > 0, got {eta}")));
        }
        if k_max == 0 {
            return Err(MfgError::Config("k_max must be >= 1".into()));
        }
        let mut current = b_init.clone();
        current.picard_index = 0;
        let mut iterates = vec![current.clone()];
        let mut errors = Vec::new();
        let mut min_a = f64::INFINITY;
        let mut clamped_nodes = 0;
        for k in 1..=k_max {
            let (mut next, stats) = self.update(&current, m)?;
            next.picard_index = k;
            next.game_index = current.game_index;
            min_a = min_a.min(stats.min_a);
            clamped_nodes += stats.clamped.len();
            let err = next.frobenius_distance(&current);
            errors.push(err);
            current = next;
            iterates.push(current.clone());
            if err < eta {
                break;
            }
        }
        Ok(PicardRun {
            surface: current,
            errors,
            iterates,
            degenerate: clamped_nodes > 0,
            min_a,
            clamped_nodes,
        })
    }

    /// Value of the auxiliary stopping problem at `(t_i, x, y_j)` under the
    /// boundary `b`, via the same Gaussian closed forms with
    /// `β̃(s) = (b(t + s, y) - x - ΔM(s)) / (σ√s)`. At zero lag the sign of
    /// `b(t, y) - x` decides the indicator; the symmetric value is used on
    /// the boundary itself.
    pub fn value(
        &self,
        i: usize,
        x: f64,
        j: usize,
        b: &BoundarySurface,
        m: &MeanField,
    ) -> Result<f64, MfgError> {
        self.check_mean_field(m)?;
        let r = self.params.r;
        let c0 = self.params.c0;
        let sigma = self.params.sigma;
        let tau = self.grid.horizon - self.grid.t(i);
        if i == self.grid.l1 {
            return Ok(c0);
        }
        let tables = self.row_tables(m, i);
        let mut sum_sf = 0.0; // Σ w e^{-rs} (1 - Φ(β̃))
        let mut sum_cdf = 0.0; // Σ w exp(ΔM + σ²s/2 - rs) Φ(β̃ - σ√s)
        for q in 0..=tables.big_q {
            let beta = if q == 0 {
                let b_here = b.get(i, j);
                if x == b_here {
                    0.0
                } else if b_here > x {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                (b.get(i + q, j) - x - tables.dm[q]) / (sigma * tables.sqrt_s[q])
            };
            sum_sf += tables.disc[q] * normal_sf(beta) * tables.w[q];
            sum_cdf += tables.drift_exp[q] * normal_cdf(beta - sigma * tables.sqrt_s[q]) * tables.w[q];
        }
        let gp = self.payoff.g_prime(self.grid.y(j));
        Ok((-r * tau).exp() * c0 + gp * x.exp() * sum_cdf + r * c0 * sum_sf)
    }
}

struct RowTables {
    big_q: usize,
    sqrt_s: Vec<f64>,
    disc: Vec<f64>,
    drift_exp: Vec<f64>,
    dm: Vec<f64>,
    w: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(0.01, 0.5, 1.0, 1.0).unwrap()
    }

    fn grid(l1: usize) -> Grid {
        Grid::new(l1, 4, 3, 1e-3, -5.0, 0.5, 1.0).unwrap()
    }

    fn solver(l1: usize, rule: QuadRule) -> PicardSolver {
        PicardSolver::new(params(), Payoff::Sqrt, grid(l1), rule).unwrap()
    }

    fn flat_surface(g: &Grid, level: f64) -> BoundarySurface {
        BoundarySurface::from_values(g, vec![level; g.nt() * g.ny()]).unwrap()
    }

    #[test]
    fn beta_zero_lag_is_zero() {
        let s = solver(8, QuadRule::Trapezoid);
        let b = flat_surface(s.grid(), -1.0);
        let m = MeanField::constant(1.0, s.grid().nt(), s.grid().dt()).unwrap();
        for i in 0..s.grid().nt() {
            assert_eq!(s.beta(&b, &m, i, 0, 2), 0.0);
        }
    }

    #[test]
    fn beta_flat_boundary_unit_drift() {
        // dt = 0.25, s = q dt = 0.25, flat boundary, m = 1, sigma = 1:
        // beta = -0.25 / sqrt(0.25) = -0.5
        let p = params();
        let g = Grid::new(4, 4, 3, 1e-3, -5.0, 0.5, 1.0).unwrap();
        let s = PicardSolver::new(p, Payoff::Sqrt, g, QuadRule::Rectangle).unwrap();
        let b = flat_surface(&g, -1.0);
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        assert!((s.beta(&b, &m, 0, 1, 0) - (-0.5)).abs() < 1e-15);
    }

    #[test]
    fn beta_vanishes_without_drift_on_flat_boundary() {
        let s = solver(8, QuadRule::Trapezoid);
        let b = flat_surface(s.grid(), -2.5);
        let m = MeanField::constant(0.0, s.grid().nt(), s.grid().dt()).unwrap();
        for q in 0..=s.grid().l1 {
            assert_eq!(s.beta(&b, &m, 0, q, 1), 0.0);
        }
    }

    #[test]
    fn beta_is_invariant_under_constant_shift() {
        // Dyadic surface values so that the +1 shift is exact in floating
        // point; the numerator differences then cancel bit-for-bit.
        let s = solver(6, QuadRule::Trapezoid);
        let g = s.grid();
        let mut vals = Vec::new();
        for i in 0..g.nt() {
            for j in 0..g.ny() {
                vals.push(-4.0 - 0.25 * i as f64 + 0.125 * j as f64);
            }
        }
        let b = BoundarySurface::from_values(g, vals).unwrap();
        let b_shift = b.shifted(1.0);
        let m = MeanField::new(
            (0..g.nt()).map(|i| 0.5 + 0.4 * (i as f64 * 0.7).sin()).collect(),
            g.dt(),
        )
        .unwrap();
        for i in 0..g.nt() {
            for q in 0..=(g.l1 - i) {
                for j in 0..g.ny() {
                    let lhs = s.beta(&b, &m, i, q, j);
                    let rhs = s.beta(&b_shift, &m, i, q, j);
                    assert_eq!(lhs.to_bits(), rhs.to_bits());
                }
            }
        }
    }

    #[test]
    fn kernels_empty_horizon() {
        let s = solver(5, QuadRule::Rectangle);
        let b = flat_surface(s.grid(), -1.0);
        let m = MeanField::constant(1.0, s.grid().nt(), s.grid().dt()).unwrap();
        let (i1, i2) = s.kernels(&b, &m, s.grid().l1, 0);
        assert_eq!((i1, i2), (0.0, 0.0));
    }

    // One-step hand sums at i = l1 - 1 with r = 0, sigma = 1, m = 1, flat
    // boundary, dt = 0.25 (frozen from a 40-digit quadrature of the same
    // sums):
    //   rectangle: I1 = dt (1 - Φ(0)) + dt (1 - Φ(-0.5)) = 0.29786561531850325
    //              I2 = dt Φ(0) + dt e^{0.375} Φ(-1)     = 0.18271050808858516
    //   trapezoid: half of each.
    #[test]
    fn kernel_one_step_hand_sum() {
        let p = ModelParams::new(1e-300, 0.5, 1.0, 1.0).unwrap(); // effectively r = 0
        let g = Grid::new(4, 2, 2, 0.2, -5.0, 0.5, 1.0).unwrap();
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        let b = flat_surface(&g, -1.0);
        let i = g.l1 - 1;

        let rect = PicardSolver::new(p, Payoff::Sqrt, g, QuadRule::Rectangle).unwrap();
        let (i1, i2) = rect.kernels(&b, &m, i, 1);
        assert!((i1 - 0.29786561531850325).abs() < 1e-15, "I1 = {i1}");
        assert!((i2 - 0.18271050808858516).abs() < 1e-15, "I2 = {i2}");

        let trap = PicardSolver::new(p, Payoff::Sqrt, g, QuadRule::Trapezoid).unwrap();
        let (i1, i2) = trap.kernels(&b, &m, i, 1);
        assert!((i1 - 0.14893280765925163).abs() < 1e-15, "I1 = {i1}");
        assert!((i2 - 0.09135525404429258).abs() < 1e-15, "I2 = {i2}");
    }

    // Two-step rectangle sums with r = 0.01, dt = 0.2, m = 0.5, flat
    // boundary (frozen from the same independent quadrature).
    #[test]
    fn kernel_two_step_regression() {
        let p = ModelParams::new(0.01, 0.5, 1.0, 1.0).unwrap();
        let g = Grid::new(5, 2, 2, 0.2, -5.0, 0.5, 1.0).unwrap();
        let m = MeanField::constant(0.5, g.nt(), g.dt()).unwrap();
        let b = flat_surface(&g, -1.0);
        let s = PicardSolver::new(p, Payoff::Sqrt, g, QuadRule::Rectangle).unwrap();
        let (i1, i2) = s.kernels(&b, &m, g.l1 - 2, 0);
        assert!((i1 - 0.34177728616471303).abs() < 1e-15, "I1 = {i1}");
        assert!((i2 - 0.21216562456800078).abs() < 1e-15, "I2 = {i2}");
    }

    #[test]
    fn kernel_i1_far_boundary_saturates() {
        // Future rows far below the current level give β = -∞, Φ(β) = 0
        // term-wise: I1 becomes the plain discounted quadrature and only the
        // zero-lag term of I2 survives.
        let s = solver(6, QuadRule::Rectangle);
        let g = s.grid();
        let mut vals = vec![-1e6; g.nt() * g.ny()];
        for v in vals.iter_mut().take(g.ny()) {
            *v = -1.0; // row 0 stays at the reference level
        }
        let b = BoundarySurface::from_values(g, vals).unwrap();
        let m = MeanField::constant(0.0, g.nt(), g.dt()).unwrap();
        let (i1, i2) = s.kernels(&b, &m, 0, 0);
        let dt = g.dt();
        let r = s.params().r;
        let expected: f64 = (0..=g.l1)
            .map(|q| (-r * q as f64 * dt).exp() * dt)
            .sum::<f64>()
            - 0.5 * dt; // q = 0 keeps Φ(0) = 1/2
        assert!((i1 - expected).abs() < 1e-12);
        assert!((i2 - 0.5 * dt).abs() < 1e-12); // only the q = 0 term survives
    }

    #[test]
    fn i2_positive_on_interior_zero_at_horizon() {
        let s = solver(7, QuadRule::Trapezoid);
        let b = flat_surface(s.grid(), -3.0);
        let m = MeanField::constant(0.7, s.grid().nt(), s.grid().dt()).unwrap();
        for i in 0..s.grid().l1 {
            let (_, i2) = s.kernels(&b, &m, i, 2);
            assert!(i2 > 0.0, "I2 must be positive at interior i = {i}");
        }
        let (_, i2) = s.kernels(&b, &m, s.grid().l1, 2);
        assert_eq!(i2, 0.0);
    }

    #[test]
    fn i1_bounded_by_discounted_quadrature() {
        // 1 - Φ <= 1 node-wise, so I1 is at most the quadrature of e^{-rs}.
        for rule in [QuadRule::Trapezoid, QuadRule::Rectangle] {
            let s = solver(9, rule);
            let g = s.grid();
            let b = BoundarySurface::from_terminal(g, s.params(), &Payoff::Sqrt).unwrap();
            let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
            for i in 0..g.nt() {
                let (i1, _) = s.kernels(&b, &m, i, 1);
                let big_q = g.l1 - i;
                let bound: f64 = (0..=big_q)
                    .map(|q| {
                        (-s.params().r * q as f64 * g.dt()).exp() * s.weight(q, big_q)
                    })
                    .sum();
                assert!(i1 <= bound + 1e-14);
            }
        }
    }

    #[test]
    fn update_pins_terminal_row_bit_exact() {
        let s = solver(10, QuadRule::Trapezoid);
        let g = s.grid();
        let b = BoundarySurface::from_terminal(g, s.params(), &Payoff::Sqrt).unwrap();
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        let (next, _) = s.update(&b, &m).unwrap();
        for j in 0..g.ny() {
            assert_eq!(next.get(g.l1, j).to_bits(), b.get(g.l1, j).to_bits());
        }
        assert!(next.all_finite());
    }

    #[test]
    fn update_flags_degenerate_far_boundary() {
        // Future rows pushed far below: Φ(β) = 0 everywhere, A < 0 under the
        // rectangle rule, and every interior node clamps -> hard error.
        let s = solver(6, QuadRule::Rectangle);
        let g = s.grid();
        let mut vals = vec![-1e6; g.nt() * g.ny()];
        for v in vals.iter_mut().take(g.ny()) {
            *v = 0.0;
        }
        let b = BoundarySurface::from_values(g, vals).unwrap();
        let m = MeanField::constant(0.0, g.nt(), g.dt()).unwrap();
        match s.update(&b, &m) {
            Err(MfgError::DegenerateKernel { clamped, .. }) => assert!(clamped > 0),
            other => panic!("expected degenerate kernel, got {other:?}"),
        }
    }

    #[test]
    fn trapezoid_a_never_below_roundoff_floor() {
        // Worst case Φ(β) = 0: A = r (∫ e^{-rs} - trapezoid(e^{-rs})), a pure
        // quadrature error of order r^3 T dt^2. Check the -1e-10 floor holds
        // even there.
        let p = params();
        let g = grid(60);
        let dt = g.dt();
        for i in 0..g.l1 {
            let big_q = g.l1 - i;
            let tau = g.horizon - g.t(i);
            let trap: f64 = (0..=big_q)
                .map(|q| {
                    let w = if q == 0 || q == big_q { 0.5 * dt } else { dt };
                    (-p.r * q as f64 * dt).exp() * w
                })
                .sum();
            let a = -(-p.r * tau).exp_m1() - p.r * trap;
            assert!(a >= -1e-10, "A floor violated at i = {i}: {a}");
        }
    }

    #[test]
    fn solve_infinite_eta_returns_after_one_iteration() {
        let s = solver(8, QuadRule::Trapezoid);
        let g = s.grid();
        let b0 = BoundarySurface::from_terminal(g, s.params(), &Payoff::Sqrt).unwrap();
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        let run = s.solve(&b0, &m, f64::INFINITY, 7).unwrap();
        assert_eq!(run.errors.len(), 1);
        assert_eq!(run.surface.picard_index, 1);
    }

    #[test]
    fn solve_rejects_bad_tolerance() {
        let s = solver(4, QuadRule::Trapezoid);
        let g = s.grid();
        let b0 = BoundarySurface::from_terminal(g, s.params(), &Payoff::Sqrt).unwrap();
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        assert!(s.solve(&b0, &m, 0.0, 5).is_err());
        assert!(s.solve(&b0, &m, 1e-3, 0).is_err());
    }

    #[test]
    fn fixed_point_residual_bounded_by_final_error() {
        let s = solver(20, QuadRule::Trapezoid);
        let g = s.grid();
        let b0 = BoundarySurface::from_terminal(g, s.params(), &Payoff::Sqrt).unwrap();
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        let run = s.solve(&b0, &m, 1e-10, 60).unwrap();
        let (reapplied, _) = s.update(&run.surface, &m).unwrap();
        let node_wise = reapplied.max_abs_diff(&run.surface);
        assert!(
            node_wise <= run.final_error() + 1e-12,
            "residual {node_wise} exceeds final Picard error {}",
            run.final_error()
        );
    }

    #[test]
    fn value_at_horizon_is_cost() {
        let s = solver(8, QuadRule::Trapezoid);
        let g = s.grid();
        let b = BoundarySurface::from_terminal(g, s.params(), &Payoff::Sqrt).unwrap();
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        for j in 0..g.ny() {
            let u = s.value(g.l1, -3.0, j, &b, &m).unwrap();
            assert_eq!(u, s.params().c0);
        }
    }

    #[test]
    fn value_far_below_boundary_stays_under_cost() {
        let s = solver(16, QuadRule::Trapezoid);
        let g = s.grid();
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        let b0 = BoundarySurface::from_terminal(g, s.params(), &Payoff::Sqrt).unwrap();
        let run = s.solve(&b0, &m, 1e-8, 30).unwrap();
        let b = run.surface;
        for i in [0, g.l1 / 2, g.l1 - 1] {
            let x = b.get(i, 2) - 10.0;
            let u = s.value(i, x, 2, &b, &m).unwrap();
            let floor = (-s.params().r * (g.horizon - g.t(i))).exp() * s.params().c0;
            assert!(u < s.params().c0);
            assert!(u >= floor - 1e-12);
        }
    }

    #[test]
    fn value_far_above_boundary_approaches_cost() {
        let s = solver(16, QuadRule::Trapezoid);
        let g = s.grid();
        let m = MeanField::constant(1.0, g.nt(), g.dt()).unwrap();
        let b = BoundarySurface::from_terminal(g, s.params(), &Payoff::Sqrt).unwrap();
        let u = s.value(3, b.get(3, 1) + 40.0, 1, &b, &m).unwrap();
        assert!((u - s.params().c0).abs() < 1e-6);
    }
}
