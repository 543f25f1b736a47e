//! Model primitives: economic parameters, the running-profit payoff, the
//! discretization grids, and the terminal action boundary.
//!
//! The running profit has the multiplicative form `f(x, y) = e^x g(y)` with
//! `g` strictly increasing and strictly concave, so its marginal value in the
//! capacity direction is `∂_y f(x, y) = e^x g'(y)`. The terminal boundary is
//! the log-price at which that marginal value matches the user cost of
//! capital `r c0`.

use std::fmt;
use std::sync::Arc;

use crate::error::MfgError;

/// Scalar model parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Discount rate (1/time, >= 0).
    pub r: f64,
    /// Unit investment cost (> 0).
    pub c0: f64,
    /// Volatility of the log-price (> 0).
    pub sigma: f64,
    /// Time horizon (> 0).
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(r: f64, c0: f64, sigma: f64, horizon: f64) -> Result<Self, MfgError> {
        let p = Self {
            r,
            c0,
            sigma,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MfgError> {
        if !self.r.is_finite() || self.r < 0.0 {
            return Err(MfgError::Config(format!("r must be >= 0, got {}", self.r)));
        }
        if !(self.c0 > 0.0) {
            return Err(MfgError::Config(format!("c0 must be > 0, got {}", self.c0)));
        }
        if !(self.sigma > 0.0) {
            return Err(MfgError::Config(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(MfgError::Config(format!(
                "T must be > 0, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

type PayoffFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Profit level `g(y)` and marginal profit `g'(y)` on `(0, 1]`.
///
/// The derivative is supplied explicitly rather than differenced numerically:
/// it enters the boundary equation directly and a finite difference is
/// ill-conditioned near the lower capacity cutoff where `g'` blows up.
#[derive(Clone)]
pub enum Payoff {
    /// `g(y) = sqrt(y)`, `g'(y) = 1 / (2 sqrt(y))`.
    Sqrt,
    /// User-supplied `(g, g')` pair.
    Custom { g: PayoffFn, g_prime: PayoffFn },
}

impl Payoff {
    pub fn g(&self, y: f64) -> f64 {
        match self {
            Payoff::Sqrt => y.sqrt(),
            Payoff::Custom { g, .. } => g(y),
        }
    }

    pub fn g_prime(&self, y: f64) -> f64 {
        match self {
            Payoff::Sqrt => 0.5 / y.sqrt(),
            Payoff::Custom { g_prime, .. } => g_prime(y),
        }
    }

    /// Checks `g' > 0` and strict decrease of `g'` on the capacity grid.
    pub fn validate_on(&self, grid: &Grid) -> Result<(), MfgError> {
        let mut prev = f64::INFINITY;
        for j in 0..=grid.l2 {
            let y = grid.y(j);
            let gp = self.g_prime(y);
            if !(gp > 0.0) || !gp.is_finite() {
                return Err(MfgError::Config(format!(
                    "g'({y}) = {gp}; marginal profit must be finite and positive"
                )));
            }
            if gp >= prev {
                return Err(MfgError::Config(format!(
                    "g' must be strictly decreasing on the grid; violated at y = {y}"
                )));
            }
            prev = gp;
        }
        Ok(())
    }
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Sqrt => write!(f, "Payoff::Sqrt"),
            Payoff::Custom { .. } => write!(f, "Payoff::Custom"),
        }
    }
}

/// Equally spaced partitions of time, capacity, and log-price.
///
/// Node formulas pin the endpoints exactly: `t_0 = 0`, `t_{l1} = T`,
/// `y_{l2} = 1`, `x_0 = x_min`, `x_{l3} = x_max` are bit-exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    pub y0: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub horizon: f64,
}

impl Grid {
    pub fn new(
        l1: usize,
        l2: usize,
        l3: usize,
        y0: f64,
        x_min: f64,
        x_max: f64,
        horizon: f64,
    ) -> Result<Self, MfgError> {
        let g = Self {
            l1,
            l2,
            l3,
            y0,
            x_min,
            x_max,
            horizon,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), MfgError> {
        if self.l1 == 0 || self.l2 == 0 || self.l3 == 0 {
            return Err(MfgError::Config(format!(
                "l1, l2, l3 must be positive, got ({}, {}, {})",
                self.l1, self.l2, self.l3
            )));
        }
        if !(self.y0 > 0.0 && self.y0 < 1.0) {
            return Err(MfgError::Config(format!(
                "y0 must lie in (0, 1), got {}",
                self.y0
            )));
        }
        if !(self.x_min < self.x_max) {
            return Err(MfgError::Config(format!(
                "x_min must be < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(MfgError::Config(format!(
                "T must be > 0, got {}",
                self.horizon
            )));
        }
        if !(self.dt() > 0.0 && self.dy() > 0.0 && self.dx() > 0.0) {
            return Err(MfgError::Config("all meshes must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.l1 as f64
    }

    pub fn dy(&self) -> f64 {
        (1.0 - self.y0) / self.l2 as f64
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.l3 as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        debug_assert!(i <= self.l1);
        if i == self.l1 {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        debug_assert!(j <= self.l2);
        if j == self.l2 {
            1.0
        } else {
            self.y0 + j as f64 * self.dy()
        }
    }

    pub fn x(&self, k: usize) -> f64 {
        debug_assert!(k <= self.l3);
        if k == self.l3 {
            self.x_max
        } else {
            self.x_min + k as f64 * self.dx()
        }
    }

    /// Number of time nodes, `l1 + 1`.
    pub fn nt(&self) -> usize {
        self.l1 + 1
    }

    /// Number of capacity nodes, `l2 + 1`.
    pub fn ny(&self) -> usize {
        self.l2 + 1
    }

    /// Number of log-price nodes, `l3 + 1`.
    pub fn nx(&self) -> usize {
        self.l3 + 1
    }
}

/// Terminal action boundary: the log-price `x̄(y)` solving
/// `∂_y f(x̄, y) = r c0`, i.e. `x̄(y) = log(r c0) - log(g'(y))`.
///
/// Undefined for `r = 0` (the boundary escapes to -∞), which is rejected as a
/// configuration error.
pub fn terminal_boundary(params: &ModelParams, payoff: &Payoff, y: f64) -> Result<f64, MfgError> {
    if !(params.r > 0.0) {
        return Err(MfgError::Config(
            "terminal boundary is undefined for r = 0".into(),
        ));
    }
    if !(y > 0.0 && y <= 1.0) {
        return Err(MfgError::Config(format!("y must lie in (0, 1], got {y}")));
    }
    let gp = payoff.g_prime(y);
    if !(gp > 0.0) || !gp.is_finite() {
        return Err(MfgError::Config(format!(
            "g'({y}) = {gp}; marginal profit must be finite and positive"
        )));
    }
    Ok((params.r * params.c0).ln() - gp.ln())
}
