//! Grid-valued state: the free-boundary surface `b(t_i, y_j)` and the
//! mean-field curve `m(t_i)` with its running integral.

use crate::error::MfgError;
use crate::model::{terminal_boundary, Grid, ModelParams, Payoff};

/// The free boundary tabulated on the time/capacity grid,
/// `(l1 + 1) x (l2 + 1)` entries in log-price units, row-major in time.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySurface {
    grid: Grid,
    values: Vec<f64>,
    /// Outer (game) iteration that produced this surface.
    pub game_index: usize,
    /// Inner (Picard) iteration that produced this surface.
    pub picard_index: usize,
}

impl BoundarySurface {
    /// Surface with every time row set to the terminal boundary `x̄(y_j)`.
    /// This is both the cold-start iterate and the pinned terminal row.
    pub fn from_terminal(
        grid: &Grid,
        params: &ModelParams,
        payoff: &Payoff,
    ) -> Result<Self, MfgError> {
        let mut row = Vec::with_capacity(grid.ny());
        for j in 0..grid.ny() {
            row.push(terminal_boundary(params, payoff, grid.y(j))?);
        }
        let mut values = Vec::with_capacity(grid.nt() * grid.ny());
        for _ in 0..grid.nt() {
            values.extend_from_slice(&row);
        }
        Ok(Self {
            grid: *grid,
            values,
            game_index: 0,
            picard_index: 0,
        })
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, MfgError> {
        if values.len() != grid.nt() * grid.ny() {
            return Err(MfgError::GridMismatch(format!(
                "surface needs {} values, got {}",
                grid.nt() * grid.ny(),
                values.len()
            )));
        }
        Ok(Self {
            grid: *grid,
            values,
            game_index: 0,
            picard_index: 0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.ny() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let ny = self.grid.ny();
        self.values[i * ny + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let ny = self.grid.ny();
        &self.values[i * ny..(i + 1) * ny]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let ny = self.grid.ny();
        &mut self.values[i * ny..(i + 1) * ny]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One time slice for a fixed capacity index, length `l1 + 1`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.grid.nt()).map(|i| self.get(i, j)).collect()
    }

    /// Unweighted Frobenius distance over all grid nodes.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Shifts every entry by a constant. Test helper for the drift-invariance
    /// property of the kernels.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v += delta;
        }
        out
    }

    /// In-place isotonic projection: within each time row a running max over
    /// the capacity direction, then a backward running max in time so that
    /// rows are non-increasing toward the horizon. The terminal row is left
    /// untouched.
    pub fn project_isotonic(&mut self) {
        let (nt, ny) = (self.grid.nt(), self.grid.ny());
        for i in 0..nt {
            let row = self.row_mut(i);
            for j in 1..ny {
                if row[j] < row[j - 1] {
                    row[j] = row[j - 1];
                }
            }
        }
        for i in (0..nt - 1).rev() {
            for j in 0..ny {
                let below = self.get(i + 1, j);
                if self.get(i, j) < below {
                    self.set(i, j, below);
                }
            }
        }
    }
}

/// The mean-field curve `m(t_i)` in `[0, 1]` together with its cumulative
/// trapezoid integral `M_i ~ ∫_0^{t_i} m(u) du`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanField {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl MeanField {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self, MfgError> {
        if values.is_empty() {
            return Err(MfgError::Config("mean field must not be empty".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(MfgError::Config(format!(
                    "mean field value m(t_{i}) = {v} outside [0, 1]"
                )));
            }
        }
        let cumulative = cumulative_trapezoid(&values, dt);
        Ok(Self { values, cumulative })
    }

    /// Constant curve, e.g. the scheme initializer `m ≡ 1`.
    pub fn constant(value: f64, len: usize, dt: f64) -> Result<Self, MfgError> {
        Self::new(vec![value; len], dt)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    #[inline]
    pub fn cumulative(&self, i: usize) -> f64 {
        self.cumulative[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cumulative_all(&self) -> &[f64] {
        &self.cumulative
    }
}

/// Running trapezoid integral with `M_0 = 0`:
/// `M_i = M_{i-1} + (m_i + m_{i-1}) dt / 2`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dt;
        out.push(acc);
    }
    out
}
