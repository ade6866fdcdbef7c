use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform space-time grid on `[0, x_max] x [0, t_max]`.
///
/// Nodes are `x_j = j*dx` for `j = 0..=n_x` and `t_n = n*dt` for `n = 0..=n_t`.
/// Cell `(n, j)` is `[t_n, t_{n+1}] x [x_j, x_{j+1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub x_max: f64,
    pub n_x: usize,
    pub t_max: f64,
    pub n_t: usize,
}

impl Grid1D {
    pub fn new(x_max: f64, n_x: usize, t_max: f64, n_t: usize) -> Result<Self> {
        let grid = Self { x_max, n_x, t_max, n_t };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max.is_finite() && self.x_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "x_max must be positive, got {}",
                self.x_max
            )));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if self.n_x < 4 {
            return Err(Error::InvalidGrid(format!("n_x must be >= 4, got {}", self.n_x)));
        }
        if self.n_t < 4 {
            return Err(Error::InvalidGrid(format!("n_t must be >= 4, got {}", self.n_t)));
        }
        let limit = 0.5 * self.dx() * self.dx();
        if self.dt() >= limit {
            return Err(Error::Stability { dt: self.dt(), limit });
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.x_max / self.n_x as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_max / self.n_t as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Diffusion number `dt/dx^2`.
    pub fn lambda(&self) -> f64 {
        self.dt() / (self.dx() * self.dx())
    }

    pub fn cell_count(&self) -> usize {
        self.n_x * self.n_t
    }

    /// Next rung of a parabolic refinement ladder: `dx/2`, `dt/4`.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.x_max, self.n_x * 2, self.t_max, self.n_t * 4)
    }

    /// Upper bound on the half-line truncation error of the Gaussian kernels.
    pub fn truncation_error_estimate(&self) -> f64 {
        (-self.x_max * self.x_max / (4.0 * self.t_max)).exp()
    }

    /// Smallest step count `n_t` with `dt <= safety * dx^2 / 2` for the given space grid.
    pub fn steps_for(x_max: f64, n_x: usize, t_max: f64, safety: f64) -> usize {
        let dx = x_max / n_x as f64;
        let dt = safety * 0.5 * dx * dx;
        ((t_max / dt).ceil() as usize).max(4)
    }
}
