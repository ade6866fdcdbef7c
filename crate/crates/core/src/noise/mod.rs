//! Discrete Brownian-sheet increments, spatially colored noise and
//! boundary-shifted sheets.
//!
//! A sheet cell `(n, j)` carries `W([t_n, t_{n+1}] x [x_j, x_{j+1}])`, a centered
//! Gaussian with variance `dt*dx`. Cells are produced by a counter-based
//! generator, so a sheet can be used lazily ([`CounterSheet`]) or
//! materialized ([`SheetIncrements`]) with bit-identical values.

mod grid;
pub mod rng;

pub use grid::Grid1D;

use crate::error::{Error, Result};
use crate::stefan::BoundaryPath;

/// Read access to the rows of a space-time noise sheet.
pub trait SheetSource: Sync {
    fn grid(&self) -> &Grid1D;

    fn seed(&self) -> u64;

    /// Fill `out[j] = dW[n][j + shift]` for `j in 0..out.len()`.
    ///
    /// Indices outside `0..n_x` are virtual cells of the unbounded sheet.
    fn fill_row(&self, n: usize, shift: i64, out: &mut [f64]);
}

/// How a materialized sheet answers for cells outside its stored block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exterior {
    /// Fresh independent draws keyed by `(seed, n, virtual index)`.
    Fresh,
    /// The sheet is identically zero beyond its block.
    Zero,
}

/// Lazily generated sheet; rows are recomputed on every request.
#[derive(Debug, Clone, Copy)]
pub struct CounterSheet {
    grid: Grid1D,
    seed: u64,
    scale: f64,
}

impl CounterSheet {
    pub fn new(grid: Grid1D, seed: u64) -> Result<Self> {
        grid.validate()?;
        let scale = (grid.dt() * grid.dx()).sqrt();
        Ok(Self { grid, seed, scale })
    }

    #[inline]
    pub fn cell(&self, n: usize, j: i64) -> f64 {
        self.scale * rng::standard_normal(self.seed, n, j)
    }

    pub fn materialize(&self) -> SheetIncrements {
        let mut cells = vec![0.0; self.grid.cell_count()];
        for (n, row) in cells.chunks_mut(self.grid.n_x).enumerate() {
            self.fill_row(n, 0, row);
        }
        SheetIncrements {
            grid: self.grid,
            seed: self.seed,
            cells,
            exterior: Exterior::Fresh,
        }
    }
}

impl SheetSource for CounterSheet {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn fill_row(&self, n: usize, shift: i64, out: &mut [f64]) {
        let row = rng::row_key(self.seed, n);
        for (j, v) in out.iter_mut().enumerate() {
            *v = self.scale * rng::normal_from_row(row, j as i64 + shift);
        }
    }
}

/// Materialized sheet increments, row-major `cells[n * n_x + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetIncrements {
    grid: Grid1D,
    seed: u64,
    cells: Vec<f64>,
    exterior: Exterior,
}

/// Sample the sheet on `grid`; the result depends only on `(grid, seed)`.
pub fn sample_sheet(grid: &Grid1D, seed: u64) -> Result<SheetIncrements> {
    Ok(CounterSheet::new(*grid, seed)?.materialize())
}

impl SheetIncrements {
    /// The zero sheet (no noise anywhere, including beyond the grid edge).
    pub fn zeros(grid: &Grid1D) -> Self {
        Self {
            grid: *grid,
            seed: 0,
            cells: vec![0.0; grid.cell_count()],
            exterior: Exterior::Zero,
        }
    }

    pub fn from_cells(grid: &Grid1D, seed: u64, cells: Vec<f64>, exterior: Exterior) -> Result<Self> {
        if cells.len() != grid.cell_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} cells, got {}",
                grid.cell_count(),
                cells.len()
            )));
        }
        Ok(Self {
            grid: *grid,
            seed,
            cells,
            exterior,
        })
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn exterior(&self) -> Exterior {
        self.exterior
    }

    #[inline]
    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.cells[n * self.grid.n_x + j]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.cells[n * self.grid.n_x..(n + 1) * self.grid.n_x]
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            cells: self.cells.iter().map(|w| a * w).collect(),
            ..self.clone()
        }
    }

    /// Aggregate blocks of `space x time` cells into one coarse cell.
    ///
    /// Sums of independent cells are again sheet increments, so the coarse
    /// sheet is a sample of the same Brownian sheet on the coarse grid.
    pub fn coarsened(&self, space: usize, time: usize) -> Result<Self> {
        let g = self.grid;
        if space == 0 || time == 0 || g.n_x % space != 0 || g.n_t % time != 0 {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {}x{} cells by ({space}, {time})",
                g.n_x, g.n_t
            )));
        }
        let coarse = Grid1D::new(g.x_max, g.n_x / space, g.t_max, g.n_t / time)?;
        let mut cells = vec![0.0; coarse.cell_count()];
        for n in 0..g.n_t {
            let cn = n / time;
            for j in 0..g.n_x {
                cells[cn * coarse.n_x + j / space] += self.get(n, j);
            }
        }
        Ok(Self {
            grid: coarse,
            seed: self.seed,
            cells,
            exterior: self.exterior,
        })
    }

    #[inline]
    fn exterior_cell(&self, n: usize, j: i64) -> f64 {
        match self.exterior {
            Exterior::Zero => 0.0,
            Exterior::Fresh => (self.grid.dt() * self.grid.dx()).sqrt() * rng::standard_normal(self.seed, n, j),
        }
    }
}

impl SheetSource for SheetIncrements {
    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn fill_row(&self, n: usize, shift: i64, out: &mut [f64]) {
        let n_x = self.grid.n_x as i64;
        let row = self.row(n);
        for (j, v) in out.iter_mut().enumerate() {
            let k = j as i64 + shift;
            *v = if (0..n_x).contains(&k) {
                row[k as usize]
            } else {
                self.exterior_cell(n, k)
            };
        }
    }
}

/// Whole-cell shift applied to row `n` for boundary position `beta`.
pub fn cell_shift(grid: &Grid1D, step: usize, beta: f64) -> Result<i64> {
    if !beta.is_finite() || beta.abs() > grid.x_max {
        return Err(Error::DomainExhausted {
            step,
            beta,
            x_max: grid.x_max,
        });
    }
    Ok((beta / grid.dx()).round() as i64)
}

/// Re-index each row by the boundary position: row `n` of the result is
/// row `n` of `sheet` shifted by `round(beta(t_n)/dx)` cells, i.e. the sheet
/// seen from the moving frame `x -> x + beta(t)`.
pub fn shifted_sheet<S: SheetSource>(sheet: &S, path: &BoundaryPath) -> Result<SheetIncrements> {
    let grid = *sheet.grid();
    if path.beta.len() < grid.n_t {
        return Err(Error::ShapeMismatch(format!(
            "boundary path has {} samples, sheet has {} rows",
            path.beta.len(),
            grid.n_t
        )));
    }
    let mut cells = vec![0.0; grid.cell_count()];
    for (n, row) in cells.chunks_mut(grid.n_x).enumerate() {
        let shift = cell_shift(&grid, n, path.beta[n])?;
        sheet.fill_row(n, shift, row);
    }
    Ok(SheetIncrements {
        grid,
        seed: sheet.seed(),
        cells,
        exterior: Exterior::Fresh,
    })
}

/// Smooth, even, L2-normalized Gaussian bump `(pi l^2)^(-1/4) exp(-x^2/(2 l^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    scale: f64,
}

impl Mollifier {
    /// Support radius in units of the length scale; `eta^2` is below 1e-15 of
    /// its peak beyond it.
    pub const RADIUS_SCALES: f64 = 6.0;

    pub fn gaussian(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!(
                "mollifier length scale must be positive, got {scale}"
            )));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn radius(&self) -> f64 {
        Self::RADIUS_SCALES * self.scale
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let l = self.scale;
        (std::f64::consts::PI * l * l).powf(-0.25) * (-x * x / (2.0 * l * l)).exp()
    }
}

/// Per-step increments of the colored field at the grid nodes,
/// `cells[n * (n_x + 1) + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredIncrements {
    grid: Grid1D,
    cells: Vec<f64>,
}

impl ColoredIncrements {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self {
            grid: *grid,
            cells: vec![0.0; (grid.n_x + 1) * grid.n_t],
        }
    }

    #[inline]
    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.cells[n * (self.grid.n_x + 1) + j]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.grid.n_x + 1;
        &self.cells[n * w..(n + 1) * w]
    }
}

/// Midpoint-rule convolution of the sheet with the mollifier over the
/// half-line: `dxi[n][j] = sum_k eta(x_j - y_k) dW[n][k]`, `y_k = (k + 1/2) dx`.
pub fn colored_increments<S: SheetSource>(sheet: &S, eta: &Mollifier) -> Result<ColoredIncrements> {
    let grid = *sheet.grid();
    let dx = grid.dx();
    let cells_in_radius = eta.radius() / dx;
    if cells_in_radius < 8.0 {
        return Err(Error::UnderResolvedMollifier {
            radius: eta.radius(),
            cells: cells_in_radius,
        });
    }
    // x_j - y_k = (j - k - 1/2) dx depends on d = j - k only.
    let reach = cells_in_radius.floor() as i64 + 1;
    let weights: Vec<(i64, f64)> = (-reach..=reach)
        .filter_map(|d| {
            let r = (d as f64 - 0.5) * dx;
            (r.abs() <= eta.radius()).then(|| (d, eta.eval(r)))
        })
        .collect();

    let width = grid.n_x + 1;
    let mut cells = vec![0.0; width * grid.n_t];
    let mut w_row = vec![0.0; grid.n_x];
    for n in 0..grid.n_t {
        sheet.fill_row(n, 0, &mut w_row);
        let out = &mut cells[n * width..(n + 1) * width];
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(d, w) in &weights {
                let k = j as i64 - d;
                if k >= 0 && (k as usize) < grid.n_x {
                    acc += w * w_row[k as usize];
                }
            }
            *o = acc;
        }
    }
    Ok(ColoredIncrements { grid, cells })
}
