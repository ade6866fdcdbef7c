//! Stochastic heat equation `u_t = u_xx + u W'` on `[0, x_max]` with
//! `u(t, 0) = 0`, an explicit finite-difference scheme, and two oracles.

use libm::erfc;
use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::kernels;
use crate::noise::{Grid1D, SheetSource};
use crate::quadrature::{with_context, Adaptive};

/// Abort threshold for `max |u|`.
pub const BLOW_UP: f64 = 1e12;

/// Recorded time rows of a field on the grid nodes, with `v = u/x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionField {
    pub grid: Grid1D,
    /// Time-step index of each recorded row.
    pub steps: Vec<usize>,
    /// Row-major values, `steps.len() x (n_x + 1)`.
    pub u: Vec<f64>,
    /// `u/x_j` for `j >= 1`; column 0 holds the extrapolated boundary slope.
    pub v: Vec<f64>,
    pub seed: u64,
    pub config_hash: Option<String>,
}

impl SolutionField {
    pub fn width(&self) -> usize {
        self.grid.n_x + 1
    }

    pub fn rows(&self) -> usize {
        self.steps.len()
    }

    pub fn u_row(&self, k: usize) -> &[f64] {
        &self.u[k * self.width()..(k + 1) * self.width()]
    }

    pub fn v_row(&self, k: usize) -> &[f64] {
        &self.v[k * self.width()..(k + 1) * self.width()]
    }

    pub fn t(&self, k: usize) -> f64 {
        self.grid.t(self.steps[k])
    }

    /// Row index holding time step `n`, if it was recorded.
    pub fn row_of_step(&self, n: usize) -> Option<usize> {
        self.steps.binary_search(&n).ok()
    }

    /// `u[k][j] / x_j` for `j = 1..=count`.
    pub fn ratio_sequence(&self, k: usize, count: usize) -> Vec<f64> {
        let dx = self.grid.dx();
        self.u_row(k)[1..=count.min(self.grid.n_x)]
            .iter()
            .enumerate()
            .map(|(i, u)| u / ((i + 1) as f64 * dx))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Richardson-extrapolated `du/dx(t, 0)` from the first two interior nodes:
/// `2 u_1/dx - u_2/(2 dx)`. Exact on linear profiles.
#[inline]
pub fn boundary_slope(row: &[f64], dx: f64) -> f64 {
    2.0 * (row[1] / dx) - row[2] / (2.0 * dx)
}

pub fn boundary_derivative(field: &SolutionField, k: usize) -> f64 {
    boundary_slope(field.u_row(k), field.grid.dx())
}

/// Collects every `every`-th row (and the last one).
pub(crate) struct Recorder {
    grid: Grid1D,
    every: usize,
    steps: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Recorder {
    pub(crate) fn new(grid: Grid1D, every: usize) -> Self {
        let rows = grid.n_t / every + 2;
        Self {
            grid,
            every,
            steps: Vec::with_capacity(rows),
            u: Vec::with_capacity(rows * (grid.n_x + 1)),
            v: Vec::with_capacity(rows * (grid.n_x + 1)),
        }
    }

    #[inline]
    pub(crate) fn wants(&self, n: usize) -> bool {
        n % self.every == 0 || n == self.grid.n_t
    }

    pub(crate) fn push(&mut self, n: usize, row: &[f64]) {
        if !self.wants(n) {
            return;
        }
        let dx = self.grid.dx();
        self.steps.push(n);
        self.u.extend_from_slice(row);
        self.v.push(boundary_slope(row, dx));
        self.v
            .extend(row[1..].iter().enumerate().map(|(i, u)| u / ((i + 1) as f64 * dx)));
    }

    pub(crate) fn finish(self, seed: u64) -> SolutionField {
        SolutionField {
            grid: self.grid,
            steps: self.steps,
            u: self.u,
            v: self.v,
            seed,
            config_hash: None,
        }
    }
}

pub(crate) fn initial_row(config: &SimConfig) -> Vec<f64> {
    let g = &config.grid;
    let mut row: Vec<f64> = (0..=g.n_x).map(|j| config.u0.eval(g.x(j))).collect();
    row[0] = 0.0;
    row[g.n_x] = 0.0;
    row
}

pub(crate) fn check_finite(step: usize, row: &[f64]) -> Result<()> {
    for (j, &v) in row.iter().enumerate() {
        if !v.is_finite() || v.abs() > BLOW_UP {
            return Err(Error::BlowUp {
                step,
                node: j,
                value: v,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_sheet(config: &SimConfig, sheet_grid: &Grid1D) -> Result<()> {
    if *sheet_grid != config.grid {
        return Err(Error::ShapeMismatch(format!(
            "sheet grid {sheet_grid:?} differs from configured grid {:?}",
            config.grid
        )));
    }
    Ok(())
}

fn evolve<S: SheetSource>(config: &SimConfig, sheet: Option<&S>) -> Result<SolutionField> {
    let g = config.grid;
    g.validate()?;
    config.u0.validate()?;
    if let Some(s) = sheet {
        check_sheet(config, s.grid())?;
    }
    let (n_x, lambda, inv_dx) = (g.n_x, g.lambda(), 1.0 / g.dx());
    let mut u = initial_row(config);
    let mut next = vec![0.0; n_x + 1];
    let mut dw = vec![0.0; n_x];
    let mut rec = Recorder::new(g, config.record_every);
    rec.push(0, &u);
    for n in 0..g.n_t {
        if let Some(s) = sheet {
            s.fill_row(n, 0, &mut dw);
        }
        for j in 1..n_x {
            next[j] = u[j] + lambda * (u[j + 1] - 2.0 * u[j] + u[j - 1]) + u[j] * dw[j] * inv_dx;
        }
        check_finite(n + 1, &next)?;
        std::mem::swap(&mut u, &mut next);
        rec.push(n + 1, &u);
    }
    Ok(rec.finish(sheet.map_or(0, |s| s.seed())))
}

/// Explicit Euler scheme with multiplicative noise `u_j dW[n][j] / dx`.
pub fn simulate_heat<S: SheetSource>(config: &SimConfig, sheet: &S) -> Result<SolutionField> {
    evolve(config, Some(sheet))
}

/// The same scheme without noise.
pub fn deterministic_heat(config: &SimConfig) -> Result<SolutionField> {
    // a sheet that is never read
    evolve::<crate::noise::SheetIncrements>(config, None)
}

/// `int_z^{z+w} G(tau, r) dr`, evaluated on the side where `erfc` keeps its digits.
fn gauss_cell(tau: f64, z: f64, w: f64) -> f64 {
    let s = 2.0 * tau.sqrt();
    if z >= 0.0 {
        0.5 * (erfc(z / s) - erfc((z + w) / s))
    } else if z + w <= 0.0 {
        0.5 * (erfc(-(z + w) / s) - erfc(-z / s))
    } else {
        1.0 - 0.5 * (erfc(-z / s) + erfc((z + w) / s))
    }
}

/// Discretised mild form
///
/// `u(t_n, x_i) = int p(t_n, x_i, y) u0(y) dy
///              + sum_{m<n} sum_k Pbar_{n-m}(i, k) u(t_m, x_k) dW[m][k]`
///
/// where `Pbar_d(i, k)` is the average of `p(t_n - s, x_i, y)` over
/// `[t_m, t_{m+1}] x [x_k - dx/2, x_k + dx/2]`, the dual cell on which the
/// finite-difference scheme spreads `dW[m][k]`. The stochastic sum uses left-point
/// (Itô) values, so each time slice depends only on earlier slices and the
/// fixed point of the slice map is reached in a single pass.
///
/// Cost is `O(n_t^2 n_x^2)`; intended for coarse grids.
pub fn mild_solution_oracle<S: SheetSource>(config: &SimConfig, sheet: &S) -> Result<SolutionField> {
    let g = config.grid;
    g.validate()?;
    config.u0.validate()?;
    check_sheet(config, sheet.grid())?;
    let (n_x, n_t, dx, dt) = (g.n_x, g.n_t, g.dx(), g.dt());

    // table[d][e + n_x] = mean over tau in [(d-1) dt, d dt] of int_{(e-1/2) dx}^{(e+1/2) dx} G(tau, r) dr
    let quad = Adaptive::new(1e-15, 1e-11);
    let span = 3 * n_x + 1;
    let mut table = vec![0.0; (n_t + 1) * span];
    for d in 1..=n_t {
        let (a, b) = ((d - 1) as f64 * dt, d as f64 * dt);
        for e in 0..span {
            let z = (e as f64 - n_x as f64 - 0.5) * dx;
            // tau = a + (b - a) w^2 resolves the sqrt(tau) behaviour near tau = 0
            let r = quad.integrate(
                |w| {
                    let tau = a + (b - a) * w * w;
                    if tau <= 0.0 {
                        0.0
                    } else {
                        2.0 * w * gauss_cell(tau, z, dx)
                    }
                },
                0.0,
                1.0,
            );
            table[d * span + e] = with_context(r, || format!("kernel cell d = {d}, e = {e}"))?.value;
        }
    }
    let cell_kernel = |d: usize, i: usize, k: usize| -> f64 {
        let direct = table[d * span + (i + n_x) - k];
        let image = table[d * span + i + k + n_x];
        (direct - image) / dx
    };

    // deterministic part by quadrature against the exact kernel
    let u0 = config.u0;
    let support = u0.support_hint().min(g.x_max);
    let det_quad = Adaptive::new(1e-14, 1e-11);
    let mut sources: Vec<Vec<f64>> = Vec::with_capacity(n_t);
    let mut rec = Recorder::new(g, config.record_every);
    let mut row = initial_row(config);
    rec.push(0, &row);
    let mut dw = vec![0.0; n_x];
    for n in 1..=n_t {
        // source term of slice n - 1
        sheet.fill_row(n - 1, 0, &mut dw);
        sources.push(row[..n_x].iter().zip(&dw).map(|(u, w)| u * w).collect());

        let t = g.t(n);
        row.iter_mut().for_each(|v| *v = 0.0);
        for (i, out) in row.iter_mut().enumerate().take(n_x).skip(1) {
            let x = g.x(i);
            let det = if u0.is_zero() || support == 0.0 {
                0.0
            } else {
                let w = t.sqrt();
                let r = det_quad.integrate_with_breaks(
                    |y| kernels::p(t, x, y) * u0.eval(y),
                    &[0.0, (x - 6.0 * w).max(0.0), x, (x + 6.0 * w).min(support), support],
                );
                with_context(r, || format!("deterministic term at t = {t}, x = {x}"))?.value
            };
            let mut noise = 0.0;
            for (m, src) in sources.iter().enumerate() {
                let d = n - m;
                for (k, s) in src.iter().enumerate() {
                    if *s != 0.0 {
                        noise += cell_kernel(d, i, k) * s;
                    }
                }
            }
            *out = det + noise;
        }
        check_finite(n, &row)?;
        rec.push(n, &row);
    }
    Ok(rec.finish(sheet.seed()))
}
