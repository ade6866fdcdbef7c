//! Stochastic Stefan problems in the boundary frame `x -> x - beta(t)`.
//!
//! * Scaled noise: `u_t = u_xx + beta' Psi_L(|beta'|) u_x + sigma(x) W_beta'`,
//!   with `rho beta'(t) = int dp/dx(t,0,y) u0(y) dy + int_0^t int dp/dx(t-s,0,y) sigma(y) W_beta(dy ds)`.
//! * Colored noise: `u_t = u_xx + beta' Psi_L(|beta'|) u_x + u xi'`, with
//!   `rho beta'(t) = du/dx(t, 0)` read off the solution.
//!
//! `beta` integrates the untruncated speed; `Psi_L` only damps the advection
//! term, so runs at different levels coincide until the lower level is hit.

use libm::erfc;
use serde::Serialize;

use crate::config::{DriveMethod, SimConfig};
use crate::error::{Error, Result};
use crate::heat::{boundary_slope, check_finite, check_sheet, initial_row, Recorder, SolutionField};
use crate::kernels;
use crate::noise::{cell_shift, ColoredIncrements, Grid1D, SheetSource};
use crate::profiles::{InitialProfile, ScalingFunction};
use crate::quadrature::{with_context, Adaptive};

/// Samples of the boundary position and speed on the time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPath {
    pub dt: f64,
    pub beta: Vec<f64>,
    pub beta_dot: Vec<f64>,
    /// `Psi_L(|beta_dot|)` applied to the advection term at each step.
    pub psi: Vec<f64>,
    pub level: f64,
    pub tau_index: Option<usize>,
}

impl BoundaryPath {
    /// A boundary that never moves.
    pub fn frozen(grid: &Grid1D, level: f64) -> Self {
        let n = grid.n_t + 1;
        Self {
            dt: grid.dt(),
            beta: vec![0.0; n],
            beta_dot: vec![0.0; n],
            psi: vec![1.0; n],
            level,
            tau_index: None,
        }
    }

    fn with_capacity(grid: &Grid1D, level: f64) -> Self {
        let n = grid.n_t + 1;
        let mut beta = Vec::with_capacity(n);
        beta.push(0.0);
        Self {
            dt: grid.dt(),
            beta,
            beta_dot: Vec::with_capacity(n),
            psi: Vec::with_capacity(n),
            level,
            tau_index: None,
        }
    }

    /// Record the speed at the current step and advance the position.
    fn record(&mut self, beta_dot: f64) -> f64 {
        let psi = psi(beta_dot.abs(), self.level);
        let n = self.beta_dot.len();
        if self.tau_index.is_none() && beta_dot.abs() >= self.level {
            self.tau_index = Some(n);
        }
        self.beta_dot.push(beta_dot);
        self.psi.push(psi);
        let last = *self.beta.last().expect("beta starts at 0");
        if self.beta.len() < self.beta.capacity() {
            self.beta.push(last + self.dt * beta_dot);
        }
        psi
    }

    pub fn stopped(&self, n: usize) -> bool {
        self.tau_index.is_some_and(|tau| n >= tau)
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// Smooth cutoff: 1 on `[0, L]`, 0 on `[L+1, inf)`, quintic smoothstep between.
#[inline]
pub fn psi(z: f64, level: f64) -> f64 {
    let s = (level + 1.0 - z).clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

/// First index with `|beta_dot| >= level`.
pub fn detect_tau(beta_dot: &[f64], level: f64) -> Option<usize> {
    beta_dot.iter().position(|b| b.abs() >= level)
}

/// `int_0^inf dp/dx(t, 0, y) u0(y) dy`; at `t = 0` this is `u0'(0)`.
pub fn initial_drive(t: f64, u0: &InitialProfile) -> Result<f64> {
    if u0.is_zero() {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(u0.boundary_slope());
    }
    let w = t.sqrt();
    let edge = (24.0 * w).min(u0.support_hint().max(1e-300));
    let quad = Adaptive::new(1e-300, 1e-12);
    let pts = [0.0, w, 2.0 * w, 4.0 * w, 8.0 * w, edge];
    let r = quad.integrate_with_breaks(
        |y| {
            if y <= edge {
                kernels::q_at_boundary(t, y) * u0.eval(y)
            } else {
                0.0
            }
        },
        &pts.map(|p| p.min(edge)),
    );
    Ok(with_context(r, || format!("initial drive at t = {t}"))?.value)
}

/// `F(tau, x) = int_0^tau G(s, x) ds`.
fn gauss_time_integral(tau: f64, x: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let a = x.abs();
    (tau / std::f64::consts::PI).sqrt() * (-x * x / (4.0 * tau)).exp() - 0.5 * a * erfc(a / (2.0 * tau.sqrt()))
}

/// Cell averages of `dp/dx(t_n - s, 0, y)` over `[t_m, t_{m+1}] x [x_j, x_{j+1}]`,
/// indexed by lag `d = n - m >= 1` and cell `j`.
#[derive(Debug, Clone)]
pub struct HistoryKernel {
    n_x: usize,
    weights: Vec<f64>,
}

impl HistoryKernel {
    pub fn new(grid: &Grid1D) -> Self {
        let (n_x, n_t, dx, dt) = (grid.n_x, grid.n_t, grid.dx(), grid.dt());
        let mut weights = vec![0.0; (n_t + 1) * n_x];
        // int_{x_j}^{x_{j+1}} dp/dx(tau, 0, y) dy = 2 [G(tau, x_j) - G(tau, x_{j+1})]
        let mut prev: Vec<f64> = vec![0.0; n_x + 1];
        for d in 1..=n_t {
            let cur: Vec<f64> = (0..=n_x)
                .map(|j| gauss_time_integral(d as f64 * dt, j as f64 * dx))
                .collect();
            for j in 0..n_x {
                let dj = cur[j] - prev[j];
                let dj1 = cur[j + 1] - prev[j + 1];
                weights[d * n_x + j] = 2.0 * (dj - dj1) / (dt * dx);
            }
            prev = cur;
        }
        Self { n_x, weights }
    }

    #[inline]
    pub fn lag(&self, d: usize) -> &[f64] {
        &self.weights[d * self.n_x..(d + 1) * self.n_x]
    }
}

/// Stochastic part of the boundary drive.
enum DriveState<'k> {
    History {
        kernel: &'k HistoryKernel,
        /// `sigma(x_j) dW_beta[m][j]` for every past row `m`.
        rows: Vec<f64>,
    },
    Recursive {
        z: Vec<f64>,
        next: Vec<f64>,
    },
}

struct Drive<'k> {
    grid: Grid1D,
    sigma_nodes: Vec<f64>,
    rho: f64,
    u0: InitialProfile,
    state: DriveState<'k>,
    steps: usize,
}

impl<'k> Drive<'k> {
    fn new(config: &SimConfig, kernel: Option<&'k HistoryKernel>) -> Self {
        let g = config.grid;
        let sigma_nodes = (0..g.n_x).map(|j| config.sigma.eval(g.x(j))).collect();
        let state = match (config.drive, kernel) {
            (DriveMethod::History, Some(kernel)) => DriveState::History {
                kernel,
                rows: Vec::with_capacity(g.n_t * g.n_x),
            },
            _ => DriveState::Recursive {
                z: vec![0.0; g.n_x + 1],
                next: vec![0.0; g.n_x + 1],
            },
        };
        Self {
            grid: g,
            sigma_nodes,
            rho: config.rho,
            u0: config.u0,
            state,
            steps: 0,
        }
    }

    /// `beta_dot(t_n)` from the rows absorbed so far (`n` of them).
    fn beta_dot(&self) -> Result<f64> {
        let n = self.steps;
        let det = initial_drive(self.grid.t(n), &self.u0)?;
        let stoch = match &self.state {
            DriveState::History { kernel, rows } => {
                let n_x = self.grid.n_x;
                let mut acc = 0.0;
                for m in 0..n {
                    let w = kernel.lag(n - m);
                    let r = &rows[m * n_x..(m + 1) * n_x];
                    acc += w.iter().zip(r).map(|(a, b)| a * b).sum::<f64>();
                }
                acc
            }
            DriveState::Recursive { z, .. } => boundary_slope(z, self.grid.dx()),
        };
        Ok((det + stoch) / self.rho)
    }

    /// Take row `n` of the shifted sheet.
    fn absorb(&mut self, dw: &[f64]) {
        let g = self.grid;
        match &mut self.state {
            DriveState::History { rows, .. } => {
                rows.extend(self.sigma_nodes.iter().zip(dw).map(|(s, w)| s * w));
            }
            DriveState::Recursive { z, next } => {
                let (lambda, inv_dx) = (g.lambda(), 1.0 / g.dx());
                for j in 1..g.n_x {
                    next[j] = z[j] + lambda * (z[j + 1] - 2.0 * z[j] + z[j - 1]) + self.sigma_nodes[j] * dw[j] * inv_dx;
                }
                std::mem::swap(z, next);
            }
        }
        self.steps += 1;
    }
}

fn check_beta(grid: &Grid1D, n: usize, beta: f64) -> Result<i64> {
    cell_shift(grid, n, beta)
}

fn validate_stefan(config: &SimConfig) -> Result<()> {
    config.grid.validate()?;
    config.u0.validate()?;
    config.check_cfl()?;
    if config.rho == 0.0 || !config.rho.is_finite() {
        return Err(Error::Domain("rho must be finite and nonzero".into()));
    }
    Ok(())
}

/// Boundary path of the scaled problem; the shifted sheet row `n` is
/// `sheet` shifted by `round(beta(t_n)/dx)` cells.
pub fn drive_beta<S: SheetSource>(config: &SimConfig, sheet: &S) -> Result<BoundaryPath> {
    validate_stefan(config)?;
    config.sigma.validate()?;
    check_sheet(config, sheet.grid())?;
    let kernel = (config.drive == DriveMethod::History).then(|| HistoryKernel::new(&config.grid));
    drive_beta_with(config, sheet, kernel.as_ref())
}

/// [`drive_beta`] with a precomputed history kernel (ignored for the recursive route).
pub fn drive_beta_with<S: SheetSource>(
    config: &SimConfig,
    sheet: &S,
    kernel: Option<&HistoryKernel>,
) -> Result<BoundaryPath> {
    let g = config.grid;
    let mut drive = Drive::new(config, kernel);
    let mut path = BoundaryPath::with_capacity(&g, config.level);
    let mut dw = vec![0.0; g.n_x];
    for n in 0..=g.n_t {
        let bd = drive.beta_dot()?;
        if !bd.is_finite() {
            return Err(Error::BlowUp {
                step: n,
                node: 0,
                value: bd,
            });
        }
        path.record(bd);
        if n == g.n_t {
            break;
        }
        let shift = check_beta(&g, n, path.beta[n])?;
        sheet.fill_row(n, shift, &mut dw);
        drive.absorb(&dw);
    }
    check_beta(&g, g.n_t, path.beta[g.n_t])?;
    Ok(path)
}

/// One explicit step of `u_t = u_xx + c u_x` with upwind advection; the noise
/// term is added by the caller.
#[inline]
fn advect_diffuse(u: &[f64], next: &mut [f64], lambda: f64, courant: f64) {
    let n_x = u.len() - 1;
    if courant >= 0.0 {
        for j in 1..n_x {
            next[j] = u[j] + lambda * (u[j + 1] - 2.0 * u[j] + u[j - 1]) + courant * (u[j + 1] - u[j]);
        }
    } else {
        for j in 1..n_x {
            next[j] = u[j] + lambda * (u[j + 1] - 2.0 * u[j] + u[j - 1]) + courant * (u[j] - u[j - 1]);
        }
    }
}

/// Scaled-noise problem: the boundary speed comes from the drive equation,
/// then the transformed field is advanced with the same shifted noise.
pub fn simulate_stefan_scaled<S: SheetSource>(config: &SimConfig, sheet: &S) -> Result<(SolutionField, BoundaryPath)> {
    validate_stefan(config)?;
    config.sigma.validate()?;
    check_sheet(config, sheet.grid())?;
    let kernel = (config.drive == DriveMethod::History).then(|| HistoryKernel::new(&config.grid));
    simulate_stefan_scaled_with(config, sheet, kernel.as_ref())
}

pub fn simulate_stefan_scaled_with<S: SheetSource>(
    config: &SimConfig,
    sheet: &S,
    kernel: Option<&HistoryKernel>,
) -> Result<(SolutionField, BoundaryPath)> {
    let g = config.grid;
    let (n_x, lambda, dt, inv_dx) = (g.n_x, g.lambda(), g.dt(), 1.0 / g.dx());
    let sigma: Vec<f64> = (0..=n_x).map(|j| config.sigma.eval(g.x(j))).collect();
    let mut drive = Drive::new(config, kernel);
    let mut path = BoundaryPath::with_capacity(&g, config.level);
    let mut u = initial_row(config);
    let mut next = vec![0.0; n_x + 1];
    let mut dw = vec![0.0; n_x];
    let mut rec = Recorder::new(g, config.record_every);
    rec.push(0, &u);
    for n in 0..=g.n_t {
        let bd = drive.beta_dot()?;
        if !bd.is_finite() {
            return Err(Error::BlowUp {
                step: n,
                node: 0,
                value: bd,
            });
        }
        let psi = path.record(bd);
        if n == g.n_t {
            break;
        }
        let shift = check_beta(&g, n, path.beta[n])?;
        sheet.fill_row(n, shift, &mut dw);
        advect_diffuse(&u, &mut next, lambda, dt * bd * psi * inv_dx);
        for j in 1..n_x {
            next[j] += sigma[j] * dw[j] * inv_dx;
        }
        check_finite(n + 1, &next)?;
        std::mem::swap(&mut u, &mut next);
        rec.push(n + 1, &u);
        drive.absorb(&dw);
    }
    check_beta(&g, g.n_t, path.beta[g.n_t])?;
    Ok((rec.finish(sheet.seed()), path))
}

/// Advance the scaled-problem field along a prescribed boundary path.
pub fn evolve_scaled_with_path<S: SheetSource>(
    config: &SimConfig,
    sheet: &S,
    path: &BoundaryPath,
) -> Result<SolutionField> {
    let g = config.grid;
    g.validate()?;
    check_sheet(config, sheet.grid())?;
    if path.beta.len() != g.n_t + 1 || path.beta_dot.len() != g.n_t + 1 {
        return Err(Error::ShapeMismatch(format!(
            "path has {} samples, grid needs {}",
            path.beta.len(),
            g.n_t + 1
        )));
    }
    let (n_x, lambda, dt, inv_dx) = (g.n_x, g.lambda(), g.dt(), 1.0 / g.dx());
    let sigma: Vec<f64> = (0..=n_x).map(|j| config.sigma.eval(g.x(j))).collect();
    let mut u = initial_row(config);
    let mut next = vec![0.0; n_x + 1];
    let mut dw = vec![0.0; n_x];
    let mut rec = Recorder::new(g, config.record_every);
    rec.push(0, &u);
    for n in 0..g.n_t {
        let shift = check_beta(&g, n, path.beta[n])?;
        sheet.fill_row(n, shift, &mut dw);
        let bd = path.beta_dot[n];
        advect_diffuse(&u, &mut next, lambda, dt * bd * psi(bd.abs(), path.level) * inv_dx);
        for j in 1..n_x {
            next[j] += sigma[j] * dw[j] * inv_dx;
        }
        check_finite(n + 1, &next)?;
        std::mem::swap(&mut u, &mut next);
        rec.push(n + 1, &u);
    }
    Ok(rec.finish(sheet.seed()))
}

/// Colored-noise problem: the boundary speed is read from the current slice.
pub fn simulate_stefan_colored(
    config: &SimConfig,
    colored: &ColoredIncrements,
) -> Result<(SolutionField, BoundaryPath)> {
    validate_stefan(config)?;
    check_sheet(config, colored.grid())?;
    let g = config.grid;
    let (n_x, lambda, dt, dx) = (g.n_x, g.lambda(), g.dt(), g.dx());
    let mut path = BoundaryPath::with_capacity(&g, config.level);
    let mut u = initial_row(config);
    let mut next = vec![0.0; n_x + 1];
    let mut rec = Recorder::new(g, config.record_every);
    rec.push(0, &u);
    for n in 0..=g.n_t {
        let bd = boundary_slope(&u, dx) / config.rho;
        let psi = path.record(bd);
        check_beta(&g, n, path.beta[n])?;
        if n == g.n_t {
            break;
        }
        advect_diffuse(&u, &mut next, lambda, dt * bd * psi / dx);
        let xi = colored.row(n);
        for j in 1..n_x {
            next[j] += u[j] * xi[j];
        }
        check_finite(n + 1, &next)?;
        std::mem::swap(&mut u, &mut next);
        rec.push(n + 1, &u);
    }
    Ok((rec.finish(0), path))
}

/// Whether `sigma` is acceptable for the scaled problem; re-exported for callers
/// that build scaling functions programmatically.
pub fn validate_scaling(sigma: &ScalingFunction) -> Result<()> {
    sigma.validate()
}
