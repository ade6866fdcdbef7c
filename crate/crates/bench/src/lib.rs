//! Shared fixtures for the criterion benches.

use stefan_core::{Grid1D, Model, SimConfig};

/// Heat configuration on `[0, 4] x [0, 0.1]` with `n_x` cells at `lambda ~ 0.4`.
pub fn heat_config(n_x: usize) -> SimConfig {
    SimConfig::with_grid(Model::Heat, grid(4.0, n_x, 0.1))
}

/// Scaled Stefan configuration on `[0, 10] x [0, t_max]`, with enough steps
/// for the advection rule at the default truncation level.
pub fn stefan_config(n_x: usize, t_max: f64) -> SimConfig {
    let base = SimConfig::with_grid(Model::StefanScaled, grid(10.0, n_x, t_max));
    let dx = base.grid.dx();
    let n_t = base
        .grid
        .n_t
        .max((1.25 * t_max * (base.level + 1.0) / dx).ceil() as usize);
    SimConfig {
        grid: Grid1D::new(10.0, n_x, t_max, n_t).expect("bench grids are stable"),
        ..base
    }
}

fn grid(x_max: f64, n_x: usize, t_max: f64) -> Grid1D {
    let dx = x_max / n_x as f64;
    let n_t = (t_max / (0.4 * dx * dx)).ceil() as usize;
    Grid1D::new(x_max, n_x, t_max, n_t).expect("bench grids are stable")
}
