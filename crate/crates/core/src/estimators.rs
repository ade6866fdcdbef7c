//! Ensemble statistics: structure functions, moment-implied Hölder indices,
//! Stefan-condition residuals and mean-vs-oracle z-scores.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::heat::{boundary_derivative, SolutionField};
use crate::regularity::{fit_exponent, PowerFit};
use crate::stefan::BoundaryPath;

/// Smallest ensemble for which a structure-function fit is asserted.
pub const MIN_FIT_PATHS: usize = 30;
/// Smallest ensemble accepted by [`mean_check`].
pub const MIN_MEAN_PATHS: usize = 1000;
/// Floor added to `|rho beta_dot|` in relative residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureMode {
    /// `|v(t, h) - v(t, 0+)|^{2p}` against the spatial lag `h`.
    Boundary,
    /// `|v(t + k, x) - v(t, x)|^{2p}` against the time lag `k`.
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureCurve {
    /// Moment order `2p`.
    pub order: u32,
    pub mode: StructureMode,
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub paths: usize,
}

impl StructureCurve {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.lags.iter().copied().zip(self.values.iter().copied()).collect()
    }

    pub fn fit(&self) -> Result<PowerFit> {
        fit_exponent(&self.points())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let f = c.abs().powi(self.order as i32);
        Self {
            values: self.values.iter().map(|v| v * f).collect(),
            ..self.clone()
        }
    }
}

/// Which recorded rows and grid nodes enter a structure function.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub rows: Range<usize>,
    pub nodes: Range<usize>,
}

impl Window {
    /// Every recorded row from `first_row` on, every interior node.
    pub fn from_row(field: &SolutionField, first_row: usize) -> Self {
        Self {
            rows: first_row..field.rows(),
            nodes: 1..field.grid.n_x,
        }
    }
}

fn check_order(order: u32) -> Result<()> {
    if order != 2 && order != 4 {
        return Err(Error::Domain(format!("moment order must be 2 or 4, got {order}")));
    }
    Ok(())
}

fn check_lags(lags: &[usize]) -> Result<()> {
    if lags.is_empty() || lags[0] == 0 || lags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("lags must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Empirical moment curve of `v` over an ensemble.
///
/// Boundary mode uses spatial lags `h = lag dx` at rows in `window.rows`.
/// Time mode uses row lags; the recorded stride must be uniform over the
/// window (the trailing irregular row, if any, is skipped).
pub fn structure_function(
    fields: &[SolutionField],
    order: u32,
    mode: StructureMode,
    lags: &[usize],
    window: &Window,
) -> Result<StructureCurve> {
    check_order(order)?;
    check_lags(lags)?;
    let first = fields.first().ok_or(Error::TooFewPaths { got: 0, need: 1 })?;
    for f in fields {
        if f.grid != first.grid || f.steps != first.steps {
            return Err(Error::ShapeMismatch(
                "ensemble members differ in grid or recorded steps".into(),
            ));
        }
    }
    let g = first.grid;
    if window.rows.end > first.rows() || window.nodes.end > g.n_x + 1 || window.rows.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "window {window:?} exceeds {} rows x {} nodes",
            first.rows(),
            g.n_x + 1
        )));
    }
    let p = order as i32;
    let mut values = Vec::with_capacity(lags.len());
    let mut lag_values = Vec::with_capacity(lags.len());
    match mode {
        StructureMode::Boundary => {
            for &h in lags {
                if h > g.n_x {
                    return Err(Error::Domain(format!("spatial lag {h} exceeds n_x = {}", g.n_x)));
                }
                let (mut acc, mut count) = (0.0, 0usize);
                for f in fields {
                    for r in window.rows.clone() {
                        let v = f.v_row(r);
                        acc += (v[h] - v[0]).abs().powi(p);
                        count += 1;
                    }
                }
                lag_values.push(h as f64 * g.dx());
                values.push(acc / count as f64);
            }
        }
        StructureMode::Time => {
            let steps = &first.steps;
            let stride = steps[window.rows.start + 1.min(window.rows.len() - 1)] - steps[window.rows.start];
            for &k in lags {
                let (mut acc, mut count) = (0.0, 0usize);
                for f in fields {
                    for r in window.rows.start..window.rows.end.saturating_sub(k) {
                        if steps[r + k] - steps[r] != k * stride {
                            continue;
                        }
                        let (a, b) = (f.v_row(r), f.v_row(r + k));
                        for j in window.nodes.clone() {
                            acc += (b[j] - a[j]).abs().powi(p);
                            count += 1;
                        }
                    }
                }
                if count == 0 {
                    return Err(Error::Domain(format!("time lag {k} leaves no pairs in the window")));
                }
                lag_values.push((k * stride) as f64 * g.dt());
                values.push(acc / count as f64);
            }
        }
    }
    Ok(StructureCurve {
        order,
        mode,
        lags: lag_values,
        values,
        paths: fields.len(),
    })
}

/// Time-mode curve of the boundary speed, over steps `n >= start`.
pub fn speed_structure_function(
    paths: &[BoundaryPath],
    order: u32,
    lags: &[usize],
    start: usize,
) -> Result<StructureCurve> {
    check_order(order)?;
    check_lags(lags)?;
    let first = paths.first().ok_or(Error::TooFewPaths { got: 0, need: 1 })?;
    let len = first.beta_dot.len();
    if paths.iter().any(|p| p.beta_dot.len() != len || p.dt != first.dt) {
        return Err(Error::ShapeMismatch("boundary paths differ in length or step".into()));
    }
    let p = order as i32;
    let mut values = Vec::with_capacity(lags.len());
    for &k in lags {
        if start + k >= len {
            return Err(Error::Domain(format!("lag {k} leaves no pairs after step {start}")));
        }
        let mut acc = 0.0;
        for path in paths {
            let b = &path.beta_dot;
            acc += (start..len - k).map(|n| (b[n + k] - b[n]).abs().powi(p)).sum::<f64>();
        }
        values.push(acc / (paths.len() * (len - k - start)) as f64);
    }
    Ok(StructureCurve {
        order,
        mode: StructureMode::Time,
        lags: lags.iter().map(|&k| k as f64 * first.dt).collect(),
        values,
        paths: paths.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEstimate {
    /// `slope / 2p`.
    pub index: f64,
    pub stderr: f64,
    pub fit: PowerFit,
}

pub fn holder_from_moments(curve: &StructureCurve) -> Result<HolderEstimate> {
    if curve.values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Degenerate("structure curve has zero values".into()));
    }
    let fit = curve.fit()?;
    let o = curve.order as f64;
    Ok(HolderEstimate {
        index: fit.slope / o,
        stderr: fit.slope_stderr / o,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSeries {
    pub t: Vec<f64>,
    /// `du/dx(t, 0) - rho beta_dot(t)`.
    pub residual: Vec<f64>,
    /// `|residual| / (|rho beta_dot| + floor)`.
    pub relative: Vec<f64>,
}

impl ResidualSeries {
    /// Median relative residual over recorded times in `[t0, t1]`.
    pub fn median_relative(&self, t0: f64, t1: f64) -> Option<f64> {
        let mut r: Vec<f64> = self
            .t
            .iter()
            .zip(&self.relative)
            .filter(|(t, _)| **t >= t0 && **t <= t1)
            .map(|(_, r)| *r)
            .collect();
        median(&mut r)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Stefan-condition residual at every recorded row of `field`.
pub fn stefan_residual(field: &SolutionField, path: &BoundaryPath, rho: f64) -> Result<ResidualSeries> {
    if path.beta_dot.len() != field.grid.n_t + 1 {
        return Err(Error::ShapeMismatch(format!(
            "path has {} samples, field grid has {} steps",
            path.beta_dot.len(),
            field.grid.n_t
        )));
    }
    let mut out = ResidualSeries {
        t: Vec::with_capacity(field.rows()),
        residual: Vec::with_capacity(field.rows()),
        relative: Vec::with_capacity(field.rows()),
    };
    for k in 0..field.rows() {
        let target = rho * path.beta_dot[field.steps[k]];
        let r = boundary_derivative(field, k) - target;
        out.t.push(field.t(k));
        out.residual.push(r);
        out.relative.push(r.abs() / (target.abs() + RESIDUAL_FLOOR));
    }
    Ok(out)
}

/// Per-node running mean and variance (Welford), mergeable across blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanAccumulator {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MeanAccumulator {
    pub fn new(nodes: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; nodes],
            m2: vec![0.0; nodes],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} nodes, accumulator {}",
                sample.len(),
                self.mean.len()
            )));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
        Ok(())
    }

    /// Combine with a disjoint block of samples.
    pub fn merge(&mut self, other: &MeanAccumulator) -> Result<()> {
        if other.mean.len() != self.mean.len() {
            return Err(Error::ShapeMismatch("accumulators differ in size".into()));
        }
        if other.count == 0 {
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    /// Standard error of the mean at each node.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.m2.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanReport {
    pub paths: usize,
    pub z: Vec<f64>,
    pub max_abs_z: f64,
    pub fraction_above_3: f64,
    /// Fewer than 1% of nodes with `|z| > 3`.
    pub passed: bool,
}

/// z-scores of the ensemble mean against an oracle. Nodes with zero spread
/// score 0 when the mean equals the oracle and infinity otherwise.
pub fn mean_check(acc: &MeanAccumulator, oracle: &[f64]) -> Result<MeanReport> {
    if acc.count < MIN_MEAN_PATHS {
        return Err(Error::TooFewPaths {
            got: acc.count,
            need: MIN_MEAN_PATHS,
        });
    }
    if oracle.len() != acc.mean.len() {
        return Err(Error::ShapeMismatch(format!(
            "oracle has {} nodes, ensemble {}",
            oracle.len(),
            acc.mean.len()
        )));
    }
    let z: Vec<f64> = acc
        .mean
        .iter()
        .zip(acc.stderr())
        .zip(oracle)
        .map(|((m, se), o)| {
            let d = m - o;
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let above = z.iter().filter(|v| v.abs() > 3.0).count();
    let fraction = above as f64 / z.len().max(1) as f64;
    Ok(MeanReport {
        paths: acc.count,
        max_abs_z: z.iter().fold(0.0, |m, v| m.max(v.abs())),
        fraction_above_3: fraction,
        passed: fraction < 0.01,
        z,
    })
}

/// [`mean_check`] over whole fields, every recorded row and node.
pub fn mean_check_fields(fields: &[SolutionField], oracle: &SolutionField) -> Result<MeanReport> {
    let mut acc = MeanAccumulator::new(oracle.u.len());
    for f in fields {
        if f.grid != oracle.grid || f.steps != oracle.steps {
            return Err(Error::ShapeMismatch(
                "ensemble member differs from oracle layout".into(),
            ));
        }
        acc.push(&f.u)?;
    }
    mean_check(&acc, &oracle.u)
}
