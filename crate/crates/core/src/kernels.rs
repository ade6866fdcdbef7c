//! Dirichlet heat kernel of `u_t = u_xx` on the half-line and its derived kernels.
//!
//! With `G(t, z) = (4 pi t)^(-1/2) exp(-z^2 / (4t))`:
//!
//! * `p(t,x,y)  = G(x-y) - G(x+y)`
//! * `q(t,x,y)  = dp/dx = [(y-x) G(x-y) + (x+y) G(x+y)] / (2t)`
//! * `p+(t,x,y) = G(x-y) + G(x+y)`
//! * `pt(t,x,y) = (y/x) p`, with `pt(t,0,y) = y q(t,0,y)`
//! * `qt(t,x,y) = (y/x) q = y^2 p+ / (2 t x) - (x / 2t) pt`, with `qt(t,0,y) = 0`
//!
//! The ratio forms are evaluated through `G(x-y) * (1 - exp(-xy/t))` so the
//! image cancellation never loses digits near the boundary.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Below `x < SWITCH * sqrt(t)` the ratio kernels use their `x -> 0` limit.
pub const SWITCH: f64 = 1e-6;

/// A validated evaluation point `t > 0`, `x, y >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl KernelPoint {
    pub fn new(t: f64, x: f64, y: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!("kernel time must be positive, got t = {t}")));
        }
        if !(x.is_finite() && x >= 0.0 && y.is_finite() && y >= 0.0) {
            return Err(Error::Domain(format!(
                "kernel positions must be finite and nonnegative, got x = {x}, y = {y}"
            )));
        }
        Ok(Self { t, x, y })
    }
}

pub fn heat_kernel(pt: KernelPoint) -> f64 {
    p(pt.t, pt.x, pt.y)
}

pub fn heat_kernel_dx(pt: KernelPoint) -> f64 {
    q(pt.t, pt.x, pt.y)
}

pub fn ptilde(pt: KernelPoint) -> f64 {
    p_tilde(pt.t, pt.x, pt.y)
}

pub fn qtilde(pt: KernelPoint) -> f64 {
    q_tilde(pt.t, pt.x, pt.y)
}

pub fn heat_kernel_plus(pt: KernelPoint) -> f64 {
    p_plus(pt.t, pt.x, pt.y)
}

/// Whole-line Gaussian `G(t, z)`.
#[inline]
pub fn gauss(t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// `(1 - exp(-a)) / a`, continuous at 0.
#[inline]
fn one_minus_exp_ratio(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        -(-a).exp_m1() / a
    }
}

#[inline]
pub fn p(t: f64, x: f64, y: f64) -> f64 {
    gauss(t, x - y) * -(-x * y / t).exp_m1()
}

#[inline]
pub fn p_plus(t: f64, x: f64, y: f64) -> f64 {
    gauss(t, x - y) + gauss(t, x + y)
}

#[inline]
pub fn q(t: f64, x: f64, y: f64) -> f64 {
    ((y - x) * gauss(t, x - y) + (x + y) * gauss(t, x + y)) / (2.0 * t)
}

/// `dp/dx(t, 0, y) = y exp(-y^2/4t) / (t sqrt(4 pi t))`.
#[inline]
pub fn q_at_boundary(t: f64, y: f64) -> f64 {
    y * gauss(t, y) / t
}

#[inline]
pub fn p_tilde(t: f64, x: f64, y: f64) -> f64 {
    if x < SWITCH * t.sqrt() {
        y * q_at_boundary(t, y)
    } else {
        gauss(t, x - y) * (y * y / t) * one_minus_exp_ratio(x * y / t)
    }
}

#[inline]
pub fn q_tilde(t: f64, x: f64, y: f64) -> f64 {
    if x < SWITCH * t.sqrt() {
        0.0
    } else {
        (y / x) * q(t, x, y)
    }
}
