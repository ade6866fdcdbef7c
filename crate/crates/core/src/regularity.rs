//! Quadrature checks of the integral moduli of the ratio kernels `pt`, `qt`
//! over parameter ladders, with log-log exponent fits.
//!
//! Time integrals near `s = 0` carry a `1/sqrt(s)` singularity; they are
//! computed after the substitution `s = a + (b - a) w^2`, which makes the
//! integrand bounded and lets the Kronrod rule converge quickly.

use std::cell::Cell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{p_tilde, q_tilde};
use crate::quadrature::{with_context, Adaptive};

/// Spatial integrals are truncated this many `sqrt(t)` past the last centre.
pub const TRUNCATION_WIDTHS: f64 = 14.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundId {
    P1,
    P2,
    P3,
    Q1,
    Q2,
    Q3,
}

/// Direction of an asserted bound on the fitted slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Claim {
    /// Blow-up rate `param^exponent` with `exponent < 0`; slope must be within `tol`.
    Singular { exponent: f64, tol: f64 },
    /// Increment bound `param^exponent`; slope must be at least `exponent - tol`.
    Increment { exponent: f64, tol: f64 },
}

impl Claim {
    pub fn exponent(&self) -> f64 {
        match *self {
            Claim::Singular { exponent, .. } | Claim::Increment { exponent, .. } => exponent,
        }
    }

    pub fn holds(&self, slope: f64) -> bool {
        match *self {
            Claim::Singular { exponent, tol } => (slope - exponent).abs() <= tol,
            Claim::Increment { exponent, tol } => slope >= exponent - tol,
        }
    }
}

impl BoundId {
    pub const ALL: [BoundId; 6] = [
        BoundId::P1,
        BoundId::P2,
        BoundId::P3,
        BoundId::Q1,
        BoundId::Q2,
        BoundId::Q3,
    ];

    pub fn claim(self) -> Claim {
        match self {
            BoundId::P1 | BoundId::Q1 => Claim::Singular {
                exponent: -0.5,
                tol: 0.02,
            },
            BoundId::P2 => Claim::Increment {
                exponent: 1.0 / 3.0,
                tol: 0.03,
            },
            BoundId::P3 => Claim::Increment {
                exponent: 0.5,
                tol: 0.03,
            },
            BoundId::Q2 => Claim::Increment {
                exponent: 1.0 / 6.0,
                tol: 0.02,
            },
            BoundId::Q3 => Claim::Increment {
                exponent: 0.25,
                tol: 0.02,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundId::P1 => "p1",
            BoundId::P2 => "p2",
            BoundId::P3 => "p3",
            BoundId::Q1 => "q1",
            BoundId::Q2 => "q2",
            BoundId::Q3 => "q3",
        }
    }

    pub fn param_name(self) -> &'static str {
        match self {
            BoundId::P1 | BoundId::Q1 => "s",
            BoundId::P2 | BoundId::Q2 => "h",
            BoundId::P3 | BoundId::Q3 => "k",
        }
    }
}

/// Least-squares line through `(ln param, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of `ln value` from the line.
    pub residual: f64,
    pub slope_stderr: f64,
    pub used: usize,
    /// Points dropped because their value was not strictly positive.
    pub excluded: usize,
}

pub fn fit_exponent(ladder: &[(f64, f64)]) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = ladder
        .iter()
        .filter(|(p, v)| *p > 0.0 && *v > 0.0 && p.is_finite() && v.is_finite())
        .map(|(p, v)| (p.ln(), v.ln()))
        .collect();
    let n = pts.len();
    if n < 6 {
        return Err(Error::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all ladder parameters coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (mut ssr, mut residual) = (0.0, 0.0f64);
    for &(x, y) in &pts {
        let r = y - (intercept + slope * x);
        ssr += r * r;
        residual = residual.max(r.abs());
    }
    Ok(PowerFit {
        slope,
        intercept,
        residual,
        slope_stderr: (ssr / (nf - 2.0) / sxx).sqrt(),
        used: n,
        excluded: ladder.len() - n,
    })
}

/// Constant `C` of `value ~ C param^exponent` with the exponent held fixed.
pub fn pinned_constant(ladder: &[(f64, f64)], exponent: f64) -> f64 {
    let logs: Vec<f64> = ladder
        .iter()
        .filter(|(p, v)| *p > 0.0 && *v > 0.0)
        .map(|(p, v)| v.ln() - exponent * p.ln())
        .collect();
    if logs.is_empty() {
        return 0.0;
    }
    (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderPoint {
    pub param: f64,
    pub value: f64,
    /// Position in the scan attaining the supremum.
    pub argmax_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub bound_id: BoundId,
    pub ladder: Vec<LadderPoint>,
    pub fit: PowerFit,
    pub claim: Claim,
    /// `C` in `C param^claimed_exponent`, fitted with the exponent pinned.
    pub constant: f64,
    /// `max value / (C param^claimed_exponent)` over the ladder.
    pub worst_ratio: f64,
}

impl RegularityReport {
    fn build(bound_id: BoundId, ladder: Vec<LadderPoint>) -> Result<Self> {
        let pairs = pairs(&ladder);
        let fit = fit_exponent(&pairs)?;
        let claim = bound_id.claim();
        let constant = pinned_constant(&pairs, claim.exponent());
        let worst_ratio = pairs
            .iter()
            .filter(|(p, _)| *p > 0.0)
            .map(|(p, v)| v / (constant * p.powf(claim.exponent())))
            .fold(0.0, f64::max);
        Ok(Self {
            bound_id,
            ladder,
            fit,
            claim,
            constant,
            worst_ratio,
        })
    }

    pub fn fitted_slope(&self) -> f64 {
        self.fit.slope
    }

    pub fn fitted_intercept(&self) -> f64 {
        self.fit.intercept
    }

    pub fn passed(&self) -> bool {
        self.claim.holds(self.fit.slope) && self.worst_ratio.is_finite()
    }

    pub fn bound_with_fitted_constant(&self, param: f64) -> f64 {
        self.constant * param.powf(self.claim.exponent())
    }
}

fn pairs(ladder: &[LadderPoint]) -> Vec<(f64, f64)> {
    ladder.iter().map(|p| (p.param, p.value)).collect()
}

/// Logarithmically spaced values from `lo` to `hi`, 13 points per 2.5 decades.
pub fn log_ladder(lo: f64, hi: f64) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let intervals = (decades * 12.0 / 2.5 - 1e-9).ceil().max(1.0) as usize;
    (0..=intervals)
        .map(|i| lo * (hi / lo).powf(i as f64 / intervals as f64))
        .collect()
}

/// Zero plus a geometric scan of `(0, x_max]`.
pub fn default_x_scan(x_max: f64) -> Vec<f64> {
    let mut xs = vec![0.0];
    xs.extend(log_ladder(1e-4 * x_max, x_max));
    xs
}

/// Numerical settings shared by the verifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Rule for single (spatial) integrals.
    pub quad: Adaptive,
    /// Rule for the outer time integral of double integrals; the inner
    /// spatial integrals run 100x tighter.
    pub outer: Adaptive,
    /// Horizon of the time integrals in the increment bounds.
    pub horizon: f64,
    /// Base time `s` of the time-increment bound for `pt`.
    pub base_time: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            quad: Adaptive::new(1e-300, 1e-10),
            outer: Adaptive::new(1e-300, 1e-6),
            horizon: 1.0,
            base_time: 0.5,
        }
    }
}

impl VerifyOptions {
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            quad: self.quad.tightened(factor),
            outer: self.outer.tightened(factor),
            ..*self
        }
    }
}

fn space_integral<F: FnMut(f64) -> f64>(quad: &Adaptive, f: F, t: f64, centres: &[f64]) -> Result<f64> {
    let w = t.sqrt();
    let mut pts = vec![0.0];
    let mut far = 0.0f64;
    for &c in centres {
        far = far.max(c);
        pts.extend([c, c - 2.0 * w, c + 2.0 * w, c + 6.0 * w]);
    }
    let edge = far + TRUNCATION_WIDTHS * w;
    pts.retain(|&p| (0.0..=edge).contains(&p));
    pts.push(edge);
    Ok(quad.integrate_with_breaks(f, &pts)?.value)
}

/// `int_a^b g(r) dr` for `g` with at most an inverse-square-root singularity at `a`.
fn time_integral<G: FnMut(f64) -> Result<f64>>(quad: &Adaptive, mut g: G, a: f64, b: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let failure: Cell<Option<Error>> = Cell::new(None);
    let len = b - a;
    let r = quad.integrate(
        |w| {
            if w == 0.0 {
                return 0.0;
            }
            match g(a + len * w * w) {
                Ok(v) => 2.0 * len * w * v,
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        },
        0.0,
        1.0,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(r?.value)
}

/// `int_a^b [int_0^inf f(r, y) dy] dr`, where `g(rule, r)` evaluates the inner
/// integral with the given rule.
///
/// A coarse pilot pass fixes the magnitude of the result, which then sets an
/// absolute floor for the inner integrals: where the integrand is a squared
/// or absolute difference of nearby kernels, cancellation limits the inner
/// relative accuracy, but its absolute contribution is negligible.
fn double_integral<G: FnMut(&Adaptive, f64) -> Result<f64>>(outer: &Adaptive, mut g: G, a: f64, b: f64) -> Result<f64> {
    let pilot_outer = Adaptive {
        rel_tol: outer.rel_tol.max(1e-3),
        ..*outer
    };
    let pilot_inner = Adaptive::new(1e-300, 1e-6);
    let pilot = time_integral(&pilot_outer, |r| g(&pilot_inner, r), a, b)?;
    if pilot == 0.0 {
        return Ok(0.0);
    }
    let inner = Adaptive {
        abs_tol: 0.01 * outer.rel_tol * pilot.abs() / (b - a),
        rel_tol: outer.rel_tol / 100.0,
        max_segments: outer.max_segments,
    };
    time_integral(outer, |r| g(&inner, r), a, b)
}

pub fn p1_integral(s: f64, x: f64, opts: &VerifyOptions) -> Result<f64> {
    with_context(
        space_integral(&opts.quad, |y| p_tilde(s, x, y).powi(2), s, &[x]),
        || format!("s = {s}, x = {x}"),
    )
}

pub fn p2_integral(h: f64, x: f64, opts: &VerifyOptions) -> Result<f64> {
    if h == 0.0 {
        return Ok(0.0);
    }
    with_context(
        double_integral(
            &opts.outer,
            |rule, s| {
                space_integral(
                    rule,
                    |z| (p_tilde(s, x, z) - p_tilde(s, x + h, z)).powi(2),
                    s,
                    &[x, x + h],
                )
            },
            0.0,
            opts.horizon,
        ),
        || format!("h = {h}, x = {x}"),
    )
}

/// The two summands of the time-increment modulus for `pt` at base time `s`.
pub fn p3_integrals(k: f64, x: f64, opts: &VerifyOptions) -> Result<(f64, f64)> {
    let s = opts.base_time;
    if k == 0.0 {
        return Ok((0.0, 0.0));
    }
    let first = double_integral(
        &opts.outer,
        |rule, r| space_integral(rule, |y| p_tilde(r, x, y).powi(2), r, &[x]),
        s,
        s + k,
    );
    let second = double_integral(
        &opts.outer,
        |rule, r| space_integral(rule, |y| (p_tilde(r + k, x, y) - p_tilde(r, x, y)).powi(2), r, &[x]),
        0.0,
        s,
    );
    let ctx = || format!("k = {k}, x = {x}");
    Ok((with_context(first, ctx)?, with_context(second, ctx)?))
}

pub fn q1_integral(s: f64, x: f64, opts: &VerifyOptions) -> Result<f64> {
    with_context(space_integral(&opts.quad, |y| q_tilde(s, x, y).abs(), s, &[x]), || {
        format!("s = {s}, x = {x}")
    })
}

pub fn q2_integral(h: f64, x: f64, opts: &VerifyOptions) -> Result<f64> {
    if h == 0.0 {
        return Ok(0.0);
    }
    with_context(
        double_integral(
            &opts.outer,
            |rule, r| {
                space_integral(
                    rule,
                    |y| (q_tilde(r, x + h, y) - q_tilde(r, x, y)).abs(),
                    r,
                    &[x, x + h],
                )
            },
            0.0,
            opts.horizon,
        ),
        || format!("h = {h}, x = {x}"),
    )
}

pub fn q3_integral(k: f64, x: f64, opts: &VerifyOptions) -> Result<f64> {
    if k == 0.0 {
        return Ok(0.0);
    }
    with_context(
        double_integral(
            &opts.outer,
            |rule, r| space_integral(rule, |y| (q_tilde(r + k, x, y) - q_tilde(r, x, y)).abs(), r, &[x]),
            0.0,
            opts.horizon,
        ),
        || format!("k = {k}, x = {x}"),
    )
}

fn sup_over_scan<F: FnMut(f64) -> Result<f64>>(xs: &[f64], mut f: F) -> Result<(f64, f64)> {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &x in xs {
        let v = f(x)?;
        if v > best.0 {
            best = (v, x);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::Domain("empty x scan".into()));
    }
    Ok(best)
}

fn run_ladder<F: FnMut(f64, f64) -> Result<f64>>(
    bound: BoundId,
    params: &[f64],
    xs: &[f64],
    mut f: F,
) -> Result<RegularityReport> {
    let mut ladder = Vec::with_capacity(params.len());
    for &param in params {
        let (value, argmax_x) = sup_over_scan(xs, |x| f(param, x))?;
        ladder.push(LadderPoint { param, value, argmax_x });
    }
    RegularityReport::build(bound, ladder)
}

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(format!("{name} values must be finite and nonnegative")));
    }
    Ok(())
}

pub fn verify_p1(s_ladder: &[f64], x_scan: &[f64], opts: &VerifyOptions) -> Result<RegularityReport> {
    check_positive("s", s_ladder)?;
    run_ladder(BoundId::P1, s_ladder, x_scan, |s, x| p1_integral(s, x, opts))
}

/// Increment in space; scan positions with `x + h > 1` are skipped.
pub fn verify_p2(h_ladder: &[f64], x_scan: &[f64], opts: &VerifyOptions) -> Result<RegularityReport> {
    check_positive("h", h_ladder)?;
    run_ladder(BoundId::P2, h_ladder, x_scan, |h, x| {
        if x + h > 1.0 {
            Ok(f64::NEG_INFINITY)
        } else {
            p2_integral(h, x, opts)
        }
    })
}

pub fn verify_p3(k_ladder: &[f64], x_scan: &[f64], opts: &VerifyOptions) -> Result<RegularityReport> {
    check_positive("k", k_ladder)?;
    run_ladder(BoundId::P3, k_ladder, x_scan, |k, x| {
        p3_integrals(k, x, opts).map(|(a, b)| a + b)
    })
}

pub fn verify_q1(s_ladder: &[f64], x_scan: &[f64], opts: &VerifyOptions) -> Result<RegularityReport> {
    check_positive("s", s_ladder)?;
    run_ladder(BoundId::Q1, s_ladder, x_scan, |s, x| q1_integral(s, x, opts))
}

pub fn verify_q2(h_ladder: &[f64], x_scan: &[f64], opts: &VerifyOptions) -> Result<RegularityReport> {
    check_positive("h", h_ladder)?;
    run_ladder(BoundId::Q2, h_ladder, x_scan, |h, x| {
        if x + h > 1.0 {
            Ok(f64::NEG_INFINITY)
        } else {
            q2_integral(h, x, opts)
        }
    })
}

pub fn verify_q3(k_ladder: &[f64], x_scan: &[f64], opts: &VerifyOptions) -> Result<RegularityReport> {
    check_positive("k", k_ladder)?;
    run_ladder(BoundId::Q3, k_ladder, x_scan, |k, x| q3_integral(k, x, opts))
}

pub fn verify(bound: BoundId, ladder: &[f64], x_scan: &[f64], opts: &VerifyOptions) -> Result<RegularityReport> {
    match bound {
        BoundId::P1 => verify_p1(ladder, x_scan, opts),
        BoundId::P2 => verify_p2(ladder, x_scan, opts),
        BoundId::P3 => verify_p3(ladder, x_scan, opts),
        BoundId::Q1 => verify_q1(ladder, x_scan, opts),
        BoundId::Q2 => verify_q2(ladder, x_scan, opts),
        BoundId::Q3 => verify_q3(ladder, x_scan, opts),
    }
}
