//! Named initial profiles `u0` and scaling functions `sigma`.
//!
//! Profiles are referred to by name in configuration text, e.g. `paper`,
//! `x-gauss` or `kernel-slice(0.05, 0.5)`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels;
use crate::regularity::fit_exponent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InitialProfile {
    /// `(x + x^2) / (1 + x^4/16)`
    Paper,
    /// `x exp(-x^2)`
    XGauss,
    Zero,
    /// `p(t0, x, y0)`, a slice of the Dirichlet kernel.
    KernelSlice {
        t0: f64,
        y0: f64,
    },
    /// `slope * x exp(-x^2)`, for boundary derivatives of a chosen size.
    ScaledGauss {
        slope: f64,
    },
}

impl InitialProfile {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Paper => (x + x * x) / (1.0 + x.powi(4) / 16.0),
            InitialProfile::XGauss => x * (-x * x).exp(),
            InitialProfile::Zero => 0.0,
            InitialProfile::KernelSlice { t0, y0 } => kernels::p(t0, x, y0),
            InitialProfile::ScaledGauss { slope } => slope * x * (-x * x).exp(),
        }
    }

    /// `u0'(0)`.
    pub fn boundary_slope(&self) -> f64 {
        match *self {
            InitialProfile::Paper => 1.0,
            InitialProfile::XGauss => 1.0,
            InitialProfile::Zero => 0.0,
            InitialProfile::KernelSlice { t0, y0 } => kernels::q_at_boundary(t0, y0),
            InitialProfile::ScaledGauss { slope } => slope,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InitialProfile::Zero | InitialProfile::ScaledGauss { slope: 0.0 })
    }

    /// Beyond this point the profile is below `1e-16` of its scale (or never is).
    pub fn support_hint(&self) -> f64 {
        match *self {
            InitialProfile::Paper => f64::INFINITY,
            InitialProfile::XGauss | InitialProfile::ScaledGauss { .. } => 6.5,
            InitialProfile::Zero => 0.0,
            InitialProfile::KernelSlice { t0, y0 } => y0 + 17.0 * t0.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let InitialProfile::KernelSlice { t0, y0 } = *self {
            if !(t0 > 0.0 && t0.is_finite() && y0 >= 0.0 && y0.is_finite()) {
                return Err(Error::Config(format!(
                    "u0 = kernel-slice({t0}, {y0}) needs t0 > 0 and y0 >= 0"
                )));
            }
        }
        if let InitialProfile::ScaledGauss { slope } = *self {
            if !slope.is_finite() {
                return Err(Error::Config("u0 = scaled-gauss slope must be finite".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialProfile::Paper => write!(f, "paper"),
            InitialProfile::XGauss => write!(f, "x-gauss"),
            InitialProfile::Zero => write!(f, "zero"),
            InitialProfile::KernelSlice { t0, y0 } => write!(f, "kernel-slice({t0:?}, {y0:?})"),
            InitialProfile::ScaledGauss { slope } => write!(f, "scaled-gauss({slope:?})"),
        }
    }
}

/// Split `name(a, b)` into the name and its numeric arguments.
fn call_syntax(text: &str) -> Result<(&str, Vec<f64>)> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        return Ok((text, Vec::new()));
    };
    let close = text
        .strip_suffix(')')
        .ok_or_else(|| Error::Config(format!("unbalanced parentheses in `{text}`")))?;
    let args = close[open + 1..]
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad numeric argument `{}` in `{text}`", a.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((text[..open].trim(), args))
}

fn arity(name: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::Config(format!(
            "`{name}` takes {n} argument(s), got {}",
            args.len()
        )));
    }
    Ok(())
}

impl FromStr for InitialProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = call_syntax(s)?;
        let profile = match name {
            "paper" => {
                arity(name, &args, 0)?;
                InitialProfile::Paper
            }
            "x-gauss" => {
                arity(name, &args, 0)?;
                InitialProfile::XGauss
            }
            "zero" => {
                arity(name, &args, 0)?;
                InitialProfile::Zero
            }
            "kernel-slice" => {
                arity(name, &args, 2)?;
                InitialProfile::KernelSlice { t0: args[0], y0: args[1] }
            }
            "scaled-gauss" => {
                arity(name, &args, 1)?;
                InitialProfile::ScaledGauss { slope: args[0] }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown u0 profile `{other}`; expected paper, x-gauss, zero, kernel-slice(t0, y0) or scaled-gauss(slope)"
                )))
            }
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// A scaling function `sigma` with `sigma(0) = 0` and `|sigma(x)| <= min(A x^alpha, B x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScalingFunction {
    /// `x^2 / (1 + 4x)`
    Paper,
    Zero,
    /// `a x^alpha / (1 + x^(alpha - 1))`
    Cutoff {
        a: f64,
        alpha: f64,
    },
}

impl ScalingFunction {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalingFunction::Paper => x * x / (1.0 + 4.0 * x),
            ScalingFunction::Zero => 0.0,
            ScalingFunction::Cutoff { a, alpha } => a * x.powf(alpha) / (1.0 + x.powf(alpha - 1.0)),
        }
    }

    /// Constants `(A, B, alpha)` of the growth bound.
    pub fn constants(&self) -> (f64, f64, f64) {
        match *self {
            ScalingFunction::Paper => (1.0, 0.25, 2.0),
            ScalingFunction::Zero => (0.0, 0.0, 2.0),
            ScalingFunction::Cutoff { a, alpha } => (a.abs(), a.abs(), alpha),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            ScalingFunction::Paper => 0.25,
            ScalingFunction::Zero => 0.0,
            // derivative of x^alpha / (1 + x^(alpha-1)) is at most alpha
            ScalingFunction::Cutoff { a, alpha } => a.abs() * alpha,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            ScalingFunction::Zero => true,
            ScalingFunction::Cutoff { a, .. } => a == 0.0,
            ScalingFunction::Paper => false,
        }
    }

    /// Check `sigma(0) = 0` and that the log-log slope near 0 exceeds 3/2.
    pub fn validate(&self) -> Result<()> {
        if let ScalingFunction::Cutoff { a, alpha } = *self {
            if !(a.is_finite() && alpha.is_finite()) {
                return Err(Error::InvalidScaling("cutoff parameters must be finite".into()));
            }
        }
        if self.eval(0.0) != 0.0 {
            return Err(Error::InvalidScaling(format!(
                "sigma(0) = {} must vanish",
                self.eval(0.0)
            )));
        }
        if self.is_zero() {
            return Ok(());
        }
        let slope = self.boundary_exponent()?;
        if slope < 1.5 {
            return Err(Error::InvalidScaling(format!(
                "log-log slope of sigma on [1e-6, 1e-2] is {slope:.4}; a regular scaling function needs > 3/2"
            )));
        }
        Ok(())
    }

    /// Fitted exponent of `|sigma|` on `[1e-6, 1e-2]`.
    pub fn boundary_exponent(&self) -> Result<f64> {
        let ladder: Vec<(f64, f64)> = (0..=16)
            .map(|i| {
                let x = 1e-6 * 10f64.powf(i as f64 / 4.0);
                (x, self.eval(x).abs())
            })
            .collect();
        Ok(fit_exponent(&ladder)?.slope)
    }
}

impl fmt::Display for ScalingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingFunction::Paper => write!(f, "paper"),
            ScalingFunction::Zero => write!(f, "zero"),
            ScalingFunction::Cutoff { a, alpha } => write!(f, "cutoff({a:?}, {alpha:?})"),
        }
    }
}

impl FromStr for ScalingFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = call_syntax(s)?;
        match name {
            "paper" => {
                arity(name, &args, 0)?;
                Ok(ScalingFunction::Paper)
            }
            "zero" => {
                arity(name, &args, 0)?;
                Ok(ScalingFunction::Zero)
            }
            "cutoff" => {
                arity(name, &args, 2)?;
                Ok(ScalingFunction::Cutoff {
                    a: args[0],
                    alpha: args[1],
                })
            }
            other => Err(Error::Config(format!(
                "unknown sigma profile `{other}`; expected paper, zero or cutoff(a, alpha)"
            ))),
        }
    }
}
