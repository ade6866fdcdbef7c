//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments run to end of line
//! profile = paper-4.4
//! n_x = 640
//! n_t = 10240
//! ```
//!
//! A `profile` line expands to its key set first; explicit keys override it
//! regardless of their position in the text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::Grid1D;
use crate::profiles::{InitialProfile, ScalingFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Model {
    Heat,
    StefanScaled,
    StefanColored,
    VerifyKernels,
    Estimate,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Heat => "heat",
            Model::StefanScaled => "stefan_scaled",
            Model::StefanColored => "stefan_colored",
            Model::VerifyKernels => "verify_kernels",
            Model::Estimate => "estimate",
        }
    }

    pub fn is_stefan(self) -> bool {
        matches!(self, Model::StefanScaled | Model::StefanColored)
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "heat" => Model::Heat,
            "stefan_scaled" => Model::StefanScaled,
            "stefan_colored" => Model::StefanColored,
            "verify_kernels" => Model::VerifyKernels,
            "estimate" => Model::Estimate,
            other => {
                return Err(Error::Config(format!(
                    "model: unknown value `{other}`; expected heat, stefan_scaled, stefan_colored, verify_kernels or estimate"
                )))
            }
        })
    }
}

/// How the boundary speed of the scaled problem is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DriveMethod {
    /// Full history convolution against the kernel, O(n_t^2 n_x).
    History,
    /// Auxiliary additive-noise heat field whose boundary slope equals the
    /// stochastic convolution, O(n_t n_x).
    Recursive,
}

impl DriveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            DriveMethod::History => "history",
            DriveMethod::Recursive => "recursive",
        }
    }
}

impl FromStr for DriveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "history" => Ok(DriveMethod::History),
            "recursive" => Ok(DriveMethod::Recursive),
            other => Err(Error::Config(format!(
                "drive: unknown value `{other}`; expected history or recursive"
            ))),
        }
    }
}

/// Process whose ensemble feeds the Hölder estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimateSource {
    /// `v = u/x` of the multiplicative heat equation.
    Heat,
    /// Boundary speed of the scaled Stefan problem.
    BoundarySpeed,
}

impl EstimateSource {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateSource::Heat => "heat",
            EstimateSource::BoundarySpeed => "beta_dot",
        }
    }
}

impl FromStr for EstimateSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(EstimateSource::Heat),
            "beta_dot" => Ok(EstimateSource::BoundarySpeed),
            other => Err(Error::Config(format!(
                "source: unknown value `{other}`; expected heat or beta_dot"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub model: Model,
    pub grid: Grid1D,
    pub rho: f64,
    pub u0: InitialProfile,
    pub sigma: ScalingFunction,
    /// Mollifier length scale of the colored model.
    pub eta: f64,
    /// Truncation level `L`.
    pub level: f64,
    pub seed: u64,
    pub paths: usize,
    /// Keep every `record_every`-th time row of simulated fields.
    pub record_every: usize,
    pub drive: DriveMethod,
    pub source: EstimateSource,
    pub out: Option<String>,
}

pub const KEYS: [&str; 18] = [
    "model",
    "profile",
    "x_max",
    "n_x",
    "t_max",
    "n_t",
    "rho",
    "u0",
    "sigma",
    "eta",
    "level",
    "seed",
    "paths",
    "record_every",
    "drive",
    "source",
    "out",
    "jobs",
];

const GRID_KEYS: [&str; 4] = ["x_max", "n_x", "t_max", "n_t"];

pub const PROFILES: [&str; 1] = ["paper-4.4"];

/// Key set of a named profile.
pub fn profile_pairs(name: &str) -> Result<Vec<(&'static str, String)>> {
    match name {
        "paper-4.4" => Ok(vec![
            ("model", "stefan_scaled".into()),
            ("x_max", "10".into()),
            ("n_x", "320".into()),
            ("t_max", "1".into()),
            ("n_t", "2560".into()),
            ("rho", "-0.2".into()),
            ("u0", "paper".into()),
            ("sigma", "paper".into()),
            ("level", "50".into()),
            ("drive", "history".into()),
            ("record_every", "10".into()),
        ]),
        other => Err(Error::Config(format!(
            "profile: unknown profile `{other}`; available: {}",
            PROFILES.join(", ")
        ))),
    }
}

/// Ordered raw key/value layer; later inserts override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    /// Keys whose current value came from a profile expansion.
    inherited: BTreeSet<String>,
}

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse configuration text into a layer, expanding `profile` beneath
    /// the explicit keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut explicit = BTreeMap::new();
        let mut unknown = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{}`",
                    lineno + 1,
                    raw.trim()
                ))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                unknown.push(k.to_string());
                continue;
            }
            if v.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key `{k}` has an empty value",
                    lineno + 1
                )));
            }
            explicit.insert(k.to_string(), v.to_string());
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown key(s): {}; valid keys are {}",
                unknown.join(", "),
                KEYS.join(", ")
            )));
        }
        let mut out = RawConfig::new();
        if let Some(p) = explicit.get("profile") {
            out.apply_profile(&p.clone())?;
        }
        for (k, v) in explicit {
            out.inherited.remove(&k);
            out.values.insert(k, v);
        }
        Ok(out)
    }

    pub fn apply_profile(&mut self, name: &str) -> Result<()> {
        for (k, v) in profile_pairs(name)? {
            self.values.insert(k.to_string(), v);
            self.inherited.insert(k.to_string());
        }
        self.values.insert("profile".into(), name.into());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "unknown key `{key}`; valid keys are {}",
                KEYS.join(", ")
            )));
        }
        if key == "profile" {
            return self.apply_profile(&value.into());
        }
        self.inherited.remove(key);
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Apply `other` on top of `self`.
    pub fn merge(&mut self, other: &RawConfig) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
            if other.inherited.contains(k) {
                self.inherited.insert(k.clone());
            } else {
                self.inherited.remove(k);
            }
        }
    }

    /// Whether `key` holds a value expanded from a profile rather than set directly.
    pub fn from_profile(&self, key: &str) -> bool {
        self.inherited.contains(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str, remedy: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: invalid value `{v}`; {remedy}"))),
        }
    }

    pub fn build(&self) -> Result<SimConfig> {
        let model: Model = match self.get("model") {
            Some(m) => m.parse()?,
            None => {
                return Err(Error::Config(format!(
                    "missing required key(s): model (and {} for simulation models)",
                    GRID_KEYS.join(", ")
                )))
            }
        };
        if model != Model::VerifyKernels {
            let missing: Vec<&str> = GRID_KEYS.iter().copied().filter(|k| self.get(k).is_none()).collect();
            if !missing.is_empty() {
                return Err(Error::Config(format!(
                    "missing required key(s) for model {}: {}",
                    model.as_str(),
                    missing.join(", ")
                )));
            }
        }
        let x_max = self.parsed("x_max", "expected a positive number")?.unwrap_or(10.0);
        let n_x = self.parsed("n_x", "expected a positive integer")?.unwrap_or(320);
        let t_max = self.parsed("t_max", "expected a positive number")?.unwrap_or(1.0);
        let n_t = self.parsed("n_t", "expected a positive integer")?.unwrap_or(2560);
        let grid = Grid1D::new(x_max, n_x, t_max, n_t).map_err(|e| match e {
            Error::Stability { dt, limit } => Error::Config(format!(
                "n_t: stability rule dt < dx^2/2 violated (dt = {dt:e}, dx^2/2 = {limit:e}); \
                 raise n_t to at least {} or lower n_x",
                Grid1D::steps_for(x_max, n_x, t_max, 1.0) + 1
            )),
            other => Error::Config(other.to_string()),
        })?;

        let level: f64 = self.parsed("level", "expected a positive number")?.unwrap_or(50.0);
        if level.is_nan() || level <= 0.0 {
            return Err(Error::Config("level: truncation level must be positive".into()));
        }
        if model.is_stefan() {
            let lhs = grid.dt() * (level + 1.0);
            if lhs >= grid.dx() {
                let need = (t_max * (level + 1.0) / grid.dx()).floor() as usize + 1;
                return Err(Error::Config(format!(
                    "n_t: advection rule dt (level + 1) < dx violated ({lhs:e} >= {:e}); \
                     raise n_t to at least {need} or lower level",
                    grid.dx()
                )));
            }
        }

        let rho: Option<f64> = self.parsed("rho", "expected a nonzero number")?;
        let rho = match (model.is_stefan(), rho) {
            (true, None) => {
                return Err(Error::Config(format!(
                    "missing required key rho for model {}",
                    model.as_str()
                )))
            }
            (true, Some(r)) if r == 0.0 || !r.is_finite() => {
                return Err(Error::Config("rho: must be finite and nonzero".into()))
            }
            (_, r) => r.unwrap_or(-0.2),
        };
        let u0: InitialProfile = match self.get("u0") {
            Some(v) => v.parse().map_err(|e: Error| Error::Config(format!("u0: {e}")))?,
            None => InitialProfile::Paper,
        };
        let sigma: ScalingFunction = match self.get("sigma") {
            Some(v) => v.parse().map_err(|e: Error| Error::Config(format!("sigma: {e}")))?,
            None => ScalingFunction::Paper,
        };
        if model == Model::StefanScaled || (model == Model::Estimate && self.get("source") == Some("beta_dot")) {
            sigma.validate().map_err(|e| Error::Config(format!("sigma: {e}")))?;
        }
        let eta: f64 = self.parsed("eta", "expected a positive length")?.unwrap_or(0.25);
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config("eta: mollifier length scale must be positive".into()));
        }
        let seed = self.parsed("seed", "expected an unsigned 64-bit integer")?.unwrap_or(0);
        let paths: usize = self.parsed("paths", "expected a positive integer")?.unwrap_or(1);
        if paths == 0 {
            return Err(Error::Config("paths: must be at least 1".into()));
        }
        let record_every: usize = self.parsed("record_every", "expected a positive integer")?.unwrap_or(1);
        if record_every == 0 {
            return Err(Error::Config("record_every: must be at least 1".into()));
        }
        let drive = match self.get("drive") {
            Some(v) => v.parse()?,
            None => DriveMethod::History,
        };
        let source = match self.get("source") {
            Some(v) => v.parse()?,
            None => EstimateSource::Heat,
        };
        if let Some(j) = self.get("jobs") {
            j.parse::<usize>()
                .ok()
                .filter(|&j| j > 0)
                .ok_or_else(|| Error::Config(format!("jobs: invalid value `{j}`; expected a positive integer")))?;
        }
        Ok(SimConfig {
            model,
            grid,
            rho,
            u0,
            sigma,
            eta,
            level,
            seed,
            paths,
            record_every,
            drive,
            source,
            out: self.get("out").map(str::to_string),
        })
    }
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    RawConfig::parse(text)?.build()
}

impl SimConfig {
    /// Configuration text that parses back to `self`; omits `out` unless set.
    pub fn render(&self) -> String {
        let mut s = self.render_without_out();
        if let Some(out) = &self.out {
            s.push_str(&format!("out = {out}\n"));
        }
        s
    }

    /// The reproducibility-relevant part of the configuration.
    pub fn render_without_out(&self) -> String {
        let g = &self.grid;
        format!(
            "model = {}\nx_max = {:?}\nn_x = {}\nt_max = {:?}\nn_t = {}\nrho = {:?}\nu0 = {}\nsigma = {}\n\
             eta = {:?}\nlevel = {:?}\nseed = {}\npaths = {}\nrecord_every = {}\ndrive = {}\nsource = {}\n",
            self.model.as_str(),
            g.x_max,
            g.n_x,
            g.t_max,
            g.n_t,
            self.rho,
            self.u0,
            self.sigma,
            self.eta,
            self.level,
            self.seed,
            self.paths,
            self.record_every,
            self.drive.as_str(),
            self.source.as_str(),
        )
    }

    /// Check the explicit-upwind CFL condition `dt (L + 1) < dx` of the Stefan schemes.
    pub fn check_cfl(&self) -> Result<()> {
        let lhs = self.grid.dt() * (self.level + 1.0);
        if lhs >= self.grid.dx() {
            return Err(Error::Cfl {
                lhs,
                dx: self.grid.dx(),
            });
        }
        Ok(())
    }

    /// A configuration on `grid` with default coefficients, for tests and benches.
    pub fn with_grid(model: Model, grid: Grid1D) -> Self {
        Self {
            model,
            grid,
            rho: -0.2,
            u0: InitialProfile::Paper,
            sigma: ScalingFunction::Paper,
            eta: 0.25,
            level: 50.0,
            seed: 0,
            paths: 1,
            record_every: 1,
            drive: DriveMethod::History,
            source: EstimateSource::Heat,
            out: None,
        }
    }
}

impl fmt::Display for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
