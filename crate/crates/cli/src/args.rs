use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stefan_core::Model;

const AFTER_HELP: &str = "\
Configuration keys (flat `key = value` text, `#` starts a comment):
  model         heat | stefan_scaled | stefan_colored | verify_kernels | estimate
                (set by the subcommand; an explicit conflicting value is an error)
  profile       named parameter set; `paper-4.4` gives x_max 10, n_x 320, t_max 1,
                n_t 2560, rho -0.2, u0 paper, sigma paper, level 50, drive history,
                record_every 10
  x_max, n_x    spatial domain [0, x_max] split into n_x cells (required for simulations)
  t_max, n_t    time horizon split into n_t steps; need dt < dx^2/2 (required)
  rho           Stefan coefficient, nonzero (required for Stefan models)
  u0            zero | paper | x-gauss | kernel-slice(t0, y0) | scaled-gauss(slope)
                                                                    [default paper]
  sigma         zero | paper | cutoff(a, alpha)                     [default paper]
  eta           mollifier length scale for stefan_colored           [default 0.25]
  level         truncation level L of the boundary speed            [default 50]
  seed          first seed; path i uses seed + i                    [default 0]
  paths         ensemble size                                       [default 1]
  record_every  keep every k-th time row in outputs                 [default 1]
  drive         history | recursive boundary drive                  [default history]
  source        heat | beta_dot, input of estimate-holder           [default heat]
  out           output directory                                    [default out]
  jobs          worker threads                                      [default: all cores]

Layers, lowest first: --profile, --config file, STEFAN_<KEY> environment
variables (for example STEFAN_N_X=128), then --set/--seed/--jobs/--out.

Exit codes: 0 success, 2 configuration or i/o error, 3 numerical failure,
4 acceptance check failed (outputs are kept).";

#[derive(Debug, Parser)]
#[command(name = "stefan", version, about = "Stochastic heat and Stefan problem simulations", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// First seed of the ensemble.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Worker threads for ensemble members.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Named parameter profile, applied beneath every other layer.
    #[arg(long, global = true, value_name = "NAME")]
    pub profile: Option<String>,

    /// Override any configuration key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Stochastic heat equation with multiplicative noise.
    SimulateHeat,
    /// Stefan problem driven by scaled white noise, in the boundary frame.
    SimulateStefan,
    /// Stefan problem with spatially colored noise.
    SimulateStefanColored,
    /// Fit the regularity exponents of the six kernel bounds.
    VerifyKernels,
    /// Structure-function Hölder estimates for the heat field or boundary speed.
    EstimateHolder,
    /// Compare the ensemble mean of the heat scheme with the deterministic scheme.
    MeanCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SimulateHeat => "simulate-heat",
            Command::SimulateStefan => "simulate-stefan",
            Command::SimulateStefanColored => "simulate-stefan-colored",
            Command::VerifyKernels => "verify-kernels",
            Command::EstimateHolder => "estimate-holder",
            Command::MeanCheck => "mean-check",
        }
    }

    /// The configuration model this subcommand runs.
    pub fn model(self) -> Model {
        match self {
            Command::SimulateHeat | Command::MeanCheck => Model::Heat,
            Command::SimulateStefan => Model::StefanScaled,
            Command::SimulateStefanColored => Model::StefanColored,
            Command::VerifyKernels => Model::VerifyKernels,
            Command::EstimateHolder => Model::Estimate,
        }
    }
}
