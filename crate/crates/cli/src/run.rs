//! Subcommand execution. Each ensemble member writes its own files; results
//! are gathered in seed order so outputs do not depend on `--jobs`.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use stefan_core::estimators::{median, Window, MIN_FIT_PATHS};
use stefan_core::regularity::{default_x_scan, log_ladder, verify, BoundId, RegularityReport, VerifyOptions};
use stefan_core::stefan::{drive_beta_with, simulate_stefan_scaled_with};
use stefan_core::{
    colored_increments, deterministic_heat, holder_from_moments, mean_check, simulate_heat, simulate_stefan_colored,
    speed_structure_function, stefan_residual, structure_function, BoundaryPath, CounterSheet, DriveMethod,
    EstimateSource, HistoryKernel, MeanAccumulator, Model, Mollifier, SimConfig, SolutionField, StructureCurve,
    StructureMode,
};

use crate::args::Command;
use crate::output::{fmt_f64, sha256_hex, CsvWriter, OutputFile, Staging};
use crate::resolve::Resolved;
use crate::CliError;

/// Seeds per mean-check block; blocks merge in order.
pub const MEAN_BLOCK: usize = 64;
/// Parameter range of every kernel-bound ladder.
pub const LADDER: (f64, f64) = (1e-4, 1e-1);
/// Asserted lower bounds on the second-moment slopes.
pub const SPATIAL_SLOPE_MIN: f64 = 1.0 / 3.0 - 0.05;
pub const TEMPORAL_SLOPE_MIN: f64 = 0.5 - 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub out: PathBuf,
    /// `None` for plain simulations, otherwise the verdict of the run's check.
    pub passed: Option<bool>,
    pub outputs: Vec<OutputFile>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.passed {
            Some(false) => crate::EXIT_CHECK_FAILED,
            _ => crate::EXIT_OK,
        }
    }
}

struct Produced {
    outputs: Vec<OutputFile>,
    passed: Option<bool>,
}

pub fn run(req: &Resolved) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(req.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("jobs: cannot start {} worker threads: {e}", req.jobs)))?;
    let stage = Staging::new(&req.out)?;
    let c = &req.config;
    let seeds = seeds(c)?;
    let produced = pool.install(|| match req.command {
        Command::SimulateHeat => simulate_heat_cmd(&stage, c, &seeds),
        Command::SimulateStefan | Command::SimulateStefanColored => simulate_stefan_cmd(&stage, c, &seeds),
        Command::VerifyKernels => verify_kernels_cmd(&stage),
        Command::EstimateHolder => estimate_holder_cmd(&stage, c, &seeds),
        Command::MeanCheck => mean_check_cmd(&stage, c, &seeds),
    })?;
    let mut outputs = produced.outputs;
    let manifest = manifest(req, &seeds, &outputs, produced.passed, start.elapsed().as_secs_f64());
    outputs.push(stage.write_json("manifest.json", &manifest)?);
    let out = stage.commit()?;
    Ok(Outcome {
        out,
        passed: produced.passed,
        outputs,
    })
}

fn seeds(c: &SimConfig) -> Result<Vec<u64>, CliError> {
    (0..c.paths as u64)
        .map(|i| {
            c.seed
                .checked_add(i)
                .ok_or_else(|| CliError::Config(format!("seed: seed + paths overflows u64 (seed {})", c.seed)))
        })
        .collect()
}

fn manifest(
    req: &Resolved,
    seeds: &[u64],
    outputs: &[OutputFile],
    passed: Option<bool>,
    wall: f64,
) -> serde_json::Value {
    let c = &req.config;
    let g = &c.grid;
    let text = c.render_without_out();
    json!({
        "software": { "name": "stefan", "version": env!("CARGO_PKG_VERSION") },
        "subcommand": req.command.name(),
        "config": text,
        "config_sha256": sha256_hex(text.as_bytes()),
        "seeds": { "first": seeds.first(), "count": seeds.len() },
        "grid": { "x_max": g.x_max, "n_x": g.n_x, "t_max": g.t_max, "n_t": g.n_t, "dx": g.dx(), "dt": g.dt() },
        "truncation_error_estimate": g.truncation_error_estimate(),
        "passed": passed,
        "outputs": outputs,
        "wall_time_s": wall,
        "jobs": req.jobs,
    })
}

/// `stem.ext` for a single path, `stem-<seed>.ext` in an ensemble.
pub fn member_name(stem: &str, seed: u64, paths: usize) -> String {
    if paths == 1 {
        format!("{stem}.csv")
    } else {
        format!("{stem}-{seed}.csv")
    }
}

fn write_field(stage: &Staging, name: &str, f: &SolutionField) -> Result<OutputFile, CliError> {
    let mut w = stage.csv(name, &["t", "x", "u", "v"])?;
    for k in 0..f.rows() {
        let t = f.t(k);
        for (j, (u, v)) in f.u_row(k).iter().zip(f.v_row(k)).enumerate() {
            w.row(&[t, f.grid.x(j), *u, *v])?;
        }
    }
    w.finish()
}

fn write_surface(stage: &Staging, name: &str, f: &SolutionField, p: &BoundaryPath) -> Result<OutputFile, CliError> {
    let mut w = stage.csv(name, &["t", "x", "u"])?;
    for k in 0..f.rows() {
        let (t, beta) = (f.t(k), p.beta[f.steps[k]]);
        for (j, u) in f.u_row(k).iter().enumerate() {
            w.row(&[t, f.grid.x(j) + beta, *u])?;
        }
    }
    w.finish()
}

fn write_boundary(stage: &Staging, name: &str, p: &BoundaryPath) -> Result<OutputFile, CliError> {
    let mut w = stage.csv(name, &["t", "beta", "beta_dot", "psi", "stopped"])?;
    for n in 0..p.len() {
        let stopped = p.stopped(n);
        w.cells(&[
            fmt_f64(n as f64 * p.dt),
            fmt_f64(p.beta[n]),
            fmt_f64(p.beta_dot[n]),
            fmt_f64(p.psi[n]),
            u8::from(stopped).to_string(),
        ])?;
    }
    w.finish()
}

fn simulate_heat_cmd(stage: &Staging, c: &SimConfig, seeds: &[u64]) -> Result<Produced, CliError> {
    let per_path: Vec<(OutputFile, serde_json::Value)> = seeds
        .par_iter()
        .map(|&seed| {
            let f = simulate_heat(c, &CounterSheet::new(c.grid, seed)?)?;
            let file = write_field(stage, &member_name("field", seed, c.paths), &f)?;
            Ok((file, json!({ "seed": seed, "max_abs_u": f.max_abs() })))
        })
        .collect::<Result<_, CliError>>()?;
    let (mut outputs, members): (Vec<_>, Vec<_>) = per_path.into_iter().unzip();
    outputs.push(stage.write_json("summary.json", &json!({ "paths": members }))?);
    Ok(Produced { outputs, passed: None })
}

#[derive(Serialize)]
struct StefanMember {
    seed: u64,
    max_abs_u: f64,
    beta_final: f64,
    tau_step: Option<usize>,
    /// Median relative Stefan residual over the second half of the run.
    median_relative_residual: Option<f64>,
}

fn simulate_stefan_cmd(stage: &Staging, c: &SimConfig, seeds: &[u64]) -> Result<Produced, CliError> {
    let kernel =
        (c.model == Model::StefanScaled && c.drive == DriveMethod::History).then(|| HistoryKernel::new(&c.grid));
    let eta = match c.model {
        Model::StefanColored => Some(Mollifier::gaussian(c.eta)?),
        _ => None,
    };
    let per_path: Vec<(Vec<OutputFile>, StefanMember)> = seeds
        .par_iter()
        .map(|&seed| {
            let sheet = CounterSheet::new(c.grid, seed)?;
            let (f, p) = match &eta {
                Some(eta) => simulate_stefan_colored(c, &colored_increments(&sheet, eta)?)?,
                None => simulate_stefan_scaled_with(c, &sheet, kernel.as_ref())?,
            };
            let r = stefan_residual(&f, &p, c.rho)?;
            let files = vec![
                write_field(stage, &member_name("field", seed, c.paths), &f)?,
                write_surface(stage, &member_name("surface", seed, c.paths), &f, &p)?,
                write_boundary(stage, &member_name("boundary", seed, c.paths), &p)?,
                {
                    let mut w = stage.csv(&member_name("residual", seed, c.paths), &["t", "residual", "relative"])?;
                    for k in 0..r.t.len() {
                        w.row(&[r.t[k], r.residual[k], r.relative[k]])?;
                    }
                    w.finish()?
                },
            ];
            let member = StefanMember {
                seed,
                max_abs_u: f.max_abs(),
                beta_final: *p.beta.last().unwrap_or(&0.0),
                tau_step: p.tau_index,
                median_relative_residual: r.median_relative(0.5 * c.grid.t_max, c.grid.t_max),
            };
            Ok((files, member))
        })
        .collect::<Result<_, CliError>>()?;
    let mut outputs = Vec::new();
    let mut members = Vec::new();
    for (files, m) in per_path {
        outputs.extend(files);
        members.push(m);
    }
    let mut medians: Vec<f64> = members.iter().filter_map(|m| m.median_relative_residual).collect();
    outputs.push(stage.write_json(
        "summary.json",
        &json!({ "model": c.model.as_str(), "ensemble_median_relative_residual": median(&mut medians), "paths": members }),
    )?);
    Ok(Produced { outputs, passed: None })
}

#[derive(Serialize)]
struct BoundSummary<'a> {
    bound: &'static str,
    parameter: &'static str,
    fitted_slope: f64,
    slope_stderr: f64,
    passed: bool,
    #[serde(flatten)]
    report: &'a RegularityReport,
}

fn verify_kernels_cmd(stage: &Staging) -> Result<Produced, CliError> {
    let ladder = log_ladder(LADDER.0, LADDER.1);
    let scan = default_x_scan(1.0);
    let opts = VerifyOptions::default();
    let reports: Vec<RegularityReport> = BoundId::ALL
        .par_iter()
        .map(|&b| verify(b, &ladder, &scan, &opts))
        .collect::<Result<_, _>>()?;
    let mut outputs = Vec::new();
    let mut bounds = Vec::new();
    for (b, r) in BoundId::ALL.iter().zip(&reports) {
        let mut w = stage.csv(
            &format!("{}.csv", b.name()),
            &["param", "value", "argmax_x", "bound_with_fitted_constant"],
        )?;
        for pt in &r.ladder {
            w.row(&[pt.param, pt.value, pt.argmax_x, r.bound_with_fitted_constant(pt.param)])?;
        }
        outputs.push(w.finish()?);
        bounds.push(BoundSummary {
            bound: b.name(),
            parameter: b.param_name(),
            fitted_slope: r.fitted_slope(),
            slope_stderr: r.fit.slope_stderr,
            passed: r.passed(),
            report: r,
        });
    }
    let passed = reports.iter().all(RegularityReport::passed);
    outputs.push(stage.write_json("summary.json", &json!({ "passed": passed, "bounds": bounds }))?);
    Ok(Produced {
        outputs,
        passed: Some(passed),
    })
}

/// Up to `count` distinct integers spaced geometrically over `[lo, hi]`.
pub fn geometric_lags(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (a, b) = ((lo.max(1)) as f64, (hi.max(lo.max(1))) as f64);
    let mut lags: Vec<usize> = (0..count)
        .map(|i| {
            let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            (a * (b / a).powf(f)).round() as usize
        })
        .collect();
    lags.dedup();
    lags
}

fn write_curve(
    stage: &Staging,
    name: &str,
    curve: &StructureCurve,
    fit: &stefan_core::regularity::PowerFit,
) -> Result<OutputFile, CliError> {
    let mut w = stage.csv(name, &["lag", "value", "fit_line"])?;
    for (h, v) in curve.lags.iter().zip(&curve.values) {
        w.row(&[*h, *v, (fit.intercept + fit.slope * h.ln()).exp()])?;
    }
    w.finish()
}

/// Average of per-path curves with equal sample counts per path.
fn average_curves(curves: Vec<StructureCurve>) -> StructureCurve {
    let n = curves.len();
    let mut out = curves[0].clone();
    out.values.iter_mut().for_each(|v| *v = 0.0);
    for c in &curves {
        for (acc, v) in out.values.iter_mut().zip(&c.values) {
            *acc += v / n as f64;
        }
    }
    out.paths = n;
    out
}

fn estimate_holder_cmd(stage: &Staging, c: &SimConfig, seeds: &[u64]) -> Result<Produced, CliError> {
    if seeds.len() < MIN_FIT_PATHS {
        return Err(stefan_core::Error::TooFewPaths {
            got: seeds.len(),
            need: MIN_FIT_PATHS,
        }
        .into());
    }
    let g = c.grid;
    let mut outputs = Vec::new();
    let mut estimates = Vec::new();
    let curves: Vec<(StructureCurve, f64)> = match c.source {
        EstimateSource::Heat => {
            let heat = SimConfig {
                model: Model::Heat,
                ..c.clone()
            };
            let spatial = geometric_lags(2, (g.n_x / 10).max(12).min(g.n_x), 16);
            let per_path: Vec<(StructureCurve, StructureCurve)> = seeds
                .par_iter()
                .map(|&seed| {
                    let f = simulate_heat(&heat, &CounterSheet::new(g, seed)?)?;
                    let window = Window::from_row(&f, f.rows() / 2);
                    let temporal = geometric_lags(1, (window.rows.len() / 4).max(8), 16);
                    let one = std::slice::from_ref(&f);
                    Ok((
                        structure_function(one, 2, StructureMode::Boundary, &spatial, &window)?,
                        structure_function(one, 2, StructureMode::Time, &temporal, &window)?,
                    ))
                })
                .collect::<Result<_, CliError>>()?;
            let (b, t): (Vec<_>, Vec<_>) = per_path.into_iter().unzip();
            vec![
                (average_curves(b), SPATIAL_SLOPE_MIN),
                (average_curves(t), TEMPORAL_SLOPE_MIN),
            ]
        }
        EstimateSource::BoundarySpeed => {
            let scaled = SimConfig {
                model: Model::StefanScaled,
                ..c.clone()
            };
            scaled.check_cfl()?;
            let kernel = (c.drive == DriveMethod::History).then(|| HistoryKernel::new(&g));
            let paths: Vec<BoundaryPath> = seeds
                .par_iter()
                .map(|&seed| Ok(drive_beta_with(&scaled, &CounterSheet::new(g, seed)?, kernel.as_ref())?))
                .collect::<Result<_, CliError>>()?;
            let start = g.n_t / 10;
            let lags = geometric_lags(1, (g.n_t / 20).max(8), 16);
            vec![(speed_structure_function(&paths, 2, &lags, start)?, TEMPORAL_SLOPE_MIN)]
        }
    };
    let mut passed = true;
    for (curve, min_slope) in &curves {
        let est = holder_from_moments(curve)?;
        let mode = match curve.mode {
            StructureMode::Boundary => "boundary",
            StructureMode::Time => "time",
        };
        outputs.push(write_curve(stage, &format!("structure-{mode}.csv"), curve, &est.fit)?);
        let ok = est.fit.slope >= *min_slope;
        passed &= ok;
        estimates.push(json!({
            "mode": mode,
            "order": curve.order,
            "slope": est.fit.slope,
            "slope_stderr": est.fit.slope_stderr,
            "holder_index": est.index,
            "holder_index_stderr": est.stderr,
            "min_slope": min_slope,
            "passed": ok,
        }));
    }
    outputs.push(stage.write_json(
        "summary.json",
        &json!({ "source": c.source.as_str(), "paths": seeds.len(), "passed": passed, "estimates": estimates }),
    )?);
    Ok(Produced {
        outputs,
        passed: Some(passed),
    })
}

fn mean_check_cmd(stage: &Staging, c: &SimConfig, seeds: &[u64]) -> Result<Produced, CliError> {
    let oracle = deterministic_heat(c)?;
    let nodes = oracle.u.len();
    let blocks: Vec<MeanAccumulator> = seeds
        .par_chunks(MEAN_BLOCK)
        .map(|block| {
            let mut acc = MeanAccumulator::new(nodes);
            for &seed in block {
                acc.push(&simulate_heat(c, &CounterSheet::new(c.grid, seed)?)?.u)?;
            }
            Ok(acc)
        })
        .collect::<Result<_, CliError>>()?;
    let mut total = MeanAccumulator::new(nodes);
    for b in &blocks {
        total.merge(b)?;
    }
    let report = mean_check(&total, &oracle.u)?;
    let se = total.stderr();
    let mut w: CsvWriter = stage.csv("z.csv", &["t", "x", "mean", "stderr", "oracle", "z"])?;
    let width = oracle.width();
    let columns = total.mean().iter().zip(&se).zip(oracle.u.iter().zip(&report.z));
    for (i, ((mean, se), (exact, z))) in columns.enumerate() {
        let (k, j) = (i / width, i % width);
        w.row(&[oracle.t(k), c.grid.x(j), *mean, *se, *exact, *z])?;
    }
    let outputs = vec![
        w.finish()?,
        stage.write_json(
            "summary.json",
            &json!({
                "paths": report.paths,
                "nodes": nodes,
                "max_abs_z": report.max_abs_z,
                "fraction_above_3": report.fraction_above_3,
                "passed": report.passed,
            }),
        )?,
    ];
    Ok(Produced {
        outputs,
        passed: Some(report.passed),
    })
}
