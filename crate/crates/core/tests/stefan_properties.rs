//! Properties of the two Stefan schemes that hold on any grid.

use stefan_core::estimators::stefan_residual;
use stefan_core::stefan::evolve_scaled_with_path;
use stefan_core::{
    colored_increments, detect_tau, deterministic_heat, drive_beta, sample_sheet, simulate_stefan_colored,
    simulate_stefan_scaled, BoundaryPath, CounterSheet, DriveMethod, Grid1D, InitialProfile, MeanAccumulator, Model,
    Mollifier, ScalingFunction, SimConfig,
};

fn scaled(grid: Grid1D) -> SimConfig {
    SimConfig::with_grid(Model::StefanScaled, grid)
}

#[test]
fn stochastic_drive_has_mean_zero() {
    let g = Grid1D::new(10.0, 40, 0.2, 200).unwrap();
    for drive in [DriveMethod::History, DriveMethod::Recursive] {
        let c = SimConfig { drive, ..scaled(g) };
        let zero = drive_beta(&c, &stefan_core::SheetIncrements::zeros(&g)).unwrap();
        let kernel = (drive == DriveMethod::History).then(|| stefan_core::HistoryKernel::new(&g));
        let checkpoints = [50usize, 100, 200];
        let mut acc = MeanAccumulator::new(checkpoints.len());
        for seed in 0..1000 {
            let p = stefan_core::stefan::drive_beta_with(&c, &CounterSheet::new(g, seed).unwrap(), kernel.as_ref())
                .unwrap();
            acc.push(&checkpoints.map(|n| p.beta_dot[n])).unwrap();
        }
        let se = acc.stderr();
        for (i, &n) in checkpoints.iter().enumerate() {
            let z = (acc.mean()[i] - zero.beta_dot[n]) / se[i];
            assert!(z.abs() < 3.0, "{drive:?} step {n}: z = {z}");
        }
    }
}

#[test]
fn frozen_boundary_reduces_to_the_heat_mean() {
    let g = Grid1D::new(4.0, 32, 0.1, 400).unwrap();
    let c = scaled(g);
    let frozen = BoundaryPath::frozen(&g, c.level);
    let oracle = deterministic_heat(&SimConfig {
        model: Model::Heat,
        ..c.clone()
    })
    .unwrap();
    let mut acc = MeanAccumulator::new(oracle.u.len());
    for seed in 0..1000 {
        let f = evolve_scaled_with_path(&c, &CounterSheet::new(g, seed).unwrap(), &frozen).unwrap();
        acc.push(&f.u).unwrap();
    }
    let se = acc.stderr();
    let mut worst = 0.0f64;
    for ((m, s), o) in acc.mean().iter().zip(&se).zip(&oracle.u) {
        if *s > 0.0 {
            worst = worst.max(((m - o) / s).abs());
        } else {
            assert_eq!(m, o);
        }
    }
    // 33 x 401 nodes: allow the Gaussian tail of the maximum
    assert!(worst < 5.0, "worst |z| = {worst}");
    let r = stefan_core::mean_check(&acc, &oracle.u).unwrap();
    assert!(r.passed, "{} of nodes beyond 3 se", r.fraction_above_3);
}

#[test]
fn truncation_levels_agree_before_the_lower_stop() {
    let g = Grid1D::new(10.0, 80, 0.3, 1600).unwrap();
    let sheet = CounterSheet::new(g, 17).unwrap();
    for drive in [DriveMethod::History, DriveMethod::Recursive] {
        let low = SimConfig {
            level: 6.0,
            drive,
            ..scaled(g)
        };
        let high = SimConfig {
            level: 9.0,
            ..low.clone()
        };
        let (fa, pa) = simulate_stefan_scaled(&low, &sheet).unwrap();
        let (fb, pb) = simulate_stefan_scaled(&high, &sheet).unwrap();
        let tau = pa.tau_index.expect("the lower level is reached");
        assert!(tau > 10 && pb.tau_index.map_or(true, |t| t >= tau));
        assert_eq!(pa.beta[..=tau], pb.beta[..=tau]);
        assert_eq!(pa.beta_dot[..tau], pb.beta_dot[..tau]);
        // field rows up to step tau depend only on speeds before tau
        for k in 0..fa.rows() {
            if fa.steps[k] > tau {
                break;
            }
            assert_eq!(fa.u_row(k), fb.u_row(k), "{drive:?} row {k}");
        }
    }
}

#[test]
fn tau_matches_detection_on_the_recorded_path() {
    let g = Grid1D::new(10.0, 80, 0.3, 1600).unwrap();
    let c = SimConfig {
        level: 7.0,
        ..scaled(g)
    };
    let p = drive_beta(&c, &sample_sheet(&g, 2).unwrap()).unwrap();
    assert_eq!(p.tau_index, detect_tau(&p.beta_dot, 7.0));
    let t = p.tau_index.unwrap();
    assert!(p.beta_dot[..t].iter().all(|b| b.abs() < 7.0));
    assert!(p.psi[..t].iter().all(|&v| v == 1.0));
}

#[test]
fn colored_residual_vanishes() {
    let g = Grid1D::new(4.0, 64, 0.2, 1000).unwrap();
    let c = SimConfig {
        model: Model::StefanColored,
        ..SimConfig::with_grid(Model::StefanColored, g)
    };
    let eta = Mollifier::gaussian(c.eta).unwrap();
    let xi = colored_increments(&CounterSheet::new(g, 9).unwrap(), &eta).unwrap();
    let (f, p) = simulate_stefan_colored(&c, &xi).unwrap();
    let r = stefan_residual(&f, &p, c.rho).unwrap();
    for (res, k) in r.residual.iter().zip(0..) {
        let scale = stefan_core::boundary_derivative(&f, k).abs().max(1.0);
        assert!(res.abs() <= 4.0 * f64::EPSILON * scale, "row {k}: {res}");
    }
}

#[test]
fn zero_noise_zero_data_scaled_run_is_trivial() {
    let g = Grid1D::new(4.0, 32, 0.1, 400).unwrap();
    let c = SimConfig {
        u0: InitialProfile::Zero,
        sigma: ScalingFunction::Zero,
        ..scaled(g)
    };
    let (f, p) = simulate_stefan_scaled(&c, &CounterSheet::new(g, 1).unwrap()).unwrap();
    assert!(f.u.iter().all(|&v| v == 0.0));
    assert!(p.beta.iter().chain(&p.beta_dot).all(|&v| v == 0.0));
}
