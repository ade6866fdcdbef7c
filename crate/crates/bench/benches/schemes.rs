use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stefan_bench::{heat_config, stefan_config};
use stefan_core::stefan::{drive_beta_with, simulate_stefan_scaled_with};
use stefan_core::{simulate_heat, CounterSheet, DriveMethod, HistoryKernel, SimConfig};

fn heat(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_heat");
    g.sample_size(10);
    for n_x in [64, 128] {
        let cfg = heat_config(n_x);
        g.bench_with_input(BenchmarkId::from_parameter(n_x), &cfg, |b, cfg| {
            b.iter(|| simulate_heat(cfg, &CounterSheet::new(cfg.grid, 1).unwrap()).unwrap())
        });
    }
    g.finish();
}

fn stefan(c: &mut Criterion) {
    let base = stefan_config(160, 0.25);
    let kernel = HistoryKernel::new(&base.grid);
    let mut g = c.benchmark_group("stefan_scaled");
    g.sample_size(10);
    for drive in [DriveMethod::History, DriveMethod::Recursive] {
        let cfg = SimConfig { drive, ..base.clone() };
        let k = (drive == DriveMethod::History).then_some(&kernel);
        g.bench_function(BenchmarkId::new("drive_only", drive.as_str()), |b| {
            b.iter(|| drive_beta_with(&cfg, &CounterSheet::new(cfg.grid, 1).unwrap(), k).unwrap())
        });
        g.bench_function(BenchmarkId::new("coupled", drive.as_str()), |b| {
            b.iter(|| simulate_stefan_scaled_with(&cfg, &CounterSheet::new(cfg.grid, 1).unwrap(), k).unwrap())
        });
    }
    g.bench_function("history_kernel_table", |b| b.iter(|| HistoryKernel::new(&base.grid)));
    g.finish();
}

criterion_group!(benches, heat, stefan);
criterion_main!(benches);
