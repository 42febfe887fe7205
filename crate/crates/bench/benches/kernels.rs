use criterion::{black_box, criterion_group, criterion_main, Criterion};
use mvlab_bench::{dirac_flow, preset, spiral};
use mvlab_core::measures::{wasserstein, weighted_tv};
use mvlab_core::parametrix::parametrix_density;
use mvlab_core::simulator::simulate_mckean_vlasov;
use mvlab_core::zvonkin::solve_backward_pde;
use mvlab_core::{EmpiricalMeasure, GridSpec, KernelContext, KernelQuadrature, SimulationPlan};

fn metrics(c: &mut Criterion) {
    let (mu, nu) = (spiral(200, 0.0), spiral(200, 0.3));
    c.bench_function("wasserstein_200x200_d2", |b| b.iter(|| wasserstein(black_box(&mu), &nu, 2.0)));
    c.bench_function("weighted_tv_200x200_d2", |b| b.iter(|| weighted_tv(black_box(&mu), &nu, 2.0)));
}

fn simulation(c: &mut Criterion) {
    let coeffs = preset("bump_drift_mu_dependent");
    let gamma = EmpiricalMeasure::dirac(&[0.0]);
    let plan = SimulationPlan::uniform(10_000, 0.0, 1.0, 50, 1).expect("valid plan");
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    g.bench_function("mckean_vlasov_1e4x50_bump", |b| {
        b.iter(|| simulate_mckean_vlasov(&coeffs, &gamma, black_box(&plan)))
    });
    g.finish();
}

fn parametrix(c: &mut Criterion) {
    let coeffs = preset("constant_drift");
    let flow = dirac_flow(1, 0.5, 10);
    let ctx = KernelContext::new(&coeffs, &flow, &flow).expect("flows cover the window");
    let quad = KernelQuadrature::default();
    let mut g = c.benchmark_group("parametrix");
    g.sample_size(10);
    for order in [1, 2] {
        g.bench_function(format!("constant_drift_order_{order}"), |b| {
            b.iter(|| parametrix_density(&ctx, &[0.0], black_box(&[0.3]), 0.0, 0.5, order, &quad, None))
        });
    }
    g.finish();
}

fn zvonkin(c: &mut Criterion) {
    let coeffs = preset("bump_drift_mu_dependent");
    let flow = dirac_flow(1, 1.0, 10);
    let grid = GridSpec {
        space_points: 401,
        time_steps: 1000,
        half_width: None,
        record_slices: 10,
    };
    let mut g = c.benchmark_group("zvonkin");
    g.sample_size(10);
    g.bench_function("backward_pde_401x1000", |b| {
        b.iter(|| solve_backward_pde(&coeffs, &flow, &flow, black_box(2.0), &grid))
    });
    g.finish();
}

criterion_group!(benches, metrics, simulation, parametrix, zvonkin);
criterion_main!(benches);
