use backflow_bench::{bump, grid, matrix};
use backflow_core::kernels::QuadratureRule;
use backflow_core::oracle::{delta_direct, state_from_eigvec, Correlation, MomentumWindow};
use backflow_core::spectral::{assemble_kernel, max_eigenpair, max_eigenpair_with, EigenOptions, KernelSpec};
use backflow_core::BoundaryShape;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn assembly(c: &mut Criterion) {
    let rule = QuadratureRule::default();
    let mut g = c.benchmark_group("assemble");
    g.sample_size(10);
    for n in [250, 500] {
        let gr = grid(10.0, n);
        g.bench_with_input(BenchmarkId::new("bm", n), &gr, |b, gr| {
            b.iter(|| assemble_kernel(&KernelSpec::BrackenMelloy, gr, &rule).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("bump", n), &gr, |b, gr| {
            b.iter(|| assemble_kernel(&bump(0.3), gr, &rule).unwrap())
        });
    }
    g.finish();
}

fn eigensolve(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigensolve");
    g.sample_size(10);
    let small = matrix(&KernelSpec::BrackenMelloy, 10.0, 250);
    g.bench_function("dense_501", |b| b.iter(|| max_eigenpair(&small).unwrap()));
    let large = matrix(&KernelSpec::BrackenMelloy, 10.0, 500);
    g.bench_function("power_1001", |b| {
        b.iter(|| max_eigenpair_with(&large, &EigenOptions::default(), None).unwrap())
    });
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let shape = BoundaryShape::Straight { slope: 1.0 };
    let gr = grid(10.0, 250);
    let phi = max_eigenpair(&matrix(&KernelSpec::boundary(shape.clone(), 4), 10.0, 250)).unwrap();
    let corr = Correlation::Boundary(shape);
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("reconstruct_and_measure", |b| {
        b.iter(|| {
            let st = state_from_eigvec(&phi, &gr, &corr, &MomentumWindow::default()).unwrap();
            delta_direct(&st.state, st.tau, 4.0).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, assembly, eigensolve, oracle);
criterion_main!(benches);
