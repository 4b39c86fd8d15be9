use backflow_core::kernels::{gauss_legendre, QuadratureRule};
use backflow_core::spectral::{
    assemble_kernel, estimate_kernel, extrapolate_linear, max_eigenpair, max_eigenpair_with, spectrum_bounds,
    top_eigenvalues, EigenOptions, HermitianMatrix, KernelSpec, StudyPlan,
};
use backflow_core::{BoundaryShape, Complex64, GridSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn power_only() -> EigenOptions {
    EigenOptions { dense_limit: 0, ..Default::default() }
}

fn sorted_spectrum(m: &HermitianMatrix) -> Vec<f64> {
    let d = DMatrix::from_row_slice(m.dim(), m.dim(), m.as_slice());
    let mut e: Vec<f64> = SymmetricEigen::new(d).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn pauli_type_matrix() {
    let m = HermitianMatrix::new(2, vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]).unwrap();
    let p = max_eigenpair(&m).unwrap();
    assert!((p.value - 1.0).abs() < 1e-14);
    assert!(p.residual < 1e-14);
    let q = max_eigenpair_with(&m, &power_only(), None).unwrap();
    assert!((q.value - 1.0).abs() < 1e-12);
}

#[test]
fn tie_breaking_is_deterministic() {
    let m = HermitianMatrix::new(2, vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]).unwrap();
    let a = max_eigenpair(&m).unwrap();
    let b = max_eigenpair(&m).unwrap();
    assert_eq!(a, b);
    let k = a.vector.iter().enumerate().fold(0, |k, (i, z)| if z.norm() > a.vector[k].norm() + 1e-14 { i } else { k });
    assert_eq!(a.vector[k].im, 0.0);
    assert!(a.vector[k].re > 0.0);
}

// largest root of the characteristic cubic, trigonometric form
fn cubic_max(a: &[Complex64]) -> f64 {
    let d = |i: usize| a[4 * i].re;
    let q = (d(0) + d(1) + d(2)) / 3.0;
    let p1 = a[1].norm_sqr() + a[2].norm_sqr() + a[5].norm_sqr();
    let p2 = (d(0) - q).powi(2) + (d(1) - q).powi(2) + (d(2) - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: Vec<Complex64> =
        (0..9).map(|k| (a[k] - if k % 4 == 0 { c(q, 0.0) } else { c(0.0, 0.0) }) / p).collect();
    let det = b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6])
        + b[2] * (b[3] * b[7] - b[4] * b[6]);
    let r = (det.re / 2.0).clamp(-1.0, 1.0);
    q + 2.0 * p * (r.acos() / 3.0).cos()
}

#[test]
fn random_hermitian_against_cubic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..25 {
        let mut a = vec![c(0.0, 0.0); 9];
        for i in 0..3 {
            a[4 * i] = c(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..3 {
                let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                a[3 * i + j] = z;
                a[3 * j + i] = z.conj();
            }
        }
        let m = HermitianMatrix::new(3, a.clone()).unwrap();
        let want = cubic_max(&a);
        assert!((max_eigenpair(&m).unwrap().value - want).abs() < 1e-10);
        let opts = EigenOptions { shift: 4.0, ..power_only() };
        assert!((max_eigenpair_with(&m, &opts, None).unwrap().value - want).abs() < 1e-10);
    }
}

#[test]
fn noisy_line_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma = 1e-4;
    let pts: Vec<(f64, f64)> = (1..=8)
        .map(|i| {
            let h = 1.0 / (100.0 * i as f64);
            let noise: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
            (h, 0.0384 + 0.7 * h + sigma * noise)
        })
        .collect();
    let f = extrapolate_linear(&pts).unwrap();
    let (mut s1, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        s1 += 1.0;
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    let det = s1 * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope = (s1 * sxy - sx * sy) / det;
    assert!((f.intercept - intercept).abs() < 1e-12);
    assert!((f.slope - slope).abs() < 1e-9 * slope.abs().max(1.0));
    // standard error of the intercept
    let se = sigma * (sxx / det).sqrt();
    assert!((f.intercept - 0.0384).abs() < 3.0 * se);
}

#[test]
fn gauge_changes_no_eigenvalue() {
    let grid = GridSpec::new(10.0, 250).unwrap();
    let rule = QuadratureRule::default();
    let beta = 0.2;
    let a = assemble_kernel(&KernelSpec::Linear { alpha: 0.3, beta }, &grid, &rule).unwrap();
    let b = assemble_kernel(&KernelSpec::Linear { alpha: -0.45, beta }, &grid, &rule).unwrap();
    // B = D A D^dagger with D = diag(exp(i (0.3 + 0.45) u^2))
    let u = grid.nodes();
    let d = |k: usize| Complex64::from_polar(1.0, 0.75 * u[k] * u[k]);
    let mut diff = 0.0f64;
    for i in 0..grid.dim() {
        for j in 0..grid.dim() {
            diff = diff.max((b.get(i, j) - d(i) * a.get(i, j) * d(j).conj()).norm());
        }
    }
    assert!(diff < 1e-12, "entrywise {diff:e}");
    assert!(max_gap(&sorted_spectrum(&a), &sorted_spectrum(&b)) < 1e-12);
}

#[test]
fn linear_spectra_dilate() {
    let rule = QuadratureRule::default();
    let (alpha, beta) = (0.3, 0.2);
    for scale in [0.5, 2.0] {
        let g1 = GridSpec::new(10.0, 250).unwrap();
        let g2 = GridSpec::new(10.0 * scale, 250).unwrap();
        let s2 = scale * scale;
        let a = assemble_kernel(&KernelSpec::Linear { alpha, beta }, &g1, &rule).unwrap();
        let b = assemble_kernel(&KernelSpec::Linear { alpha: alpha / s2, beta: beta / s2 }, &g2, &rule).unwrap();
        assert!(max_gap(&sorted_spectrum(&a), &sorted_spectrum(&b)) < 1e-10);
    }
}

#[test]
fn spectra_lie_in_unit_interval() {
    let grid = GridSpec::new(15.0, 500).unwrap();
    let rule = QuadratureRule::default();
    for k in [
        KernelSpec::BrackenMelloy,
        KernelSpec::boundary(BoundaryShape::Straight { slope: 1.0 }, 4),
        KernelSpec::boundary(BoundaryShape::GaussianBump { epsilon: -0.5 }, 4),
        KernelSpec::boundary(BoundaryShape::GaussianBump { epsilon: 0.5 }, 4),
    ] {
        let m = assemble_kernel(&k, &grid, &rule).unwrap();
        let (lo, hi) = spectrum_bounds(&m, 80);
        assert!(lo >= -1.05 && hi <= 1.05, "{}: [{lo}, {hi}]", k.describe());
        assert!(m.defect <= 1e-10);
        let top = top_eigenvalues(&m, 2, 80);
        assert!(top[0] >= top[1]);
        assert!((top[0] - hi).abs() < 1e-15);
    }
}

#[test]
fn refinement_settles() {
    let rule = QuadratureRule::default();
    let k = KernelSpec::boundary(BoundaryShape::Straight { slope: 1.0 }, 4);
    let a = assemble_kernel(&k, &GridSpec::new(10.0, 1000).unwrap(), &rule).unwrap();
    let b = assemble_kernel(&k, &GridSpec::new(10.0, 2000).unwrap(), &rule).unwrap();
    let (x, y) = (max_eigenpair(&a).unwrap(), max_eigenpair(&b).unwrap());
    assert!((x.value - y.value).abs() < 1e-2);
    assert!(y.residual <= 1e-8);
}

#[test]
fn power_iteration_agrees_with_dense() {
    let grid = GridSpec::new(10.0, 200).unwrap();
    let m = assemble_kernel(&KernelSpec::BrackenMelloy, &grid, &QuadratureRule::default()).unwrap();
    let a = max_eigenpair(&m).unwrap();
    let b = max_eigenpair_with(&m, &power_only(), None).unwrap();
    assert!((a.value - b.value).abs() < 1e-11);
    let overlap: Complex64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x.conj() * y).sum();
    assert!((overlap.norm() - 1.0).abs() < 1e-6);
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let kernel = KernelSpec::boundary(BoundaryShape::GaussianBump { epsilon: -0.2 }, 4);
    let mut plan = StudyPlan::new(vec![5.0, 8.0], vec![40, 80]);
    plan.rule = gauss_legendre(32).unwrap();
    plan.eigen = power_only();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| estimate_kernel(&kernel, &plan).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    let m1 = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| assemble_kernel(&kernel, &GridSpec::new(8.0, 80).unwrap(), &plan.rule).unwrap());
    let m4 = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| assemble_kernel(&kernel, &GridSpec::new(8.0, 80).unwrap(), &plan.rule).unwrap());
    assert_eq!(m1.as_slice(), m4.as_slice());
}

#[test]
fn rejects_bad_plans() {
    let k = KernelSpec::BrackenMelloy;
    assert!(estimate_kernel(&k, &StudyPlan::new(vec![5.0], vec![40, 80])).is_err());
    assert!(estimate_kernel(&k, &StudyPlan::new(vec![8.0, 5.0], vec![40, 80])).is_err());
    let tab = BoundaryShape::tabulated(vec![-1.0, 0.0, 1.0], vec![-1.0, 0.0, 1.0]).unwrap();
    assert!(assemble_kernel(&KernelSpec::boundary(tab, 4), &GridSpec::new(5.0, 10).unwrap(), &QuadratureRule::default())
        .is_err());
}
