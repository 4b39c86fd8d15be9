use std::path::PathBuf;

use backflow_core::kernels::{gauss_legendre, QuadratureRule};
use backflow_core::oracle::{
    delta_direct, position_split, state_from_eigvec, z_projection, Correlation, MomentumWindow, WavepacketState,
};
use backflow_core::perturbation::{linear_prediction, perturbation_study, PerturbationStudy};
use backflow_core::scales::{boundary_samples, WINDOW};
use backflow_core::spectral::{
    assemble_cached, estimate_kernel, max_eigenpair, KernelSpec, MatrixCache, StudyPlan, SupremumEstimate,
};
use backflow_core::{BoundaryShape, Complex64, GridSpec};
use rayon::prelude::*;

use crate::config::{Settings, ShapeChoice};
use crate::output::{line_plot, num, write_file, Csv, Series};
use crate::CliError;

const TRANSFER_TOLERANCE: f64 = 2e-3;
const CONSERVATION_TOLERANCE: f64 = 1e-3;
const SUPPORT_TOLERANCE: f64 = 1e-4;
const TRACE_POINTS: usize = 41;
const MAX_Z_ROWS: usize = 4000;

fn rule(s: &Settings) -> Result<QuadratureRule, CliError> {
    Ok(gauss_legendre(s.quadrature)?)
}

fn cache(s: &Settings) -> Result<Option<MatrixCache>, CliError> {
    s.cache_location().map(MatrixCache::new).transpose().map_err(|e| CliError::Config(e.to_string()))
}

fn plan(s: &Settings) -> Result<StudyPlan, CliError> {
    let mut p = StudyPlan::new(s.lengths.clone(), s.intervals.clone());
    p.rule = rule(s)?;
    p.cache = cache(s)?;
    p.validate()?;
    Ok(p)
}

fn bump(epsilon: f64) -> Result<BoundaryShape, CliError> {
    BoundaryShape::gaussian_bump(epsilon).map_err(|_| {
        CliError::Config(format!(
            "epsilon = {epsilon} is inadmissible: the boundary x = s(p) must stay out of the fourth quadrant \
             (p > 0, x < 0), which requires epsilon > -1"
        ))
    })
}

fn shape(s: &Settings) -> Result<Option<BoundaryShape>, CliError> {
    Ok(match s.shape {
        ShapeChoice::Straight => Some(BoundaryShape::straight(s.slope)?),
        ShapeChoice::Bump => Some(bump(s.epsilon)?),
        ShapeChoice::Bm => None,
    })
}

fn kernel(s: &Settings) -> Result<KernelSpec, CliError> {
    Ok(match shape(s)? {
        Some(b) => KernelSpec::boundary(b, s.series_order),
        None => KernelSpec::BrackenMelloy,
    })
}

fn report_flags(what: &str, est: &SupremumEstimate) {
    for f in &est.flags {
        eprintln!("warning: {what}: {f}");
    }
}

fn mib(dim: usize) -> f64 {
    (dim * dim * 16) as f64 / (1024.0 * 1024.0)
}

pub fn dry_run(s: &Settings) {
    println!("# {} (config-hash {})", s.command.name(), s.hash());
    match s.command {
        crate::config::CommandKind::BmLambda | crate::config::CommandKind::MuScan => {
            let runs = if s.command == crate::config::CommandKind::MuScan { s.epsilons.len() + 2 } else { 1 };
            for &l in &s.lengths {
                for &n in &s.intervals {
                    println!("L = {l}  N = {n}  matrix {0} x {0}  ({1:.1} MiB)", n + 1, mib(n + 1));
                }
            }
            println!("{} grid(s) x {runs} estimate(s)", s.lengths.len() * s.intervals.len());
        }
        crate::config::CommandKind::Verify | crate::config::CommandKind::KernelDump => {
            println!("L = {}  N = {}  matrix {2} x {2}  ({3:.1} MiB)", s.length, s.points, s.points + 1, mib(s.points + 1));
        }
        crate::config::CommandKind::BoundaryDump => {
            for e in &s.epsilons {
                println!("epsilon = {e}: {} samples on [{}, {}]", s.samples, s.p_min, s.p_max);
            }
        }
    }
}

pub fn bm_lambda(s: &Settings) -> Result<(), CliError> {
    let kernel = kernel(s)?;
    let plan = plan(s)?;
    let est = estimate_kernel(&kernel, &plan)?;
    report_flags(&kernel.describe(), &est);
    let hash = s.hash();

    let mut raw = Csv::new(&hash, "length,intervals,mu,iterations");
    raw.note("kernel", &kernel.describe());
    for r in &est.per_n {
        raw.row(&[num(r.length), r.intervals.to_string(), num(r.value), r.iterations.to_string()]);
    }
    raw.write(&s.dir, "bm_lambda.csv")?;

    let mut fits = Csv::new(&hash, "length,mu_l,slope,residual");
    fits.note("kernel", &kernel.describe());
    for f in &est.per_l {
        fits.row(&[num(f.length), num(f.value), num(f.slope), num(f.residual)]);
    }
    fits.row(&["inf".into(), num(est.value), num(est.slope), num(est.residual)]);
    fits.write(&s.dir, "bm_lambda_fits.csv")?;

    println!("lambda_sup = {}", num(est.value));
    println!("fit slope = {}, residual = {}", num(est.slope), num(est.residual));
    Ok(())
}

struct ScanRow {
    epsilon: f64,
    mu_sup: f64,
    status: &'static str,
}

pub fn mu_scan(s: &Settings) -> Result<(), CliError> {
    let plan = plan(s)?;
    let shapes: Vec<BoundaryShape> = s.epsilons.iter().map(|&e| bump(e)).collect::<Result<_, _>>()?;
    if s.epsilons.iter().any(|e| e.abs() >= 0.5) {
        eprintln!("warning: the truncated series is only validated for |epsilon| < 0.5");
    }
    let reference = KernelSpec::boundary(BoundaryShape::straight(s.slope)?, s.series_order);
    let order = s.series_order;

    let ((lambda, pert), estimates) = rayon::join(
        || rayon::join(|| estimate_kernel(&reference, &plan), || perturbation_study(&plan)),
        || {
            shapes
                .par_iter()
                .map(|b| estimate_kernel(&KernelSpec::boundary(b.clone(), order), &plan))
                .collect::<Vec<_>>()
        },
    );

    let mut failures = Vec::new();
    let lambda_ref = match &lambda {
        Ok(e) => {
            report_flags("reference", e);
            e.value
        }
        Err(e) => {
            failures.push(format!("reference: {e}"));
            f64::NAN
        }
    };
    let pert: Option<PerturbationStudy> = match pert {
        Ok(p) => Some(p),
        Err(e) => {
            failures.push(format!("first-order study: {e}"));
            None
        }
    };
    let rows: Vec<ScanRow> = s
        .epsilons
        .iter()
        .zip(&estimates)
        .map(|(&epsilon, r)| match r {
            Ok(est) => {
                report_flags(&format!("epsilon = {epsilon}"), est);
                ScanRow { epsilon, mu_sup: est.value, status: if est.flags.is_empty() { "ok" } else { "flagged" } }
            }
            Err(e) => {
                failures.push(format!("epsilon = {epsilon}: {e}"));
                ScanRow { epsilon, mu_sup: f64::NAN, status: "failed" }
            }
        })
        .collect();

    let hash = s.hash();
    let mut csv = Csv::new(&hash, "epsilon,mu_sup,mu_linear,lambda_ref,status");
    if let Some(p) = &pert {
        csv.note("mu1", &num(p.result.mu1));
        csv.note("lambda0", &num(p.result.lambda0));
        if p.result.degenerate {
            csv.note("warning", "near-degenerate unperturbed maximum; first order unreliable");
            eprintln!("warning: gap {} between the two largest unperturbed eigenvalues", num(p.result.gap));
        }
    }
    let linear = |e: f64| pert.as_ref().map_or(f64::NAN, |p| linear_prediction(&p.result, e));
    for r in &rows {
        csv.row(&[num(r.epsilon), num(r.mu_sup), num(linear(r.epsilon)), num(lambda_ref), r.status.to_string()]);
    }
    let path = csv.write(&s.dir, "mu_scan.csv")?;

    if s.svg {
        let svg = line_plot(
            "Supremum over the Gaussian-bump family",
            "epsilon",
            "mu_sup",
            &[
                Series {
                    label: "mu_sup",
                    points: rows.iter().map(|r| (r.epsilon, r.mu_sup)).collect(),
                    style: r#"stroke="black" stroke-width="2.5""#,
                },
                Series {
                    label: "linear prediction",
                    points: rows.iter().map(|r| (r.epsilon, linear(r.epsilon))).collect(),
                    style: r#"stroke="black" stroke-width="1.2" stroke-dasharray="6 4""#,
                },
                Series {
                    label: "straight reference",
                    points: rows.iter().map(|r| (r.epsilon, lambda_ref)).collect(),
                    style: r##"stroke="#777777" stroke-width="1""##,
                },
            ],
        );
        write_file(&s.dir, "mu_scan.svg", &svg)?;
    }

    println!("wrote {}", path.display());
    println!("lambda_ref = {}", num(lambda_ref));
    if let Some(p) = &pert {
        println!("mu1 = {}, lambda0 = {}", num(p.result.mu1), num(p.result.lambda0));
    }
    if let Some(best) = rows.iter().filter(|r| r.mu_sup.is_finite()).max_by(|a, b| a.mu_sup.total_cmp(&b.mu_sup)) {
        println!("max mu_sup = {} at epsilon = {}", num(best.mu_sup), num(best.epsilon));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("error: {f}");
        }
        Err(CliError::Numerical(format!("{} of the scan computations failed", failures.len())))
    }
}

/// Smooth probe state vanishing identically for `x >= 0`.
fn left_supported_probe() -> Result<WavepacketState, CliError> {
    let (dp, j) = (0.02, 16384);
    let dx = 2.0 * std::f64::consts::PI / (j as f64 * dp);
    let psi = (0..j)
        .map(|n| {
            let x = (n as f64 - (j / 2) as f64 + 0.5) * dx;
            if x < 0.0 {
                Complex64::from_polar(x * x * (-(x + 4.0).powi(2) / 2.0).exp(), 0.8 * x)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(WavepacketState::from_position(dp, psi)?)
}

fn negative_weight(table: &[(f64, f64)]) -> f64 {
    let dz = table[1].0 - table[0].0;
    table.iter().filter(|p| p.0 < 0.0).map(|p| p.1).sum::<f64>() * dz
}

/// Rows carrying the density, thinned to at most `MAX_Z_ROWS`.
fn thin(table: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let peak = table.iter().map(|p| p.1).fold(0.0, f64::max);
    let first = table.iter().position(|p| p.1 > 1e-12 * peak).unwrap_or(0);
    let last = table.iter().rposition(|p| p.1 > 1e-12 * peak).unwrap_or(table.len() - 1);
    let stride = (last - first + 1).div_ceil(MAX_Z_ROWS).max(1);
    table[first..=last].iter().step_by(stride).copied().collect()
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

pub fn verify(s: &Settings) -> Result<(), CliError> {
    let grid = GridSpec::new(s.length, s.points)?;
    let boundary = shape(s)?;
    let kernel = kernel(s)?;
    let correlation = match &boundary {
        Some(b) => Correlation::Boundary(b.clone()),
        None => Correlation::Momentum,
    };
    let m = assemble_cached(cache(s)?.as_ref(), &kernel, &grid, &rule(s)?)?;
    let phi = max_eigenpair(&m)?;
    drop(m);
    let window = MomentumWindow { samples_per_cell: s.samples_per_cell, ..Default::default() };
    let rec = state_from_eigvec(&phi, &grid, &correlation, &window)?;
    let (state, tau) = (&rec.state, rec.tau);
    let meas = delta_direct(state, tau, s.duration)?;
    let mut checks = Vec::new();

    if s.duration == 0.0 {
        checks.push(Check {
            name: "zero window",
            pass: meas.delta == 0.0,
            detail: format!("delta = {} for T = 0", num(meas.delta)),
        });
    } else {
        let gap = (meas.delta - phi.value).abs();
        checks.push(Check {
            name: "transfer",
            pass: gap <= TRANSFER_TOLERANCE,
            detail: format!(
                "|delta - mu| = {} (delta = {}, mu = {}), tolerance {}",
                num(gap),
                num(meas.delta),
                num(phi.value),
                num(TRANSFER_TOLERANCE)
            ),
        });
    }

    let times: Vec<f64> = if s.duration == 0.0 {
        vec![tau]
    } else {
        (0..TRACE_POINTS).map(|i| tau + s.duration * i as f64 / (TRACE_POINTS - 1) as f64).collect()
    };
    let splits: Vec<_> = times.par_iter().map(|&t| position_split(state, t)).collect();
    let drift = splits.iter().map(|p| (p.left + p.right - 1.0).abs().max(p.guard)).fold(0.0, f64::max);
    checks.push(Check {
        name: "conservation",
        pass: drift <= CONSERVATION_TOLERANCE,
        detail: format!("max |P_left + P_right - 1| and guard-band mass = {}, tolerance {}", num(drift), num(CONSERVATION_TOLERANCE)),
    });
    let hash = s.hash();
    let mut trace = Csv::new(&hash, "t,P_left");
    for (t, p) in times.iter().zip(&splits) {
        trace.row(&[num(*t), num(p.left)]);
    }
    trace.write(&s.dir, "verify_trace.csv")?;

    // support of the rebuilt state in its own frame
    let outside = match &boundary {
        None => (0..state.len())
            .filter(|&j| state.momentum(j) < 0.0)
            .map(|j| state.amplitudes()[j].norm_sqr() * state.dp())
            .sum::<f64>(),
        Some(b) => {
            let amps = (0..state.len())
                .map(|j| {
                    let p = state.momentum(j);
                    state.amplitudes()[j] * Complex64::from_polar(1.0, b.antiderivative(p) - p * p * tau / 2.0)
                })
                .collect();
            position_split(&WavepacketState::new(state.dp(), amps)?, 0.0).right
        }
    };
    checks.push(Check {
        name: "admissible support",
        pass: outside <= SUPPORT_TOLERANCE,
        detail: format!("weight outside the allowed region = {}, tolerance {}", num(outside), num(SUPPORT_TOLERANCE)),
    });

    let probe = left_supported_probe()?;
    let t = 2.0;
    let probe_z = z_projection(&probe, t, 1.0 / t)?;
    let probe_neg = negative_weight(&probe_z);
    checks.push(Check {
        name: "correlation structure",
        pass: probe_neg <= SUPPORT_TOLERANCE,
        detail: format!("x<0 state at t = {t}: weight on z<0 = {}, tolerance {}", num(probe_neg), num(SUPPORT_TOLERANCE)),
    });

    let z = match &boundary {
        // the straight-frame state sits on x <= 0 at time 0, so z = -x/t is its frame coordinate
        Some(BoundaryShape::Straight { .. }) => z_projection(state, tau, 1.0 / tau)?,
        _ => probe_z,
    };
    let mut zcsv = Csv::new(&hash, "z,density");
    for (zz, d) in thin(&z) {
        zcsv.row(&[num(zz), num(d)]);
    }
    zcsv.write(&s.dir, "verify_z.csv")?;

    let mut failed = Vec::new();
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.pass {
            failed.push(format!("{}: {}", c.name, c.detail));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join("; ")))
    }
}

pub fn boundary_dump(s: &Settings) -> Result<(), CliError> {
    let hash = s.hash();
    let mut files: Vec<(String, BoundaryShape, String)> = Vec::new();
    match s.shape {
        ShapeChoice::Straight => {
            files.push(("boundary_straight.csv".into(), BoundaryShape::straight(s.slope)?, format!("slope {}", num(s.slope))))
        }
        _ => {
            for &e in &s.epsilons {
                files.push((format!("boundary_eps_{}.csv", num(e)), bump(e)?, format!("epsilon {}", num(e))));
            }
        }
    }
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, b, label) in &files {
        let mut csv = Csv::new(&hash, "p,s_of_p");
        csv.note("shape", label);
        for (p, v) in boundary_samples(b, s.p_min, s.p_max, s.samples)? {
            csv.row(&[num(p), num(v)]);
        }
        written.push(csv.write(&s.dir, name)?);
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn kernel_dump(s: &Settings) -> Result<(), CliError> {
    let grid = GridSpec::new(s.length, s.points)?;
    let kernel = kernel(s)?;
    let m = assemble_cached(cache(s)?.as_ref(), &kernel, &grid, &rule(s)?)?;
    let u = grid.nodes();
    let w = grid.weight();
    let mut csv = Csv::new(&s.hash(), "u,u_prime,re,im");
    csv.note("kernel", &kernel.describe());
    csv.note("window", &num(WINDOW));
    for (i, &a) in u.iter().enumerate() {
        for (j, &b) in u.iter().enumerate() {
            let k = m.get(i, j) / w;
            csv.row(&[num(a), num(b), num(k.re), num(k.im)]);
        }
    }
    let path = csv.write(&s.dir, "kernel.csv")?;
    println!("wrote {}", path.display());
    Ok(())
}
