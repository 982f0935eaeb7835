//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use nalgebra::{DMatrix, DVector};
use odds_core::chebyshev::{diff_matrix_first, diff_matrix_higher, reference_nodes};
use odds_core::experiments::{run_experiment, time_schemes, ExperimentConfig, ExperimentKind, Scheme};
use odds_core::linalg::{
    krylov_solve, stack, unstack, BoundaryPair, CnSystem, CsrMatrix, LinearOperator, SolverOptions,
};
use odds_core::mesh::{assemble_global, build_mesh, element_width, split_interior_boundary};
use odds_core::stepper::{nonlinear_flow, Boundary2D, Integrator, Odds2D, ProblemSpec};
use odds_core::C64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let mut lines = text.lines();
    let head: Vec<String> = lines.next().unwrap_or("").split(',').map(String::from).collect();
    lines.map(|l| head.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn chebyshev_exactness() -> Verdict {
    let mut worst: f64 = 0.0;
    for j in [2usize, 4, 8, 16, 32] {
        let eta = reference_nodes(j).unwrap();
        let d1 = diff_matrix_first(j).unwrap();
        let d2 = diff_matrix_higher(j, 2).unwrap();
        for s in 0..=j as i32 {
            let f: Vec<f64> = eta.nodes().iter().map(|x| x.powi(s)).collect();
            let df: Vec<f64> = eta.nodes().iter().map(|x| if s < 1 { 0.0 } else { s as f64 * x.powi(s - 1) }).collect();
            let ddf: Vec<f64> =
                eta.nodes().iter().map(|x| if s < 2 { 0.0 } else { (s * (s - 1)) as f64 * x.powi(s - 2) }).collect();
            let e1 = max_abs(d1.apply(&f).iter().zip(&df).map(|(a, b)| a - b)) / max_abs(df.iter().copied()).max(1.0);
            let e2 = max_abs(d2.apply(&f).iter().zip(&ddf).map(|(a, b)| a - b)) / max_abs(ddf.iter().copied()).max(1.0);
            worst = worst.max(e1).max(e2);
        }
    }
    verdict(worst <= 1e-9, format!("worst scaled error {worst:.2e} (limit 1e-9)"))
}

fn mesh_closed_form() -> Verdict {
    let len = 120.0;
    let mut worst: f64 = 0.0;
    let mut count_ok = true;
    let mut example = String::new();
    for m in 1..=20usize {
        for j in 2..=40usize {
            let c = (1.0 + (std::f64::consts::PI / j as f64).cos()) / 2.0;
            let closed = len / ((m as f64 - 1.0) * c + 1.0);
            worst = worst.max((element_width((-20.0, 100.0), m, j) - closed).abs());
            if j == 2 {
                worst = worst.max((element_width((-20.0, 100.0), m, j) - 2.0 * len / (m as f64 + 1.0)).abs());
            }
            let n = build_mesh((-20.0, 100.0), m, j).unwrap().len();
            if n != m * (j - 1) + 1 && count_ok {
                count_ok = false;
                example = format!("; node count {n} != M(J-1)+1 = {} at M={m} J={j}", m * (j - 1) + 1);
            }
        }
    }
    verdict(worst <= 1e-13 * len && count_ok, format!("max |dx - closed form| {worst:.2e}{example}"))
}

fn modulus_preservation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 1_000_000;
    let mut u: Vec<C64> = (0..n).map(|_| C64::new(normal.sample(&mut rng), normal.sample(&mut rng))).collect();
    let dw: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let before: Vec<f64> = u.iter().map(|z| z.norm()).collect();
    nonlinear_flow(&mut u, 0.015, 1.0, 0.5, Some(&dw)).unwrap();
    let worst = u.iter().zip(&before).map(|(z, m)| (z.norm() - m).abs() / m).fold(0.0, f64::max);
    verdict(worst <= 1e-14, format!("max relative change {worst:.2e} over 1e6 points"))
}

fn apply(op: &dyn LinearOperator, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; op.dim()];
    op.apply(x, &mut y);
    y
}

fn kron_equivalence() -> Verdict {
    let tau = 0.015;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let uni = Uniform::new(-1.0, 1.0).unwrap();
    let mut worst_op: f64 = 0.0;
    let mut worst_step: f64 = 0.0;
    for (m, j) in [(1, 8), (4, 8), (10, 30)] {
        let mesh = build_mesh((-20.0, 100.0), m, j).unwrap();
        let sys = CnSystem::new(&split_interior_boundary(&assemble_global(&mesh, 2).unwrap()), tau).unwrap();
        let n = sys.interior_len();
        let b = sys.interior_matrix();
        let cn = |s: f64| DMatrix::from_fn(n, n, |i, k| C64::new(if i == k { 1.0 } else { 0.0 }, s * b.get(i, k)));
        let (lhs_c, rhs_c) = (cn(0.5 * tau), cn(-0.5 * tau));
        let lhs = sys.lhs();
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        let mut e = vec![0.0; 2 * n];
        for k in 0..2 * n {
            e[k] = 1.0;
            g.set_column(k, &DVector::from_vec(apply(&lhs, &e)));
            e[k] = 0.0;
        }
        let lu = g.lu();
        for _ in 0..100 {
            let u: Vec<C64> = (0..n).map(|_| C64::new(uni.sample(&mut rng), uni.sample(&mut rng))).collect();
            let uv = DVector::from_column_slice(&u);
            let s = stack(&u);
            for (real, cplx) in [(apply(&lhs, &s), &lhs_c * &uv), (apply(&sys.rhs(), &s), &rhs_c * &uv)] {
                let scale = cplx.iter().map(|z| z.norm()).fold(1.0, f64::max);
                for i in 0..n {
                    worst_op = worst_op.max((real[i] - cplx[i].re).abs() / scale);
                    worst_op = worst_op.max((real[n + i] - cplx[i].im).abs() / scale);
                }
            }
            // The real solve, put back into the complex step equation.
            let rhs = sys.step_rhs(&s, &BoundaryPair::zero());
            let next = lu.solve(&DVector::from_vec(rhs)).unwrap();
            let mut u1 = vec![C64::new(0.0, 0.0); n];
            unstack(next.as_slice(), &mut u1);
            let defect = &lhs_c * DVector::from_vec(u1) - &rhs_c * &uv;
            let scale = (&rhs_c * &uv).iter().map(|z| z.norm()).fold(1.0, f64::max);
            worst_step = worst_step.max(defect.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale);
        }
    }
    verdict(
        worst_op <= 1e-12 && worst_step <= 1e-12,
        format!("operator mismatch {worst_op:.2e}, step defect {worst_step:.2e} (limit 1e-12)"),
    )
}

fn krylov_contract() -> Verdict {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let uni = Uniform::new(-1.0, 1.0).unwrap();
    let mut worst_res: f64 = 0.0;
    let mut worst_err: f64 = 0.0;
    let mut rejected = 0;
    let n = 50;
    for _ in 0..50 {
        let mut dense = DMatrix::zeros(n, n);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row: Vec<(usize, f64)> =
                (0..n).map(|k| (k, if k == i { 0.0 } else { uni.sample(&mut rng) })).collect();
            let off: f64 = row.iter().map(|(_, v)| v.abs()).sum();
            row[i].1 = off + 1.0 + uni.sample(&mut rng).abs();
            for &(k, v) in &row {
                dense[(i, k)] = v;
            }
            rows.push(row);
        }
        let a = CsrMatrix::from_rows(n, rows);
        let b: Vec<f64> = (0..n).map(|_| 10.0 * uni.sample(&mut rng)).collect();
        match krylov_solve(&a, &b, &vec![0.0; n], &opts) {
            Ok(sol) => {
                let r = apply(&a, &sol.x);
                worst_res = worst_res.max(max_abs(r.iter().zip(&b).map(|(x, y)| x - y)));
                let exact = dense.lu().solve(&DVector::from_vec(b)).unwrap();
                worst_err = worst_err.max(max_abs(sol.x.iter().zip(exact.iter()).map(|(x, y)| x - y)));
            }
            Err(_) => rejected += 1,
        }
    }
    // Accepted CN solves on the soliton mesh.
    let mesh = build_mesh((-20.0, 100.0), 10, 30).unwrap();
    let sys = CnSystem::new(&split_interior_boundary(&assemble_global(&mesh, 2).unwrap()), 0.015).unwrap();
    for _ in 0..50 {
        let u: Vec<C64> =
            (0..sys.interior_len()).map(|_| C64::new(uni.sample(&mut rng), uni.sample(&mut rng))).collect();
        let rhs = sys.step_rhs(&stack(&u), &BoundaryPair::zero());
        if let Ok(sol) = krylov_solve(&sys.lhs(), &rhs, &stack(&u), &opts) {
            let r = apply(&sys.lhs(), &sol.x);
            worst_res = worst_res.max(max_abs(r.iter().zip(&rhs).map(|(x, y)| x - y)));
        }
    }
    verdict(
        worst_res <= 1e-5 && worst_err <= 1e-4 && rejected == 0,
        format!("max accepted residual {worst_res:.2e}, max error vs dense {worst_err:.2e}, {rejected} rejected"),
    )
}

fn convergence_order(root: &Path) -> Verdict {
    let mut c = ExperimentConfig::preset(ExperimentKind::Convergence);
    c.workers = workers();
    let out = match run_experiment(&c, root) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    let errs: Vec<f64> = read_csv(&out.dir.join("errors.csv")).iter().map(|r| num(r, "err")).collect();
    let fit = read_csv(&out.dir.join("order_fit.csv"));
    let order = fit.first().map(|r| num(r, "global_order")).unwrap_or(f64::NAN);
    let non_monotone = errs.windows(2).filter(|w| !(w[1] < w[0])).count();
    verdict(
        non_monotone <= 1 && (0.4..=1.2).contains(&order),
        format!(
            "errors [{}], non-monotone levels {non_monotone}, global order {order:.3} (window [0.4, 1.2])",
            sci(&errs)
        ),
    )
}

fn charge_conservation(root: &Path) -> Verdict {
    let c = ExperimentConfig::preset(ExperimentKind::Soliton1d);
    let out = match run_experiment(&c, root) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    let charge: Vec<f64> = read_csv(&out.dir.join("charge.csv")).iter().map(|r| num(r, "value")).collect();
    let q0 = charge.first().copied().unwrap_or(f64::NAN);
    let drift = max_abs(charge.iter().map(|q| q - q0)) / q0;
    verdict(drift <= 1e-2, format!("relative charge drift {drift:.2e} over {} steps (limit 1e-2)", c.steps()))
}

fn energy_growth(root: &Path) -> Verdict {
    let mut noisy = ExperimentConfig::preset(ExperimentKind::Soliton1d);
    noisy.problem.eps = 0.05;
    noisy.trajectories = 20;
    noisy.workers = workers();
    noisy.output_dir = Some("energy_noisy".into());
    let mut quiet = ExperimentConfig::preset(ExperimentKind::Soliton1d);
    quiet.problem.eps = 0.0;
    quiet.output_dir = Some("energy_quiet".into());
    let (a, b) = match (run_experiment(&noisy, root), run_experiment(&quiet, root)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return verdict(false, "run failed"),
    };
    let fit = read_csv(&a.dir.join("energy_fit.csv"));
    let (slope, r2) = fit.first().map(|r| (num(r, "slope"), num(r, "r_squared"))).unwrap_or((f64::NAN, f64::NAN));
    let summary = read_csv(&b.dir.join("summary.csv"));
    let (h0, h1) =
        summary.first().map(|r| (num(r, "energy_initial"), num(r, "energy_final"))).unwrap_or((f64::NAN, f64::NAN));
    let drift = (h1 - h0).abs() / h0.abs();
    verdict(
        slope > 0.0 && r2 >= 0.9 && drift <= 0.01,
        format!("eps=0.05 mean-energy slope {slope:.3e}, R^2 {r2:.3} (need > 0 and >= 0.9); eps=0 drift {drift:.2e} (limit 1e-2)"),
    )
}

fn lod_consistency() -> Verdict {
    let horizon = 0.4;
    let mut errs = Vec::new();
    for tau in [0.1, 0.05, 0.025] {
        let problem = ProblemSpec { lambda: 0.0, eps: 0.0, tau, final_time: horizon };
        let tight = SolverOptions::with_tolerance(1e-13);
        let odds = Odds2D::square(problem, Boundary2D::zero(), (-10.0, 10.0), 1, 9, tight).unwrap();
        let (nx, ny) = odds.shape();
        let (xs, ys) = (odds.mesh_x().nodes().to_vec(), odds.mesh_y().nodes().to_vec());
        let mut u: Vec<C64> =
            ys.iter().flat_map(|&y| xs.iter().map(move |&x| C64::new((-(x * x + y * y) / 2.0).exp(), 0.0))).collect();
        let sys = odds.systems();
        let (ix, iy) = (nx - 2, ny - 2);
        let n = ix * iy;
        let mut b = DMatrix::<C64>::zeros(n, n);
        for j in 0..iy {
            for i in 0..ix {
                for k in 0..ix {
                    b[(j * ix + i, j * ix + k)] += sys.x.interior_matrix().get(i, k);
                }
                for k in 0..iy {
                    b[(j * ix + i, k * ix + i)] += sys.y.interior_matrix().get(j, k);
                }
            }
        }
        let id = DMatrix::<C64>::identity(n, n);
        let half = C64::new(0.0, 0.5 * tau);
        let lhs = (&id + &b * half).lu();
        let rhs = &id - &b * half;
        let at = |r: usize| (r / ix + 1) * nx + r % ix + 1;
        let mut v = DVector::from_fn(n, |r, _| u[at(r)]);
        let steps = (horizon / tau).round() as usize;
        for s in 0..steps {
            v = lhs.solve(&(&rhs * &v)).unwrap();
            odds.step(&mut u, s as f64 * tau, None).unwrap();
        }
        errs.push((0..n).map(|r| (u[at(r)] - v[r]).norm()).fold(0.0, f64::max));
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    verdict(
        ratios.iter().all(|r| (3.2..=4.8).contains(r)),
        format!("8x8 interior, T=0.4, errors [{}], halving ratios {ratios:.3?} (window [3.2, 4.8])", sci(&errs)),
    )
}

fn efficiency_ordering() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for (label, config) in
        [("1D", ExperimentConfig::preset(ExperimentKind::Efficiency)), ("2D", ExperimentConfig::preset_efficiency_2d())]
    {
        let rows = match time_schemes(&config, 3) {
            Ok(r) => r,
            Err(e) => return verdict(false, format!("{label} timing failed: {e}")),
        };
        let odds = rows.iter().find(|r| r.scheme == Scheme::Odds).map(|r| r.median).unwrap_or(f64::INFINITY);
        let mut parts = Vec::new();
        for r in &rows {
            parts.push(format!("{} {:.2}s/{}pts", r.scheme.name(), r.median, r.grid_points));
            if r.scheme != Scheme::Odds && odds > r.median {
                pass = false;
            }
        }
        lines.push(format!("{label}: {}", parts.join(", ")));
    }
    verdict(pass, format!("medians of 3, {}", lines.join("; ")))
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .map(|d| {
            d.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default()
}

fn determinism(root: &Path) -> Verdict {
    let mut soliton = ExperimentConfig::preset(ExperimentKind::Soliton1d);
    soliton.problem.final_time = 0.9;
    soliton.problem.eps_sweep = vec![0.01, 0.05];
    soliton.output.snapshot_times = vec![0.0, 0.9];
    let mut collision = ExperimentConfig::preset(ExperimentKind::Collision1d);
    collision.problem.final_time = 0.6;
    collision.output.snapshot_times = vec![0.0, 0.6];
    let mut gaussian = ExperimentConfig::preset(ExperimentKind::Gaussian2d);
    gaussian.problem.final_time = 0.1;
    gaussian.mesh.degree = 16;
    gaussian.output.snapshot_times = vec![0.0, 0.1];
    let mut convergence = ExperimentConfig::preset(ExperimentKind::Convergence);
    convergence.problem.final_time = 0.0625;
    let mut checked = 0;
    for mut c in [soliton, collision, gaussian, convergence] {
        c.trajectories = c.trajectories.clamp(6, 12);
        let mut outputs = Vec::new();
        for w in [1, 4] {
            c.workers = w;
            c.output_dir = Some(format!("det_{}_{w}", c.kind.name()));
            match run_experiment(&c, root) {
                Ok(o) if o.error.is_none() => outputs.push(csv_bytes(&o.dir)),
                _ => return verdict(false, format!("{} run failed", c.kind.name())),
            }
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            return verdict(false, format!("{} CSVs differ between 1 and 4 workers", c.kind.name()));
        }
        checked += outputs[0].len();
    }
    verdict(true, format!("{checked} CSV files byte-identical at 1 and 4 workers"))
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let r = root.path();
    let criteria: Vec<(u32, &str, f64, Box<dyn Fn() -> Verdict>)> = vec![
        (1, "Chebyshev exactness", 1.0, Box::new(chebyshev_exactness)),
        (2, "mesh closed form", 1.0, Box::new(mesh_closed_form)),
        (3, "modulus preservation", 5.0, Box::new(modulus_preservation)),
        (4, "Kron/complex equivalence", 10.0, Box::new(kron_equivalence)),
        (5, "Krylov contract", 10.0, Box::new(krylov_contract)),
        (6, "temporal order (scaled)", 600.0, Box::new(move || convergence_order(r))),
        (7, "charge conservation", 120.0, Box::new(move || charge_conservation(r))),
        (8, "energy growth", 300.0, Box::new(move || energy_growth(r))),
        (9, "2D LOD consistency", 30.0, Box::new(lod_consistency)),
        (10, "efficiency ordering", 600.0, Box::new(efficiency_ordering)),
        (11, "determinism", 120.0, Box::new(move || determinism(r))),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, check) in &criteria {
        let t0 = Instant::now();
        let v = check();
        let secs = t0.elapsed().as_secs_f64();
        let pass = v.pass && secs <= *limit;
        let timing = if secs <= *limit { String::new() } else { format!(" [over the {limit}s budget]") };
        println!("criterion {id:>2} {}: {name}: {} ({secs:.2}s){timing}", if pass { "PASS" } else { "FAIL" }, v.detail);
        if !pass {
            failed.push(*id);
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
