//! Config-driven experiment harness writing long-format CSVs and a manifest.

pub mod config;
pub mod manifest;
mod output;

pub use config::{
    BaselineConfig, BoundaryMode, ConvergenceConfig, EfficiencyConfig, ExperimentConfig, ExperimentKind, InitialConfig,
    MeshConfig, NoiseConfig, OutputConfig, ProblemConfig, Scheme, CONFIG_SCHEMA,
};
pub use manifest::{RunManifest, StageTiming};

use crate::baselines::{Fdscn1D, Fdscn2D, FixedPointOptions, Smm1D, Smm2D, UniformGrid, UniformGrid2D};
use crate::error::{OddsError, Result};
use crate::linalg::SolverOptions;
use crate::mesh::build_mesh;
use crate::noise::{NoiseModel1D, NoiseModel2D, NoisePath, QWienerField};
use crate::observables::{
    averaged_energy_growth, discrete_charge, fit_order, mean_square_error, trajectory_mean, ErrorTable,
    ObservableSeries, Terminal,
};
use crate::stepper::{
    run_trajectory, Boundary1D, Boundary2D, Integrator, Odds1D, Odds2D, ProblemSpec, RunOptions, SideFn, TimeFn,
    TrajectoryRecord,
};
use num_complex::Complex64 as C64;
use output::{fmt, CsvFile};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// What a run left on disk. `error` holds the first trajectory failure when
/// the outputs are partial.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub error: Option<OddsError>,
}

impl ExperimentOutcome {
    pub fn into_result(self) -> Result<Self> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Runs one experiment below `output_root`.
pub fn run_experiment(config: &ExperimentConfig, output_root: &Path) -> Result<ExperimentOutcome> {
    config.validate()?;
    let dir = output_root.join(config.output_dir_name());
    std::fs::create_dir_all(&dir)?;
    let mut run = Run { config, dir, manifest: RunManifest::new(config), error: None };
    match config.kind {
        ExperimentKind::Soliton1d | ExperimentKind::Collision1d | ExperimentKind::Gaussian2d => run_fields(&mut run)?,
        ExperimentKind::Convergence => run_convergence(&mut run)?,
        ExperimentKind::Efficiency => run_efficiency(&mut run)?,
    }
    run.manifest.write(&run.dir)?;
    Ok(ExperimentOutcome { dir: run.dir, manifest: run.manifest, error: run.error })
}

struct Run<'a> {
    config: &'a ExperimentConfig,
    dir: PathBuf,
    manifest: RunManifest,
    error: Option<OddsError>,
}

impl Run<'_> {
    fn fail(&mut self, eps: f64, trajectory: u64, e: OddsError) {
        self.manifest.fail(eps, trajectory, e.to_string());
        if self.error.is_none() {
            self.error = Some(e);
        }
    }

    fn finish(&mut self, file: CsvFile) -> Result<()> {
        let name = file.finish()?;
        self.manifest.record_artifact(&self.dir, &name)
    }
}

/// Maps `f` over `0..n` on `workers` threads, keeping index order.
pub fn farm<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| OddsError::InvalidParameter(format!("worker pool: {e}")))?;
            return Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()));
        }
    }
    let _ = workers;
    Ok((0..n).map(f).collect())
}

fn problem_for(config: &ExperimentConfig, eps: f64, tau: f64, final_time: f64) -> ProblemSpec {
    ProblemSpec { lambda: config.problem.lambda, eps, tau, final_time }
}

fn domain(d: [f64; 2]) -> (f64, f64) {
    (d[0], d[1])
}

/// Initial data as a function of position(s).
pub enum InitialDatum {
    Line(Arc<dyn Fn(f64) -> C64 + Send + Sync>),
    Plane(Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>),
}

/// `sqrt(6/5) sech(sqrt2 x) e^{i s x}`
pub fn soliton_datum(carrier_sign: f64) -> impl Fn(f64) -> C64 + Send + Sync + Clone {
    move |x: f64| {
        let a = (6.0_f64 / 5.0).sqrt() / (2.0_f64.sqrt() * x).cosh();
        C64::from_polar(a, carrier_sign * x)
    }
}

/// Two solitons at 0 and 30 with carriers `e^{2isx}` and `e^{0.5is(x-30)}`.
pub fn collision_datum(carrier_sign: f64) -> impl Fn(f64) -> C64 + Send + Sync + Clone {
    move |x: f64| {
        let s2 = 2.0_f64.sqrt();
        let a = (6.0_f64 / 5.0).sqrt() / (s2 * x).cosh();
        let b = (3.0_f64 / 5.0).sqrt() / (s2 * (x - 30.0)).cosh();
        C64::from_polar(a, 2.0 * carrier_sign * x) + C64::from_polar(b, 0.5 * carrier_sign * (x - 30.0))
    }
}

/// `A exp(c1 x^2 + c2 y^2)`
pub fn gaussian_datum(initial: &InitialConfig) -> impl Fn(f64, f64) -> C64 + Send + Sync + Clone {
    let (a, c1, c2) = (initial.amplitude, initial.c1, initial.c2);
    move |x: f64, y: f64| C64::new(a * (c1 * x * x + c2 * y * y).exp(), 0.0)
}

/// `sin(pi x)`
pub fn sine_datum(x: f64) -> C64 {
    C64::new((std::f64::consts::PI * x).sin(), 0.0)
}

fn datum_for(config: &ExperimentConfig) -> InitialDatum {
    let s = config.initial.carrier_sign;
    match config.kind {
        ExperimentKind::Soliton1d => InitialDatum::Line(Arc::new(soliton_datum(s))),
        ExperimentKind::Collision1d => InitialDatum::Line(Arc::new(collision_datum(s))),
        ExperimentKind::Convergence => InitialDatum::Line(Arc::new(sine_datum)),
        ExperimentKind::Gaussian2d => InitialDatum::Plane(Arc::new(gaussian_datum(&config.initial))),
        ExperimentKind::Efficiency => {
            if config.mesh.is_2d() {
                InitialDatum::Plane(Arc::new(gaussian_datum(&config.initial)))
            } else {
                InitialDatum::Line(Arc::new(soliton_datum(s)))
            }
        }
    }
}

/// An integrator together with its grid, initial state and noise field.
pub struct Setup {
    pub integrator: Box<dyn Integrator + Send>,
    pub x: Vec<f64>,
    /// Empty in 1D.
    pub y: Vec<f64>,
    pub initial: Vec<C64>,
    pub field: Box<dyn QWienerField>,
}

/// Builds the discretisation of `scheme` for `problem`.
pub fn build_setup(config: &ExperimentConfig, scheme: Scheme, problem: ProblemSpec) -> Result<Setup> {
    let solver = SolverOptions::default();
    let fp = FixedPointOptions::default();
    let mesh = &config.mesh;
    let xd = domain(mesh.domain);
    match datum_for(config) {
        InitialDatum::Line(u0) => {
            let boundary = match config.problem.boundary {
                BoundaryMode::Zero => Boundary1D::zero(),
                BoundaryMode::Initial => {
                    let (l, r) = (u0(xd.0), u0(xd.1));
                    let left: TimeFn = Arc::new(move |_| l);
                    let right: TimeFn = Arc::new(move |_| r);
                    Boundary1D { left, right }
                }
            };
            let (integrator, x): (Box<dyn Integrator + Send>, Vec<f64>) = match scheme {
                Scheme::Odds => {
                    let m = build_mesh(xd, mesh.elements, mesh.degree)?;
                    let x = m.nodes().to_vec();
                    (Box::new(Odds1D::new(problem, boundary, m, solver)?), x)
                }
                Scheme::Smm | Scheme::Fdscn => {
                    let grid = UniformGrid::new(xd, baseline(config)?.intervals)?;
                    let x = grid.nodes().to_vec();
                    if scheme == Scheme::Smm {
                        (Box::new(Smm1D::new(problem, boundary, grid, solver, fp)?), x)
                    } else {
                        (Box::new(Fdscn1D::new(problem, boundary, grid, solver, fp)?), x)
                    }
                }
            };
            let initial = x.iter().map(|&v| u0(v)).collect();
            let field = Box::new(NoiseModel1D::new(xd, config.noise_modes(), &x)?);
            Ok(Setup { integrator, x, y: Vec::new(), initial, field })
        }
        InitialDatum::Plane(u0) => {
            let yd = domain(mesh.y_domain.unwrap_or(mesh.domain));
            let boundary = match config.problem.boundary {
                BoundaryMode::Zero => Boundary2D::zero(),
                BoundaryMode::Initial => {
                    let side =
                        |f: Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>| -> SideFn { Arc::new(move |_, s| f(s, 0.0)) };
                    let (g, h, k, m) = (u0.clone(), u0.clone(), u0.clone(), u0.clone());
                    Boundary2D {
                        x_left: side(Arc::new(move |y, _| g(xd.0, y))),
                        x_right: side(Arc::new(move |y, _| h(xd.1, y))),
                        y_bottom: side(Arc::new(move |x, _| k(x, yd.0))),
                        y_top: side(Arc::new(move |x, _| m(x, yd.1))),
                    }
                }
            };
            let (integrator, x, y): (Box<dyn Integrator + Send>, Vec<f64>, Vec<f64>) = match scheme {
                Scheme::Odds => {
                    let mx = build_mesh(xd, mesh.elements, mesh.degree)?;
                    let my =
                        build_mesh(yd, mesh.elements_y.unwrap_or(mesh.elements), mesh.degree_y.unwrap_or(mesh.degree))?;
                    let (x, y) = (mx.nodes().to_vec(), my.nodes().to_vec());
                    (Box::new(Odds2D::new(problem, boundary, mx, my, solver)?), x, y)
                }
                Scheme::Smm | Scheme::Fdscn => {
                    let b = baseline(config)?;
                    let grid = UniformGrid2D {
                        x: UniformGrid::new(xd, b.intervals)?,
                        y: UniformGrid::new(yd, b.intervals_y.unwrap_or(b.intervals))?,
                    };
                    let (x, y) = (grid.x.nodes().to_vec(), grid.y.nodes().to_vec());
                    if scheme == Scheme::Smm {
                        (Box::new(Smm2D::new(problem, boundary, grid, solver, fp)?), x, y)
                    } else {
                        (Box::new(Fdscn2D::new(problem, boundary, grid, solver, fp)?), x, y)
                    }
                }
            };
            let mut initial = Vec::with_capacity(x.len() * y.len());
            for &yj in &y {
                initial.extend(x.iter().map(|&xi| u0(xi, yj)));
            }
            let field = Box::new(NoiseModel2D::new(xd, yd, config.noise_modes(), &x, &y)?);
            Ok(Setup { integrator, x, y, initial, field })
        }
    }
}

fn baseline(config: &ExperimentConfig) -> Result<&BaselineConfig> {
    config
        .baseline
        .as_ref()
        .ok_or_else(|| OddsError::Config("[baseline] is required for finite-difference schemes".into()))
}

/// One trajectory of `setup` on the noise path `(seed, trajectory)` with
/// clock width `base_dt`.
pub fn simulate(
    setup: &Setup,
    problem: &ProblemSpec,
    seed: u64,
    trajectory: u64,
    base_dt: f64,
    opts: &RunOptions,
) -> Result<TrajectoryRecord> {
    let mut path =
        if problem.eps != 0.0 { Some(NoisePath::new(setup.field.as_ref(), seed, trajectory, base_dt)?) } else { None };
    run_trajectory(setup.integrator.as_ref(), problem, setup.initial.clone(), path.as_mut(), trajectory, opts)
}

fn modulus(u: &[C64]) -> Vec<f64> {
    u.iter().map(|z| z.norm()).collect()
}

/// Up to `count` largest interior local maxima of `values` as `(index, value)`.
pub fn local_maxima(values: &[f64], count: usize) -> Vec<(usize, f64)> {
    let mut peaks: Vec<(usize, f64)> = (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| (i, values[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks.truncate(count);
    peaks
}

/// Population variance of `|u|` over the grid.
pub fn roughness(u: &[C64]) -> f64 {
    let m = modulus(u);
    let n = m.len() as f64;
    let mean = m.iter().sum::<f64>() / n;
    m.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn run_fields(run: &mut Run<'_>) -> Result<()> {
    let config = run.config;
    let started = Instant::now();
    let t_end = config.effective_final_time();
    let is_2d = config.mesh.is_2d();
    let opts =
        RunOptions { snapshot_times: config.output.snapshot_times.clone(), observe_every: config.output.observe_every };
    if (t_end - config.problem.final_time).abs() > 1e-12 {
        run.manifest.notes.push(format!(
            "final_time {} rounded up to {} steps, T = {}",
            config.problem.final_time,
            config.steps(),
            fmt(t_end)
        ));
    }

    let mut charge = CsvFile::create(&run.dir, "charge.csv", &["time", "value", "trajectory", "eps"])?;
    let mut energy = CsvFile::create(&run.dir, "energy.csv", &["time", "value", "trajectory", "eps"])?;
    let mut energy_mean = CsvFile::create(&run.dir, "energy_mean.csv", &["time", "value", "eps", "trajectories"])?;
    let mut energy_fit =
        CsvFile::create(&run.dir, "energy_fit.csv", &["eps", "slope", "intercept", "r_squared", "trajectories"])?;
    let mut summary = CsvFile::create(
        &run.dir,
        "summary.csv",
        &["eps", "trajectory", "charge_initial", "charge_final", "charge_drift", "energy_initial", "energy_final"],
    )?;
    let mut profiles = if is_2d {
        CsvFile::create(&run.dir, "surface.csv", &["eps", "trajectory", "time", "x", "y", "modulus"])?
    } else {
        CsvFile::create(&run.dir, "profiles.csv", &["eps", "trajectory", "time", "x", "p", "q", "modulus"])?
    };
    let mut peaks = if config.kind == ExperimentKind::Collision1d {
        Some(CsvFile::create(&run.dir, "peaks.csv", &["eps", "trajectory", "time", "rank", "x", "modulus"])?)
    } else {
        None
    };
    let mut rough = if is_2d {
        Some(CsvFile::create(&run.dir, "roughness.csv", &["eps", "trajectory", "time", "variance"])?)
    } else {
        None
    };
    run.manifest.stage("setup", started);

    let sim_started = Instant::now();
    for eps in config.eps_values() {
        let problem = problem_for(config, eps, config.problem.tau, t_end);
        let setup = build_setup(config, config.scheme, problem)?;
        let records = farm(config.workers, config.trajectories, |p| {
            simulate(&setup, &problem, config.seed, p as u64, problem.tau, &opts)
        })?;
        let quad = setup.integrator.quadrature();
        let e = fmt(eps);
        let mut energies = Vec::new();
        for (p, rec) in records.into_iter().enumerate() {
            let rec = match rec {
                Ok(r) => r,
                Err(err) => {
                    run.fail(eps, p as u64, err);
                    continue;
                }
            };
            let tr = p.to_string();
            for (i, &t) in rec.times.iter().enumerate() {
                let t = fmt(t);
                charge.row(&[&t, &fmt(rec.charge[i]), &tr, &e])?;
                energy.row(&[&t, &fmt(rec.energy[i]), &tr, &e])?;
            }
            let q0 = discrete_charge(&setup.initial, quad);
            let q1 = discrete_charge(&rec.final_state, quad);
            let drift = if rec.charge.is_empty() {
                (q1 - q0).abs() / q0.abs()
            } else {
                ObservableSeries { trajectory: p as u64, times: rec.times.clone(), values: rec.charge.clone() }
                    .relative_drift()
                    .max((q1 - q0).abs() / q0.abs())
            };
            let h0 = crate::observables::discrete_energy(&setup.initial, quad);
            let h1 = crate::observables::discrete_energy(&rec.final_state, quad);
            summary.row(&[&e, &tr, &fmt(q0), &fmt(q1), &fmt(drift), &fmt(h0), &fmt(h1)])?;
            for snap in &rec.snapshots {
                let t = fmt(snap.time);
                if is_2d {
                    let nx = setup.x.len();
                    for (k, z) in snap.values.iter().enumerate() {
                        let (x, y) = (setup.x[k % nx], setup.y[k / nx]);
                        profiles.row(&[&e, &tr, &t, &fmt(x), &fmt(y), &fmt(z.norm())])?;
                    }
                } else {
                    for (x, z) in setup.x.iter().zip(&snap.values) {
                        profiles.row(&[&e, &tr, &t, &fmt(*x), &fmt(z.re), &fmt(z.im), &fmt(z.norm())])?;
                    }
                }
                if let Some(f) = peaks.as_mut() {
                    for (rank, (i, v)) in local_maxima(&modulus(&snap.values), 2).into_iter().enumerate() {
                        f.row(&[&e, &tr, &t, &rank.to_string(), &fmt(setup.x[i]), &fmt(v)])?;
                    }
                }
                if let Some(f) = rough.as_mut() {
                    f.row(&[&e, &tr, &t, &fmt(roughness(&snap.values))])?;
                }
            }
            energies.push(ObservableSeries { trajectory: p as u64, times: rec.times, values: rec.energy });
        }
        if !energies.is_empty() && !energies[0].times.is_empty() {
            let mean = trajectory_mean(&energies)?;
            let n = energies.len().to_string();
            for (t, v) in mean.times.iter().zip(&mean.values) {
                energy_mean.row(&[&fmt(*t), &fmt(*v), &e, &n])?;
            }
            if let Ok(fit) = averaged_energy_growth(&energies) {
                energy_fit.row(&[&e, &fmt(fit.slope), &fmt(fit.intercept), &fmt(fit.r_squared), &n])?;
            }
        }
    }
    run.manifest.stage("trajectories", sim_started);

    let write_started = Instant::now();
    for f in [charge, energy, energy_mean, energy_fit, summary, profiles] {
        run.finish(f)?;
    }
    for f in [peaks, rough].into_iter().flatten() {
        run.finish(f)?;
    }
    run.manifest.stage("write", write_started);
    Ok(())
}

fn run_convergence(run: &mut Run<'_>) -> Result<()> {
    let config = run.config;
    let conv =
        config.convergence.as_ref().ok_or_else(|| OddsError::Config("[convergence] section is required".into()))?;
    let started = Instant::now();
    let t_end = config.problem.final_time;
    let eps = config.problem.eps;
    let tau_ref = f64::powi(2.0, -(conv.reference_exponent as i32));
    let mut exponents = conv.exponents.clone();
    exponents.sort_unstable();
    let taus: Vec<f64> = exponents.iter().map(|&e| f64::powi(2.0, -(e as i32))).collect();

    let reference = build_setup(config, Scheme::Odds, problem_for(config, eps, tau_ref, t_end))?;
    let coarse: Vec<Setup> = taus
        .iter()
        .map(|&tau| build_setup(config, config.scheme, problem_for(config, eps, tau, t_end)))
        .collect::<Result<_>>()?;
    let opts = RunOptions { snapshot_times: Vec::new(), observe_every: 0 };
    run.manifest.stage("setup", started);

    let sim_started = Instant::now();
    // Every level of trajectory p reads the same slot clock of width tau_ref.
    let results = farm(config.workers, config.trajectories, |p| -> Result<Vec<Terminal>> {
        let mut out = Vec::with_capacity(taus.len() + 1);
        for (setup, &tau) in std::iter::once(&reference).chain(&coarse).zip(std::iter::once(&tau_ref).chain(&taus)) {
            let problem = problem_for(config, eps, tau, t_end);
            let rec = simulate(setup, &problem, config.seed, p as u64, tau_ref, &opts)?;
            out.push(Terminal { trajectory: p as u64, values: rec.final_state });
        }
        Ok(out)
    })?;
    let mut per_level: Vec<Vec<Terminal>> = vec![Vec::new(); taus.len() + 1];
    for (p, r) in results.into_iter().enumerate() {
        match r {
            Ok(levels) => {
                for (k, t) in levels.into_iter().enumerate() {
                    per_level[k].push(t);
                }
            }
            Err(e) => run.fail(eps, p as u64, e),
        }
    }
    run.manifest.stage("trajectories", sim_started);

    let write_started = Instant::now();
    let mut errors = CsvFile::create(&run.dir, "errors.csv", &["tau", "exponent", "err", "order"])?;
    let mut fit_file =
        CsvFile::create(&run.dir, "order_fit.csv", &["global_order", "levels", "trajectories", "non_monotone_levels"])?;
    if !per_level[0].is_empty() {
        let weights = reference.integrator.quadrature().weights().to_vec();
        let errs: Vec<f64> =
            per_level[1..].iter().map(|lvl| mean_square_error(lvl, &per_level[0], &weights)).collect::<Result<_>>()?;
        let table = ErrorTable { taus: taus.clone(), errors: errs.clone() };
        let fit = fit_order(&table).ok();
        for (k, (&tau, &err)) in taus.iter().zip(&errs).enumerate() {
            let order = match (&fit, k) {
                (Some(f), k) if k > 0 => fmt(f.per_level[k - 1]),
                _ => String::new(),
            };
            errors.row(&[&fmt(tau), &exponents[k].to_string(), &fmt(err), &order])?;
        }
        let non_monotone = errs.windows(2).filter(|w| !(w[1] < w[0])).count();
        if let Some(f) = &fit {
            fit_file.row(&[
                &fmt(f.global),
                &taus.len().to_string(),
                &per_level[0].len().to_string(),
                &non_monotone.to_string(),
            ])?;
        }
    }
    run.finish(errors)?;
    run.finish(fit_file)?;
    run.manifest.stage("write", write_started);
    Ok(())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall-clock per scheme, one row each.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub scheme: Scheme,
    pub grid_points: usize,
    pub steps: usize,
    pub seconds: Vec<f64>,
    pub median: f64,
}

/// Times build-plus-run of trajectory 0 for every scheme.
pub fn time_schemes(config: &ExperimentConfig, repeats: usize) -> Result<Vec<TimingRow>> {
    let t_end = config.effective_final_time();
    let problem = problem_for(config, config.problem.eps, config.problem.tau, t_end);
    let opts = RunOptions { snapshot_times: Vec::new(), observe_every: 0 };
    let mut rows = Vec::new();
    for scheme in [Scheme::Odds, Scheme::Smm, Scheme::Fdscn] {
        let mut seconds = Vec::with_capacity(repeats);
        let mut grid_points = 0;
        for _ in 0..repeats {
            let t0 = Instant::now();
            let setup = build_setup(config, scheme, problem)?;
            simulate(&setup, &problem, config.seed, 0, problem.tau, &opts)?;
            seconds.push(t0.elapsed().as_secs_f64());
            grid_points = setup.initial.len();
        }
        let median = median(&mut seconds.clone());
        rows.push(TimingRow { scheme, grid_points, steps: problem.steps(), seconds, median });
    }
    Ok(rows)
}

fn run_efficiency(run: &mut Run<'_>) -> Result<()> {
    let config = run.config;
    let eff = config.efficiency.as_ref().ok_or_else(|| OddsError::Config("[efficiency] section is required".into()))?;
    run.manifest.notes.push("timing CSVs hold wall-clock measurements and differ between runs".into());
    let started = Instant::now();
    let rows = match time_schemes(config, eff.repeats) {
        Ok(r) => r,
        Err(e) => {
            run.fail(config.problem.eps, 0, e);
            Vec::new()
        }
    };
    run.manifest.stage("timing", started);

    let mut runs = CsvFile::create(&run.dir, "timing_runs.csv", &["scheme", "repeat", "seconds"])?;
    let mut table = CsvFile::create(
        &run.dir,
        "timings.csv",
        &["scheme", "grid_points", "steps", "repeats", "median_seconds", "min_seconds", "max_seconds"],
    )?;
    for r in &rows {
        for (k, s) in r.seconds.iter().enumerate() {
            runs.row(&[r.scheme.name(), &k.to_string(), &fmt(*s)])?;
        }
        let min = r.seconds.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.seconds.iter().copied().fold(0.0, f64::max);
        table.row(&[
            r.scheme.name(),
            &r.grid_points.to_string(),
            &r.steps.to_string(),
            &r.seconds.len().to_string(),
            &fmt(r.median),
            &fmt(min),
            &fmt(max),
        ])?;
    }
    run.finish(runs)?;
    run.finish(table)?;

    if eff.scaling_trajectories > 0 {
        let started = Instant::now();
        let mut scaling =
            CsvFile::create(&run.dir, "scaling.csv", &["trajectories", "workers", "seconds", "speedup", "efficiency"])?;
        let p = eff.scaling_trajectories;
        let mut base = None;
        for (n, workers) in [(p, 1), (2 * p, 1), (2 * p, 4)] {
            let secs = time_farm(config, n, workers)?;
            let speedup = match (workers, base) {
                (1, _) => {
                    base = Some(secs);
                    1.0
                }
                (_, Some(b)) => b / secs,
                _ => f64::NAN,
            };
            scaling.row(&[
                &n.to_string(),
                &workers.to_string(),
                &fmt(secs),
                &fmt(speedup),
                &fmt(speedup / workers as f64),
            ])?;
        }
        run.finish(scaling)?;
        run.manifest.stage("scaling", started);
    }
    Ok(())
}

/// Wall-clock of `n` splitting-scheme trajectories on `workers` threads.
pub fn time_farm(config: &ExperimentConfig, n: usize, workers: usize) -> Result<f64> {
    let t_end = config.effective_final_time();
    let problem = problem_for(config, config.problem.eps, config.problem.tau, t_end);
    let setup = build_setup(config, Scheme::Odds, problem)?;
    let opts = RunOptions { snapshot_times: Vec::new(), observe_every: 0 };
    let t0 = Instant::now();
    let results =
        farm(workers, n, |p| simulate(&setup, &problem, config.seed, p as u64, problem.tau, &opts).map(|_| ()))?;
    let secs = t0.elapsed().as_secs_f64();
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(secs)
}
