//! Browser bindings: a 1D soliton run, a 2D Gaussian run and single noise
//! samples, all stepping the splitting solver in the page.

use odds_core::experiments::{gaussian_datum, soliton_datum, InitialConfig};
use odds_core::linalg::SolverOptions;
use odds_core::mesh::build_mesh;
use odds_core::noise::{NoiseModel1D, NoiseModel2D, NoisePath, QWienerField};
use odds_core::observables::{discrete_charge, discrete_energy};
use odds_core::stepper::{Boundary1D, Boundary2D, Integrator, Odds1D, Odds2D, ProblemSpec};
use wasm_bindgen::prelude::*;

fn js_err(e: odds_core::OddsError) -> JsError {
    JsError::new(&e.to_string())
}

/// `Integrator::step` ignores the horizon, so one step is enough to validate.
fn open_problem(lambda: f64, eps: f64, tau: f64) -> ProblemSpec {
    ProblemSpec { lambda, eps, tau, final_time: tau }
}

struct Run<I, F> {
    integrator: I,
    field: F,
    u: Vec<odds_core::C64>,
    eps: f64,
    seed: u32,
    steps: u64,
}

impl<I: Integrator, F: QWienerField> Run<I, F> {
    fn advance(&mut self, count: u32) -> Result<(), JsError> {
        let tau = self.integrator.tau();
        for _ in 0..count {
            let t = self.steps as f64 * tau;
            let dw = if self.eps != 0.0 {
                let mut path = NoisePath::new(&self.field, self.seed as u64, 0, tau).map_err(js_err)?;
                Some(path.increment(t, t + tau).map_err(js_err)?.values)
            } else {
                None
            };
            self.integrator.step(&mut self.u, t, dw.as_deref()).map_err(js_err)?;
            self.steps += 1;
        }
        Ok(())
    }

    fn modulus(&self) -> Vec<f64> {
        self.u.iter().map(|z| z.norm()).collect()
    }
}

/// Soliton `sqrt(6/5) sech(sqrt2 x) e^{i s x}` on `[-20, 100]`.
#[wasm_bindgen]
pub struct SolitonDemo {
    run: Run<Odds1D, NoiseModel1D>,
    x: Vec<f64>,
}

#[wasm_bindgen]
impl SolitonDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(
        elements: usize,
        degree: usize,
        tau: f64,
        eps: f64,
        carrier_sign: f64,
        seed: u32,
    ) -> Result<SolitonDemo, JsError> {
        let mesh = build_mesh((-20.0, 100.0), elements, degree).map_err(js_err)?;
        let x = mesh.nodes().to_vec();
        let field = NoiseModel1D::new((-20.0, 100.0), 500, &x).map_err(js_err)?;
        let u0 = soliton_datum(carrier_sign);
        let u = x.iter().map(|&v| u0(v)).collect();
        let integrator = Odds1D::new(open_problem(1.0, eps, tau), Boundary1D::zero(), mesh, SolverOptions::default())
            .map_err(js_err)?;
        Ok(SolitonDemo { run: Run { integrator, field, u, eps, seed, steps: 0 }, x })
    }

    pub fn step(&mut self, count: u32) -> Result<(), JsError> {
        self.run.advance(count)
    }

    pub fn time(&self) -> f64 {
        self.run.steps as f64 * self.run.integrator.tau()
    }

    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.run.modulus()
    }

    pub fn charge(&self) -> f64 {
        discrete_charge(&self.run.u, self.run.integrator.quadrature())
    }

    pub fn energy(&self) -> f64 {
        discrete_energy(&self.run.u, self.run.integrator.quadrature())
    }
}

/// `exp(-(x^2 + y^2)/2)` on `[-10, 10]^2`.
#[wasm_bindgen]
pub struct GaussianDemo {
    run: Run<Odds2D, NoiseModel2D>,
    nx: usize,
    ny: usize,
}

#[wasm_bindgen]
impl GaussianDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(elements: usize, degree: usize, tau: f64, eps: f64, seed: u32) -> Result<GaussianDemo, JsError> {
        let d = (-10.0, 10.0);
        let integrator = Odds2D::square(
            open_problem(1.0, eps, tau),
            Boundary2D::zero(),
            d,
            elements,
            degree,
            SolverOptions::default(),
        )
        .map_err(js_err)?;
        let (nx, ny) = integrator.shape();
        let (xs, ys) = (integrator.mesh_x().nodes().to_vec(), integrator.mesh_y().nodes().to_vec());
        let field = NoiseModel2D::new(d, d, 16, &xs, &ys).map_err(js_err)?;
        let u0 = gaussian_datum(&InitialConfig::default());
        let mut u = Vec::with_capacity(nx * ny);
        for &y in &ys {
            u.extend(xs.iter().map(|&x| u0(x, y)));
        }
        Ok(GaussianDemo { run: Run { integrator, field, u, eps, seed, steps: 0 }, nx, ny })
    }

    pub fn step(&mut self, count: u32) -> Result<(), JsError> {
        self.run.advance(count)
    }

    pub fn time(&self) -> f64 {
        self.run.steps as f64 * self.run.integrator.tau()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// `|u|`, row-major with `x` fastest.
    pub fn modulus(&self) -> Vec<f64> {
        self.run.modulus()
    }
}

/// One increment `W(tau) - W(0)` of the 1D noise on `points` uniform nodes
/// of `[0, 1]`, truncated at `modes` terms.
#[wasm_bindgen]
pub fn noise_sample(modes: usize, points: usize, tau: f64, seed: u32, trajectory: u32) -> Result<Vec<f64>, JsError> {
    if points < 2 {
        return Err(JsError::new("need at least two points"));
    }
    let x: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let field = NoiseModel1D::new((0.0, 1.0), modes, &x).map_err(js_err)?;
    let mut path = NoisePath::new(&field, seed as u64, trajectory as u64, tau).map_err(js_err)?;
    Ok(path.increment(0.0, tau).map_err(js_err)?.values)
}
