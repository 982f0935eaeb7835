use crate::error::{OddsError, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Soliton1d,
    Collision1d,
    Gaussian2d,
    Convergence,
    Efficiency,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Soliton1d,
        ExperimentKind::Collision1d,
        ExperimentKind::Gaussian2d,
        ExperimentKind::Convergence,
        ExperimentKind::Efficiency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Soliton1d => "soliton1d",
            ExperimentKind::Collision1d => "collision1d",
            ExperimentKind::Gaussian2d => "gaussian2d",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Efficiency => "efficiency",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ExperimentKind::Soliton1d => "single soliton on [-20,100]: |u| profiles, charge and energy series",
            ExperimentKind::Collision1d => "two solitons on [-20,150]: p, q and |u| snapshots at t = 0, 12, 60",
            ExperimentKind::Gaussian2d => "Gaussian datum on [-10,10]^2: |u| surfaces and roughness per noise level",
            ExperimentKind::Convergence => {
                "mean-square temporal errors against a fine reference on coupled noise paths"
            }
            ExperimentKind::Efficiency => "wall-clock of the splitting scheme against both finite-difference baselines",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Odds,
    Smm,
    Fdscn,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Odds => "odds",
            Scheme::Smm => "smm",
            Scheme::Fdscn => "fdscn",
        }
    }
}

/// Dirichlet closure for the experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    #[default]
    Zero,
    /// Hold the initial datum's boundary values for all time.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub lambda: f64,
    /// Noise amplitude; ignored when `eps_sweep` is non-empty.
    pub eps: f64,
    #[serde(default)]
    pub eps_sweep: Vec<f64>,
    pub tau: f64,
    /// Rounded up to a whole number of steps.
    pub final_time: f64,
    #[serde(default)]
    pub boundary: BoundaryMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub domain: [f64; 2],
    pub elements: usize,
    pub degree: usize,
    /// Present for 2D runs; the remaining `_y` fields default to the x ones.
    #[serde(default)]
    pub y_domain: Option<[f64; 2]>,
    #[serde(default)]
    pub elements_y: Option<usize>,
    #[serde(default)]
    pub degree_y: Option<usize>,
}

impl MeshConfig {
    pub fn is_2d(&self) -> bool {
        self.y_domain.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Modes (per axis in 2D); 500 in 1D and 64 in 2D when absent.
    #[serde(default)]
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Charge and energy are recorded every this many steps.
    #[serde(default = "default_observe_every")]
    pub observe_every: usize,
}

fn default_observe_every() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { snapshot_times: Vec::new(), observe_every: default_observe_every() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// `-1` mirrors the carrier waves `e^{ikx}` of the soliton data.
    #[serde(default = "default_carrier_sign")]
    pub carrier_sign: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_gauss_c")]
    pub c1: f64,
    #[serde(default = "default_gauss_c")]
    pub c2: f64,
}

fn default_carrier_sign() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_gauss_c() -> f64 {
    -0.5
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            carrier_sign: default_carrier_sign(),
            amplitude: default_amplitude(),
            c1: default_gauss_c(),
            c2: default_gauss_c(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Uniform intervals per axis for the finite-difference schemes.
    pub intervals: usize,
    #[serde(default)]
    pub intervals_y: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Reference step `2^-reference_exponent`.
    pub reference_exponent: u32,
    /// Coarse steps `2^-e`.
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyConfig {
    pub repeats: usize,
    /// When positive, also times the splitting scheme on this many and twice
    /// as many trajectories, at 1 and 4 workers.
    #[serde(default)]
    pub scaling_trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub trajectories: usize,
    #[serde(default = "default_one")]
    pub workers: usize,
    /// Directory under the output root; the kind name when absent.
    #[serde(default)]
    pub output_dir: Option<String>,
    pub problem: ProblemConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub efficiency: Option<EfficiencyConfig>,
}

fn default_seed() -> u64 {
    20_240_501
}

fn default_one() -> usize {
    1
}

fn config_err(msg: impl Into<String>) -> OddsError {
    OddsError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| config_err(format!("cannot parse config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn output_dir_name(&self) -> String {
        self.output_dir.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn eps_values(&self) -> Vec<f64> {
        if self.problem.eps_sweep.is_empty() {
            vec![self.problem.eps]
        } else {
            self.problem.eps_sweep.clone()
        }
    }

    /// Whole number of steps covering `final_time`.
    pub fn steps(&self) -> usize {
        let r = self.problem.final_time / self.problem.tau;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }

    pub fn effective_final_time(&self) -> f64 {
        self.steps() as f64 * self.problem.tau
    }

    pub fn noise_modes(&self) -> usize {
        self.noise.modes.unwrap_or(if self.mesh.is_2d() { 64 } else { 500 })
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if !p.lambda.is_finite() {
            return Err(config_err("problem.lambda must be finite"));
        }
        if !(p.tau > 0.0 && p.tau.is_finite()) {
            return Err(config_err("problem.tau must be positive"));
        }
        if !(p.final_time > 0.0 && p.final_time.is_finite()) {
            return Err(config_err("problem.final_time must be positive"));
        }
        if self.eps_values().iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(config_err("noise amplitudes must be finite and >= 0"));
        }
        let m = &self.mesh;
        let check_domain = |d: [f64; 2], name: &str| {
            if d[1] > d[0] && d[0].is_finite() && d[1].is_finite() {
                Ok(())
            } else {
                Err(config_err(format!("{name} must be an increasing pair")))
            }
        };
        check_domain(m.domain, "mesh.domain")?;
        if let Some(d) = m.y_domain {
            check_domain(d, "mesh.y_domain")?;
        }
        for (e, d) in [(m.elements, m.degree), (m.elements_y.unwrap_or(m.elements), m.degree_y.unwrap_or(m.degree))] {
            if e == 0 || d < 2 {
                return Err(config_err("mesh needs elements >= 1 and degree >= 2"));
            }
        }
        if self.trajectories == 0 {
            return Err(config_err("trajectories must be at least 1"));
        }
        if self.workers == 0 {
            return Err(config_err("workers must be at least 1"));
        }
        if self.noise_modes() == 0 {
            return Err(config_err("noise.modes must be at least 1"));
        }
        if self.initial.carrier_sign.abs() != 1.0 {
            return Err(config_err("initial.carrier_sign must be 1 or -1"));
        }
        let t_end = self.effective_final_time();
        for &t in &self.output.snapshot_times {
            let s = t / p.tau;
            if !(t >= 0.0 && t <= t_end + 1e-9) || (s - s.round()).abs() > 1e-6 {
                return Err(config_err(format!("snapshot time {t} is not a step time in [0, {t_end}]")));
            }
        }
        if let Some(dir) = &self.output_dir {
            let path = Path::new(dir);
            if dir.is_empty()
                || path.is_absolute()
                || path.components().any(|c| matches!(c, std::path::Component::ParentDir))
            {
                return Err(config_err("output_dir must be a relative path inside the output root"));
            }
        }
        if let Some(b) = &self.baseline {
            if b.intervals < 2 || b.intervals_y.is_some_and(|n| n < 2) {
                return Err(config_err("baseline.intervals must be at least 2"));
            }
        }
        let needs_baseline = self.kind == ExperimentKind::Efficiency || self.scheme != Scheme::Odds;
        if needs_baseline && self.baseline.is_none() {
            return Err(config_err("[baseline] is required for finite-difference schemes"));
        }
        match self.kind {
            ExperimentKind::Gaussian2d if !m.is_2d() => {
                return Err(config_err("gaussian2d needs mesh.y_domain"));
            }
            ExperimentKind::Soliton1d | ExperimentKind::Collision1d | ExperimentKind::Convergence if m.is_2d() => {
                return Err(config_err(format!("{} is one-dimensional", self.kind.name())));
            }
            ExperimentKind::Convergence => {
                let c = self.convergence.as_ref().ok_or_else(|| config_err("[convergence] section is required"))?;
                if c.exponents.is_empty() {
                    return Err(config_err("convergence.exponents is empty"));
                }
                if c.exponents.iter().any(|&e| e > c.reference_exponent) {
                    return Err(config_err("coarse steps must not be finer than the reference"));
                }
                if c.reference_exponent > 30 {
                    return Err(config_err("convergence.reference_exponent is too large"));
                }
                let mut sorted = c.exponents.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != c.exponents.len() {
                    return Err(config_err("convergence.exponents has duplicates"));
                }
                let r = p.final_time * f64::powi(2.0, c.reference_exponent as i32);
                if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                    return Err(config_err("final_time is not a multiple of the reference step"));
                }
                for &e in &c.exponents {
                    let r = p.final_time * f64::powi(2.0, e as i32);
                    if (r - r.round()).abs() > 1e-9 * r.max(1.0) || r.round() < 1.0 {
                        return Err(config_err(format!("final_time is not a whole number of steps 2^-{e}")));
                    }
                }
            }
            ExperimentKind::Efficiency => {
                let e = self.efficiency.as_ref().ok_or_else(|| config_err("[efficiency] section is required"))?;
                if e.repeats == 0 {
                    return Err(config_err("efficiency.repeats must be at least 1"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Desk-scale defaults for each experiment kind.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = |problem: ProblemConfig, mesh: MeshConfig| ExperimentConfig {
            kind,
            scheme: Scheme::Odds,
            seed: default_seed(),
            trajectories: 1,
            workers: 1,
            output_dir: None,
            problem,
            mesh,
            noise: NoiseConfig::default(),
            output: OutputConfig::default(),
            initial: InitialConfig::default(),
            baseline: None,
            convergence: None,
            efficiency: None,
        };
        let mesh_1d = |lo: f64, hi: f64, elements, degree| MeshConfig {
            domain: [lo, hi],
            elements,
            degree,
            y_domain: None,
            elements_y: None,
            degree_y: None,
        };
        match kind {
            ExperimentKind::Soliton1d => {
                let mut c = base(
                    ProblemConfig {
                        lambda: 1.0,
                        eps: 0.01,
                        eps_sweep: Vec::new(),
                        tau: 0.015,
                        final_time: 10.0,
                        boundary: BoundaryMode::Zero,
                    },
                    mesh_1d(-20.0, 100.0, 10, 30),
                );
                c.output = OutputConfig { snapshot_times: vec![0.0, 4.5, 9.0], observe_every: 10 };
                c
            }
            ExperimentKind::Collision1d => {
                let mut c = base(
                    ProblemConfig {
                        lambda: 1.0,
                        eps: 0.01,
                        eps_sweep: Vec::new(),
                        tau: 0.006,
                        final_time: 60.0,
                        boundary: BoundaryMode::Zero,
                    },
                    mesh_1d(-20.0, 150.0, 5, 20),
                );
                c.output = OutputConfig { snapshot_times: vec![0.0, 12.0, 60.0], observe_every: 50 };
                c
            }
            ExperimentKind::Gaussian2d => {
                let mut c = base(
                    ProblemConfig {
                        lambda: 1.0,
                        eps: 1.0,
                        eps_sweep: vec![1.0, 5.0, 10.0],
                        tau: 0.01,
                        final_time: 1.0,
                        boundary: BoundaryMode::Zero,
                    },
                    MeshConfig {
                        domain: [-10.0, 10.0],
                        elements: 4,
                        degree: 32,
                        y_domain: Some([-10.0, 10.0]),
                        elements_y: None,
                        degree_y: None,
                    },
                );
                c.output = OutputConfig { snapshot_times: vec![0.0, 0.5, 1.0], observe_every: 10 };
                c
            }
            ExperimentKind::Convergence => {
                let mut c = base(
                    ProblemConfig {
                        lambda: 1.0,
                        eps: 0.01,
                        eps_sweep: Vec::new(),
                        tau: f64::powi(2.0, -10),
                        final_time: 0.25,
                        boundary: BoundaryMode::Zero,
                    },
                    mesh_1d(-1.0, 1.0, 4, 16),
                );
                c.trajectories = 100;
                c.output.observe_every = 0;
                c.convergence = Some(ConvergenceConfig { reference_exponent: 10, exponents: (4..=9).collect() });
                c
            }
            ExperimentKind::Efficiency => {
                let mut c = base(
                    ProblemConfig {
                        lambda: 1.0,
                        eps: 0.01,
                        eps_sweep: Vec::new(),
                        tau: 0.015,
                        final_time: 10.0,
                        boundary: BoundaryMode::Zero,
                    },
                    mesh_1d(-20.0, 100.0, 20, 30),
                );
                c.output.observe_every = 0;
                c.baseline = Some(BaselineConfig { intervals: 600, intervals_y: None });
                c.efficiency = Some(EfficiencyConfig { repeats: 3, scaling_trajectories: 0 });
                c
            }
        }
    }

    /// Settings of the published figures and table: long horizons and large
    /// trajectory counts. Hours of compute, not part of any test.
    pub fn full_horizon(kind: ExperimentKind) -> Self {
        let mut c = Self::preset(kind);
        match kind {
            ExperimentKind::Soliton1d => {
                c.problem.final_time = 150.0;
                c.problem.eps_sweep = vec![0.01, 0.05];
                c.trajectories = 500;
                c.output.snapshot_times = vec![0.0, 75.0, 150.0];
                c.output.observe_every = 100;
            }
            ExperimentKind::Collision1d => {}
            ExperimentKind::Gaussian2d => {
                c.problem.final_time = 3.0;
                c.output.snapshot_times = vec![0.0, 1.5, 3.0];
            }
            ExperimentKind::Convergence => c.trajectories = 500,
            ExperimentKind::Efficiency => c.problem.final_time = 150.0,
        }
        c
    }

    /// The 2D efficiency comparison.
    pub fn preset_efficiency_2d() -> Self {
        let mut c = Self::preset(ExperimentKind::Efficiency);
        c.problem.tau = 0.01;
        c.problem.final_time = 1.0;
        c.mesh = MeshConfig {
            domain: [-10.0, 10.0],
            elements: 4,
            degree: 32,
            y_domain: Some([-10.0, 10.0]),
            elements_y: None,
            degree_y: None,
        };
        c.baseline = Some(BaselineConfig { intervals: 128, intervals_y: None });
        c.output_dir = Some("efficiency2d".into());
        c
    }
}

/// Annotated template listing every config field.
pub const CONFIG_SCHEMA: &str = r#"# Experiment config (TOML). Command-line flags override file values.
kind = "soliton1d"        # soliton1d | collision1d | gaussian2d | convergence | efficiency
scheme = "odds"           # odds | smm | fdscn (single-scheme runs)
seed = 20240501           # master seed; trajectory p uses stream (seed, p)
trajectories = 1          # Monte Carlo sample size P
workers = 1               # worker threads; outputs do not depend on this
output_dir = "soliton1d"  # relative to $ODDS_OUTPUT_ROOT (default: kind name)

[problem]
lambda = 1.0              # nonlinearity coefficient
eps = 0.01                # noise amplitude (>= 0)
eps_sweep = []            # optional list of amplitudes; overrides eps
tau = 0.015               # time step
final_time = 10.0         # rounded up to a whole number of steps
boundary = "zero"         # zero | initial (hold the datum's end values)

[mesh]
domain = [-20.0, 100.0]   # [x_L, x_R]
elements = 10             # M
degree = 30               # J (nodes per element: J + 1)
# y_domain = [-10.0, 10.0]   # makes the run two-dimensional
# elements_y = 4             # defaults to elements
# degree_y = 32              # defaults to degree

[noise]
# modes = 500             # truncation K (per axis in 2D; default 500 in 1D, 64 in 2D)

[output]
snapshot_times = [0.0, 4.5, 9.0]   # must be multiples of tau
observe_every = 10                 # charge/energy cadence in steps (0: off)

[initial]
carrier_sign = 1.0        # -1 mirrors the soliton carrier waves
amplitude = 1.0           # Gaussian A
c1 = -0.5                 # Gaussian exponent in x
c2 = -0.5                 # Gaussian exponent in y

[baseline]                # needed for efficiency and for scheme = smm | fdscn
intervals = 600           # uniform intervals per axis
# intervals_y = 128

[convergence]             # needed for kind = convergence
reference_exponent = 10   # reference step 2^-10
exponents = [4, 5, 6, 7, 8, 9]

[efficiency]              # needed for kind = efficiency
repeats = 3
scaling_trajectories = 0  # > 0: also time P and 2P trajectories at 1 and 4 workers
"#;
