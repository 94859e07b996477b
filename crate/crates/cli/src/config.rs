//! Declarative experiment description. A config is one JSON document; every
//! numeric default is spelled out here so a minimal file stays short while
//! runs remain fully reproducible.

use serde::{Deserialize, Serialize};

use mras_core::field::{Grid, ScalarField};
use mras_core::mras::{AdaptiveConfig, LipschitzEval, SigmaMode, StabilizerMode};
use mras_core::noise::NoiseConfig;
use mras_core::problem::{Nonlinearity, ProblemKind, ProblemSpec, Source};

/// Closed-form spatial profiles used for coefficients and initial states.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldDescriptor {
    Const { value: f64 },
    /// 1 + amplitude * sin(k * pi * (x - a) / (b - a))
    OnePlusSine { amplitude: f64, k: u32 },
    /// offset + height * exp(-((x - center) / width)^2)
    Bump {
        center: f64,
        width: f64,
        height: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl FieldDescriptor {
    pub fn evaluate(&self, a: f64, b: f64, x: f64) -> f64 {
        match self {
            FieldDescriptor::Const { value } => *value,
            FieldDescriptor::OnePlusSine { amplitude, k } => {
                let xi = (x - a) / (b - a);
                1.0 + amplitude * (*k as f64 * std::f64::consts::PI * xi).sin()
            }
            FieldDescriptor::Bump {
                center,
                width,
                height,
                offset,
            } => offset + height * (-((x - center) / width).powi(2)).exp(),
        }
    }

    pub fn field(&self, grid: Grid) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.evaluate(grid.a, grid.b, x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceDescriptor {
    Constant { value: f64 },
    Profile { field: FieldDescriptor },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    /// Unknown zeroth-order coefficient.
    Potential,
    /// Unknown diffusion coefficient.
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionName {
    Cubic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaName {
    Auto,
    On,
    Off,
}

impl Default for SigmaName {
    fn default() -> Self {
        SigmaName::Auto
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilizerName {
    Guaranteed,
    Simple,
}

impl Default for StabilizerName {
    fn default() -> Self {
        StabilizerName::Guaranteed
    }
}

fn default_domain() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_n() -> usize {
    99
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_end() -> f64 {
    5.0
}
fn default_m() -> f64 {
    1.0
}
fn default_p() -> f64 {
    2.0
}
fn default_noise_seed() -> u64 {
    42
}
fn default_sp_width() -> f64 {
    2.0
}
fn default_ti_window() -> usize {
    5
}
fn default_samples() -> usize {
    100
}
fn default_analysis_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: KindName,
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    #[serde(default = "default_n")]
    pub n: usize,
    pub reaction: ReactionName,
    /// True coefficient to be identified.
    pub coefficient: FieldDescriptor,
    /// Physical Dirichlet values of the state (left, right).
    pub boundary: [f64; 2],
    /// Initial state; defaults to the affine interpolant of the boundary.
    #[serde(default)]
    pub initial: Option<FieldDescriptor>,
    pub source: SourceDescriptor,
    /// Sign margin the state must keep away from zero.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dt: default_dt(),
            t_end: default_t_end(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSection {
    #[serde(default = "default_m")]
    pub m: f64,
    /// Certified coercivity constant; defaults to the problem margin.
    #[serde(default)]
    pub damping: Option<f64>,
    /// Initial coefficient guess; defaults to the constant 1.
    #[serde(default)]
    pub initial_guess: Option<FieldDescriptor>,
    /// Frozen linearization point; defaults to the initial guess.
    #[serde(default)]
    pub linearization_point: Option<FieldDescriptor>,
    /// Fixed Lipschitz modulus; absent means the built-in formula.
    #[serde(default)]
    pub lipschitz_constant: Option<f64>,
    #[serde(default)]
    pub sigma: SigmaName,
    #[serde(default)]
    pub stabilizer: StabilizerName,
}

impl Default for AdaptationSection {
    fn default() -> Self {
        AdaptationSection {
            m: default_m(),
            damping: None,
            initial_guess: None,
            linearization_point: None,
            lipschitz_constant: None,
            sigma: SigmaName::default(),
            stabilizer: StabilizerName::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub delta: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_noise_seed")]
    pub seed: u64,
    /// Mollifier width in grid cells.
    #[serde(default = "default_sp_width")]
    pub sp_width: f64,
    /// Moving-average window in time samples (odd).
    #[serde(default = "default_ti_window")]
    pub ti_window: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_analysis_seed")]
    pub seed: u64,
    /// Time window for the decay-rate fit; defaults to the early transient.
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            samples: default_samples(),
            seed: default_analysis_seed(),
            fit_window: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub adaptation: AdaptationSection,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, String> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        let violations = cfg.validate();
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(violations.join("\n"))
        }
    }

    /// Collects every violation instead of stopping at the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let p = &self.problem;
        if p.domain[1] <= p.domain[0] {
            errs.push(format!(
                "domain [{}, {}] must have positive length",
                p.domain[0], p.domain[1]
            ));
        }
        if p.n < 3 {
            errs.push(format!("n = {} is too coarse; need at least 3 nodes", p.n));
        }
        if !(p.margin > 0.0) {
            errs.push(format!("margin = {} must be positive", p.margin));
        }
        if p.kind == KindName::Diffusion && p.reaction == ReactionName::Linear {
            errs.push("linear reaction is not available for the diffusion problem".to_string());
        }
        if let FieldDescriptor::Bump { width, .. } = &p.coefficient {
            if !(*width > 0.0) {
                errs.push(format!("bump width = {width} must be positive"));
            }
        }
        if let FieldDescriptor::OnePlusSine { k, .. } = &p.coefficient {
            if *k == 0 {
                errs.push("sine mode k must be at least 1".to_string());
            }
        }
        let s = &self.solver;
        if !(s.dt > 0.0) {
            errs.push(format!("dt = {} must be positive", s.dt));
        }
        if !(s.t_end > 0.0) {
            errs.push(format!("t_end = {} must be positive", s.t_end));
        }
        if s.dt > 0.0 && s.t_end > 0.0 && s.dt > s.t_end {
            errs.push(format!(
                "time step dt = {} exceeds the horizon t_end = {}",
                s.dt, s.t_end
            ));
        }
        let a = &self.adaptation;
        if !(a.m > 0.0) {
            errs.push(format!("stabilizer margin m = {} must be positive", a.m));
        }
        if let Some(d) = a.damping {
            if !(d > 0.0) {
                errs.push(format!("damping = {d} must be positive"));
            }
        }
        if let Some(l) = a.lipschitz_constant {
            if !(l >= 0.0) {
                errs.push(format!("lipschitz_constant = {l} must be nonnegative"));
            }
        }
        if let Some(noise) = &self.noise {
            if !(noise.delta >= 0.0) {
                errs.push(format!("noise delta = {} must be nonnegative", noise.delta));
            }
            if !(noise.p >= 2.0) {
                errs.push(format!("noise norm exponent p = {} must be at least 2", noise.p));
            }
            if !(noise.sp_width >= 0.0) {
                errs.push(format!(
                    "noise sp_width = {} must be nonnegative",
                    noise.sp_width
                ));
            }
            if noise.ti_window % 2 == 0 {
                errs.push(format!(
                    "noise ti_window = {} must be odd so the average is centered",
                    noise.ti_window
                ));
            }
        }
        if self.analysis.samples == 0 {
            errs.push("analysis samples must be at least 1".to_string());
        }
        if let Some([lo, hi]) = self.analysis.fit_window {
            if hi <= lo {
                errs.push(format!("fit window [{lo}, {hi}] must have positive length"));
            }
        }
        errs
    }

    /// Builds the physical problem description. Assumes `validate` passed.
    pub fn build_spec(&self) -> ProblemSpec {
        let p = &self.problem;
        let grid = Grid::uniform(p.domain[0], p.domain[1], p.n).expect("validated domain");
        let nonlinearity = match (p.kind, p.reaction) {
            (KindName::Potential, ReactionName::Cubic) => Nonlinearity::c_cubic(),
            (KindName::Potential, ReactionName::Linear) => Nonlinearity::c_linear(),
            (KindName::Diffusion, ReactionName::Cubic) => Nonlinearity::a_cubic(),
            (KindName::Diffusion, ReactionName::Linear) => unreachable!("rejected by validate"),
        };
        let kind = match p.kind {
            KindName::Potential => ProblemKind::CProblem,
            KindName::Diffusion => ProblemKind::AProblem,
        };
        let q_star = p.coefficient.field(grid);
        let q_star_boundary = (
            p.coefficient.evaluate(grid.a, grid.b, grid.a),
            p.coefficient.evaluate(grid.a, grid.b, grid.b),
        );
        let boundary = (p.boundary[0], p.boundary[1]);
        let u0 = match &p.initial {
            Some(desc) => desc.field(grid),
            None => ScalarField::from_fn(grid, |x| {
                boundary.0 + (boundary.1 - boundary.0) * (x - grid.a) / (grid.b - grid.a)
            }),
        };
        let g = match &p.source {
            SourceDescriptor::Constant { value } => Source::Constant(*value),
            SourceDescriptor::Profile { field } => Source::Profile(field.field(grid)),
        };
        ProblemSpec {
            kind,
            grid,
            nonlinearity,
            q_star,
            q_star_boundary,
            u0,
            g,
            boundary,
            c_lower: p.margin,
            homogenized: false,
        }
    }

    /// Builds the adaptive-run configuration for the given grid.
    pub fn build_adaptive(&self, grid: Grid) -> AdaptiveConfig {
        let a = &self.adaptation;
        let q0 = match &a.initial_guess {
            Some(desc) => desc.field(grid),
            None => ScalarField::constant(grid, 1.0),
        };
        let q0_lin = match &a.linearization_point {
            Some(desc) => desc.field(grid),
            None => q0.clone(),
        };
        AdaptiveConfig {
            q0,
            q0_lin,
            m: a.m,
            c_coe: a.damping.unwrap_or(self.problem.margin),
            lipschitz: match a.lipschitz_constant {
                Some(l) => LipschitzEval::Constant(l),
                None => LipschitzEval::Formula,
            },
            lipschitz_inflation: 0.0,
            sigma: match a.sigma {
                SigmaName::Auto => SigmaMode::Auto,
                SigmaName::On => SigmaMode::Force1,
                SigmaName::Off => SigmaMode::Force0,
            },
            dt: self.solver.dt,
            t_end: self.solver.t_end,
            stabilizer: match a.stabilizer {
                StabilizerName::Guaranteed => StabilizerMode::Guaranteed,
                StabilizerName::Simple => StabilizerMode::Affine,
            },
        }
    }

    pub fn build_noise(&self) -> Option<NoiseConfig> {
        self.noise.as_ref().map(|n| NoiseConfig {
            delta: n.delta,
            p: n.p,
            seed: n.seed,
            sp_width: n.sp_width,
            ti_window: n.ti_window,
        })
    }
}
