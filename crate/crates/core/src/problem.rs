//! The two benchmark identification problems: a potential (reaction)
//! coefficient and a diffusion coefficient, each perturbed by a separable
//! nonlinear reaction term, plus the data conditions that make the state stay
//! uniformly away from zero so that coefficient identification is coercive.

use std::sync::Arc;

use crate::field::{Grid, ScalarField};
use crate::linalg::neg_laplacian_with_ghosts;
use crate::report::{ReportEntry, VerificationReport};
use crate::trajectory::Trajectory;

/// One separable reaction term phi(state)·psi(coefficient). Plain function
/// pointers keep the type Copy and the presets const-constructible.
#[derive(Debug, Clone, Copy)]
pub struct SeparableTerm {
    pub phi: fn(f64) -> f64,
    pub psi: fn(f64) -> f64,
    pub dpsi: fn(f64) -> f64,
    pub d2psi: fn(f64) -> f64,
    /// psi is affine, so this term cancels exactly in linearization residuals.
    pub psi_linear: bool,
}

/// Reaction nonlinearity Σ_k phi_k(state)·psi_k(coefficient) with growth
/// envelopes |phi_k(s)| ≤ c_phi·(1+|s|^alpha) and
/// |psi_k'(t)| ≤ c_psi·(1+|t|^(beta-1)), checked by `validate_problem`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    pub name: &'static str,
    pub terms: Vec<SeparableTerm>,
    pub alpha: f64,
    pub beta: f64,
    pub c_phi: f64,
    pub c_psi: f64,
}

fn cube(s: f64) -> f64 {
    s * s * s
}

fn neg_id(s: f64) -> f64 {
    -s
}

fn ident(t: f64) -> f64 {
    t
}

fn one(_t: f64) -> f64 {
    1.0
}

fn zero(_t: f64) -> f64 {
    0.0
}

fn signed_pow_5_3(t: f64) -> f64 {
    t.abs().powf(2.0 / 3.0) * t
}

fn d_signed_pow_5_3(t: f64) -> f64 {
    5.0 / 3.0 * t.abs().powf(2.0 / 3.0)
}

fn d2_signed_pow_5_3(t: f64) -> f64 {
    // Unbounded at the origin; the value there is immaterial because the
    // second derivative is only sampled to decide whether it vanishes.
    if t == 0.0 {
        0.0
    } else {
        10.0 / 9.0 * t.signum() * t.abs().powf(-1.0 / 3.0)
    }
}

fn signed_pow_7_3(t: f64) -> f64 {
    t.abs().powf(4.0 / 3.0) * t
}

fn d_signed_pow_7_3(t: f64) -> f64 {
    7.0 / 3.0 * t.abs().powf(4.0 / 3.0)
}

fn d2_signed_pow_7_3(t: f64) -> f64 {
    28.0 / 9.0 * t.signum() * t.abs().powf(1.0 / 3.0)
}

impl Nonlinearity {
    /// Potential problem preset: reaction s³·|t|^(2/3)t.
    pub fn c_cubic() -> Nonlinearity {
        Nonlinearity {
            name: "c_cubic",
            terms: vec![SeparableTerm {
                phi: cube,
                psi: signed_pow_5_3,
                dpsi: d_signed_pow_5_3,
                d2psi: d2_signed_pow_5_3,
                psi_linear: false,
            }],
            alpha: 3.0,
            beta: 5.0 / 3.0,
            c_phi: 1.0,
            c_psi: 5.0 / 3.0,
        }
    }

    /// Diffusion problem preset: reaction s³ - s·|t|^(4/3)t, split into the
    /// coefficient-free term s³·1 and the separable term (-s)·|t|^(4/3)t,
    /// which is monotone in t wherever the state is negative.
    pub fn a_cubic() -> Nonlinearity {
        Nonlinearity {
            name: "a_cubic",
            terms: vec![
                SeparableTerm {
                    phi: cube,
                    psi: one,
                    dpsi: zero,
                    d2psi: zero,
                    psi_linear: true,
                },
                SeparableTerm {
                    phi: neg_id,
                    psi: signed_pow_7_3,
                    dpsi: d_signed_pow_7_3,
                    d2psi: d2_signed_pow_7_3,
                    psi_linear: false,
                },
            ],
            alpha: 3.0,
            beta: 7.0 / 3.0,
            c_phi: 1.0,
            c_psi: 7.0 / 3.0,
        }
    }

    /// Coefficient-affine preset s³·t: its linearization residual vanishes
    /// identically, which is the regime where the residual switch can be off.
    pub fn c_linear() -> Nonlinearity {
        Nonlinearity {
            name: "c_linear",
            terms: vec![SeparableTerm {
                phi: cube,
                psi: ident,
                dpsi: one,
                d2psi: zero,
                psi_linear: true,
            }],
            alpha: 3.0,
            beta: 1.0,
            c_phi: 1.0,
            c_psi: 1.0,
        }
    }

    pub fn by_name(name: &str) -> Option<Nonlinearity> {
        match name {
            "c_cubic" => Some(Nonlinearity::c_cubic()),
            "a_cubic" => Some(Nonlinearity::a_cubic()),
            "c_linear" => Some(Nonlinearity::c_linear()),
            _ => None,
        }
    }

    /// Σ_k phi_k(w)·psi_k(q).
    pub fn reaction(&self, w: f64, q: f64) -> f64 {
        self.terms.iter().map(|t| (t.phi)(w) * (t.psi)(q)).sum()
    }

    /// Σ_k phi_k(w)·psi_k'(q), the coefficient derivative of the reaction.
    pub fn reaction_dq(&self, w: f64, q: f64) -> f64 {
        self.terms.iter().map(|t| (t.phi)(w) * (t.dpsi)(q)).sum()
    }

    /// True when every psi has vanishing second derivative on [lo, hi],
    /// decided by sampling; affine presets report exact zeros.
    pub fn curvature_vanishes(&self, lo: f64, hi: f64) -> bool {
        debug_assert!(lo <= hi);
        let samples = 257;
        for term in &self.terms {
            for j in 0..samples {
                let t = lo + (hi - lo) * j as f64 / (samples - 1) as f64;
                if (term.d2psi)(t).abs() > 1e-13 {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Potential identification: f = -Δu + q·w + reaction(w, q), w = u + lift.
    CProblem,
    /// Diffusion identification: f = -div(q∇·) + w·Δq + reaction(w, q).
    AProblem,
}

/// Time-indexed source term.
#[derive(Clone)]
pub enum Source {
    Constant(f64),
    Profile(ScalarField),
    /// (t, x) -> value; used by manufactured-solution studies.
    TimeVarying(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Source {
    pub fn sample(&self, grid: Grid, t: f64) -> Vec<f64> {
        match self {
            Source::Constant(c) => vec![*c; grid.n],
            Source::Profile(p) => {
                assert_eq!(p.grid.n, grid.n, "source profile grid mismatch");
                p.values.clone()
            }
            Source::TimeVarying(f) => (0..grid.n).map(|i| f(t, grid.x(i))).collect(),
        }
    }

    pub fn is_time_constant(&self) -> bool {
        !matches!(self, Source::TimeVarying(_))
    }
}

impl std::fmt::Debug for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Constant(c) => write!(f, "Source::Constant({c})"),
            Source::Profile(_) => write!(f, "Source::Profile(..)"),
            Source::TimeVarying(_) => write!(f, "Source::TimeVarying(..)"),
        }
    }
}

/// Full description of one identification problem.
///
/// `boundary` always stores the physical Dirichlet data of the state. Before
/// homogenization the stored state variable is the physical one; afterwards
/// it is the physical state minus the affine lift, so it has zero boundary
/// values. All operators evaluate on physical values (`physical_state`), which
/// makes the two pictures produce identical right-hand sides because the
/// affine lift is discretely harmonic and time-constant.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub grid: Grid,
    pub nonlinearity: Nonlinearity,
    pub q_star: ScalarField,
    /// Boundary trace of the true coefficient; closes every coefficient
    /// stencil, so coefficient errors carry zero ghost values.
    pub q_star_boundary: (f64, f64),
    pub u0: ScalarField,
    pub g: Source,
    /// Physical Dirichlet values of the state (left, right), time-constant.
    pub boundary: (f64, f64),
    /// Margin c̲ > 0: the physical state must stay ≥ c̲ (potential problem)
    /// or ≤ -c̲ (diffusion problem).
    pub c_lower: f64,
    /// Whether the stored state variable is lifted (zero boundary values).
    pub homogenized: bool,
}

impl ProblemSpec {
    /// Affine interpolant of the physical boundary values on interior nodes.
    pub fn lift_values(&self) -> Vec<f64> {
        let (l, r) = self.boundary;
        let span = self.grid.b - self.grid.a;
        (0..self.grid.n)
            .map(|i| l + (r - l) * (self.grid.x(i) - self.grid.a) / span)
            .collect()
    }

    /// What must be added to the stored state to recover physical values.
    pub fn shift_values(&self) -> Vec<f64> {
        if self.homogenized {
            self.lift_values()
        } else {
            vec![0.0; self.grid.n]
        }
    }

    pub fn physical_state(&self, stored: &[f64]) -> Vec<f64> {
        assert_eq!(stored.len(), self.grid.n);
        if self.homogenized {
            stored
                .iter()
                .zip(self.lift_values())
                .map(|(u, l)| u + l)
                .collect()
        } else {
            stored.to_vec()
        }
    }

    pub fn physical_u0(&self) -> Vec<f64> {
        self.physical_state(&self.u0.values)
    }

    /// Ghost values of the stored state variable.
    pub fn state_ghosts(&self) -> (f64, f64) {
        if self.homogenized {
            (0.0, 0.0)
        } else {
            self.boundary
        }
    }
}

/// Rewrites the problem so the stored state has zero boundary values: the
/// initial state drops by the affine lift and operators keep evaluating on
/// physical values. The source is unchanged because the lift is time-constant
/// and discretely harmonic. Idempotent.
pub fn homogenize(spec: &ProblemSpec) -> ProblemSpec {
    if spec.homogenized {
        return spec.clone();
    }
    let lift = spec.lift_values();
    let mut out = spec.clone();
    for (u, l) in out.u0.values.iter_mut().zip(lift) {
        *u -= l;
    }
    out.homogenized = true;
    out
}

/// Range (min, max) of physical state values: the initial state, the boundary
/// data, and, when supplied, every snapshot of a realized trajectory.
pub fn physical_state_range(spec: &ProblemSpec, realized: Option<&Trajectory>) -> (f64, f64) {
    let mut lo = spec.boundary.0.min(spec.boundary.1);
    let mut hi = spec.boundary.0.max(spec.boundary.1);
    for v in spec.physical_u0() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if let Some(traj) = realized {
        let shift = spec.shift_values();
        for snap in &traj.snapshots {
            for (u, s) in snap.iter().zip(&shift) {
                let w = u + s;
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
    }
    (lo, hi)
}

/// Extremes of the combined reaction w ↦ Σ_k phi_k(w)·psi_k(q) over the
/// state range at a fixed coefficient value, by dense sampling. The split
/// terms of a preset may partially cancel, so the combined extremum is the
/// quantity the comparison argument actually needs.
pub fn reaction_extrema(nl: &Nonlinearity, w_range: (f64, f64), q: f64) -> (f64, f64) {
    let samples = 513;
    let (lo, hi) = w_range;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for j in 0..samples {
        let w = lo + (hi - lo) * j as f64 / (samples - 1) as f64;
        let r = nl.reaction(w, q);
        min = min.min(r);
        max = max.max(r);
    }
    (min, max)
}

fn argmin_location(grid: Grid, values: &[f64]) -> (f64, String) {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    (values[best], format!("x={:.6}", grid.x(best)))
}

/// Checks every data condition the problem needs: state margins, source
/// domination of the reaction, coefficient positivity (diffusion problem),
/// monotonicity of the reaction in the coefficient, and the growth envelopes.
/// Report-style: failures become failed entries, not errors.
///
/// When a realized trajectory is supplied, the state range behind the
/// reaction bound is taken from it; otherwise the initial data and boundary
/// values stand in, which is the best available information before solving.
pub fn validate_problem(spec: &ProblemSpec, realized: Option<&Trajectory>) -> VerificationReport {
    let mut rep = VerificationReport::new();
    let grid = spec.grid;
    let nl = &spec.nonlinearity;
    let c = spec.c_lower;

    if !(c > 0.0) {
        rep.push(
            ReportEntry::ge("margin_positive", c, f64::MIN_POSITIVE, 0.0)
                .with_note("the margin c must be strictly positive"),
        );
        return rep;
    }
    rep.push(ReportEntry::ge("margin_positive", c, f64::MIN_POSITIVE, 0.0));

    let u0_phys = spec.physical_u0();
    let (bl, br) = spec.boundary;
    let w_range = physical_state_range(spec, realized);

    match spec.kind {
        ProblemKind::CProblem => {
            let (worst, loc) = argmin_location(grid, &u0_phys);
            rep.push(
                ReportEntry::ge("initial_state_above_margin", worst, c, 0.0).with_location(loc),
            );
            rep.push(ReportEntry::ge(
                "boundary_above_margin",
                bl.min(br),
                c,
                0.0,
            ));

            // Source must dominate q*·c plus the largest reaction value the
            // state range can produce at each node, so the comparison
            // argument keeps the state above the margin.
            let react_max: Vec<f64> = spec
                .q_star
                .values
                .iter()
                .map(|&q| reaction_extrema(nl, w_range, q).1)
                .collect();
            let sup_bound = react_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let check_g = |g_vals: &[f64]| -> Vec<f64> {
                (0..grid.n)
                    .map(|i| g_vals[i] - spec.q_star.values[i] * c - react_max[i])
                    .collect()
            };
            let (worst, loc) = worst_source_margin(spec, realized, check_g);
            rep.push(
                ReportEntry::ge("source_dominates_reaction", worst, 0.0, 0.0)
                    .with_location(loc)
                    .with_note(format!("nodewise reaction bound up to {sup_bound:.6e}")),
            );
        }
        ProblemKind::AProblem => {
            let max_u0 = u0_phys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            rep.push(ReportEntry::le(
                "initial_state_below_margin",
                max_u0,
                -c,
                0.0,
            ));
            rep.push(
                ReportEntry::le("boundary_below_margin", bl.max(br), -c, 0.0).with_note(
                    "boundary data must sit at or below -c so the state margin \
                     holds up to the boundary",
                ),
            );

            let min_q = spec
                .q_star
                .values
                .iter()
                .cloned()
                .fold(spec.q_star_boundary.0.min(spec.q_star_boundary.1), f64::min);
            let mut positive = ReportEntry::ge("coefficient_positive", min_q, 0.0, 0.0);
            positive.passed = min_q > 0.0;
            rep.push(positive.with_note("diffusion coefficient must be strictly positive"));

            let lap_q = neg_laplacian_with_ghosts(grid, &spec.q_star.values, spec.q_star_boundary);
            let sup_lap = lap_q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            rep.push(
                ReportEntry::le("coefficient_curvature_sup", sup_lap, sup_lap, 0.0)
                    .with_note("recorded; enters the source condition nodewise"),
            );

            // The source must stay below -c·Δq* plus the smallest reaction
            // value the state range can produce at each node (Δ is the
            // negative of the assembled operator), so the comparison argument
            // keeps the state below the margin.
            let react_min: Vec<f64> = spec
                .q_star
                .values
                .iter()
                .map(|&q| reaction_extrema(nl, w_range, q).0)
                .collect();
            let inf_bound = react_min.iter().cloned().fold(f64::INFINITY, f64::min);
            let check_g = |g_vals: &[f64]| -> Vec<f64> {
                (0..grid.n)
                    .map(|i| -g_vals[i] + c * lap_q[i] + react_min[i])
                    .collect()
            };
            let (worst, loc) = worst_source_margin(spec, realized, check_g);
            rep.push(
                ReportEntry::ge("source_dominates_reaction", worst, 0.0, 0.0)
                    .with_location(loc)
                    .with_note(format!("nodewise reaction bound down to {inf_bound:.6e}")),
            );
        }
    }

    rep.push(check_reaction_monotone(spec, w_range));
    rep.merge(check_growth_envelopes(nl, w_range, &spec.q_star.values));

    let beta_cap = match spec.kind {
        ProblemKind::CProblem => 5.0 / 3.0,
        ProblemKind::AProblem => 7.0 / 3.0,
    };
    let mut beta_entry = ReportEntry::le("growth_exponent_range", nl.beta, beta_cap, 0.0);
    if !beta_entry.passed {
        beta_entry.passed = true;
        beta_entry.note = "exponent outside the stated range; warning only in one space \
                           dimension"
            .into();
    }
    rep.push(beta_entry);

    rep
}

/// Worst (most violated) nodewise source margin over time. Time-constant
/// sources are evaluated once; time-varying ones are sampled over the
/// realized horizon.
fn worst_source_margin(
    spec: &ProblemSpec,
    realized: Option<&Trajectory>,
    margin_of: impl Fn(&[f64]) -> Vec<f64>,
) -> (f64, String) {
    let grid = spec.grid;
    if spec.g.is_time_constant() {
        let margins = margin_of(&spec.g.sample(grid, 0.0));
        let (worst, loc) = argmin_location(grid, &margins);
        return (worst, format!("{loc}, all t"));
    }
    let horizon = realized.map(|t| t.horizon()).unwrap_or(1.0);
    let steps = 257;
    let mut worst = f64::INFINITY;
    let mut worst_loc = String::new();
    for k in 0..steps {
        let t = horizon * k as f64 / (steps - 1) as f64;
        let margins = margin_of(&spec.g.sample(grid, t));
        let (w, loc) = argmin_location(grid, &margins);
        if w < worst {
            worst = w;
            worst_loc = format!("t={t:.6}, {loc} (sampled)");
        }
    }
    (worst, worst_loc)
}

/// Samples the reaction over the realized state range and a coefficient box
/// and checks it never decreases in the coefficient.
fn check_reaction_monotone(spec: &ProblemSpec, w_range: (f64, f64)) -> ReportEntry {
    let nl = &spec.nonlinearity;
    let box_r = coefficient_box(spec);
    let (lo, hi) = w_range;
    let w_samples = 33;
    let q_samples = 257;
    let mut worst = f64::INFINITY;
    let mut worst_loc = String::new();
    for i in 0..w_samples {
        let w = lo + (hi - lo) * i as f64 / (w_samples - 1) as f64;
        let mut prev = nl.reaction(w, -box_r);
        for j in 1..q_samples {
            let q = -box_r + 2.0 * box_r * j as f64 / (q_samples - 1) as f64;
            let cur = nl.reaction(w, q);
            let inc = cur - prev;
            if inc < worst {
                worst = inc;
                worst_loc = format!("w={w:.4}, q={q:.4}");
            }
            prev = cur;
        }
    }
    let scale = 1.0 + worst.abs();
    ReportEntry::ge("reaction_monotone_in_coefficient", worst, 0.0, 1e-12 * scale)
        .with_location(worst_loc)
        .with_note(format!(
            "sampled increments over state range [{lo:.3}, {hi:.3}] and |q| ≤ {box_r:.3}"
        ))
}

/// Coefficient sampling box radius: twice the sup of the true coefficient
/// (and its trace), floored at 2 so small coefficients still get exercised.
pub fn coefficient_box(spec: &ProblemSpec) -> f64 {
    let sup_q = spec
        .q_star
        .values
        .iter()
        .fold(
            spec.q_star_boundary.0.abs().max(spec.q_star_boundary.1.abs()),
            |m, v| m.max(v.abs()),
        );
    (2.0 * sup_q).max(2.0)
}

fn check_growth_envelopes(
    nl: &Nonlinearity,
    w_range: (f64, f64),
    q_star: &[f64],
) -> VerificationReport {
    let mut rep = VerificationReport::new();
    let samples = 513;
    let (lo, hi) = w_range;
    let sup_q = q_star.iter().fold(2.0f64, |m, v| m.max(v.abs()));
    let q_r = 2.0 * sup_q;

    let mut phi_excess = f64::NEG_INFINITY;
    let mut psi_excess = f64::NEG_INFINITY;
    for term in &nl.terms {
        for j in 0..samples {
            let s = lo + (hi - lo) * j as f64 / (samples - 1) as f64;
            let envelope = nl.c_phi * (1.0 + s.abs().powf(nl.alpha));
            phi_excess = phi_excess.max((term.phi)(s).abs() - envelope);

            let t = -q_r + 2.0 * q_r * j as f64 / (samples - 1) as f64;
            let envelope = nl.c_psi * (1.0 + t.abs().powf(nl.beta - 1.0));
            psi_excess = psi_excess.max((term.dpsi)(t).abs() - envelope);
        }
    }
    rep.push(
        ReportEntry::le("state_growth_envelope", phi_excess, 0.0, 1e-12)
            .with_note(format!("|phi| - c_phi(1+|s|^alpha) over [{lo:.3}, {hi:.3}]")),
    );
    rep.push(
        ReportEntry::le("coefficient_growth_envelope", psi_excess, 0.0, 1e-12)
            .with_note(format!("|psi'| - c_psi(1+|t|^(beta-1)) over |t| ≤ {q_r:.3}")),
    );
    rep
}
