//! Acceptance gate: ten numbered end-to-end checks over the whole pipeline.
//! Each test prints one verdict line so the gate can be read off a plain
//! `cargo test` log. Tolerances are pinned here, not imported, so a change
//! in library defaults cannot silently weaken the gate.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mras_cli::config::{
    AdaptationSection, AnalysisSection, ExperimentConfig, FieldDescriptor, KindName, NoiseSection,
    ProblemSection, ReactionName, SolverSection, SourceDescriptor,
};
use mras_cli::experiment::run_experiment;
use mras_core::analysis::{
    energy, predicted_omega, verify_coercivity, verify_lipschitz, verify_decay_bounds,
    EnergyConstants,
};
use mras_core::field::{norm_h, Grid, ScalarField};
use mras_core::forward::{assemble_dfdq, exact_dz, solve_forward};
use mras_core::linalg::embedding_constant;
use mras_core::mras::{run_mras, AdaptiveConfig, LipschitzEval, MrasRun, SigmaMode, StabilizerMode};
use mras_core::problem::{homogenize, Nonlinearity, ProblemKind, ProblemSpec, Source};
use mras_core::report::VerificationReport;
use mras_core::trajectory::Trajectory;

fn verdict(number: u32, name: &str, pass: bool) {
    println!(
        "criterion {number:02} ({name}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn potential_spec(n: usize) -> ProblemSpec {
    let grid = Grid::uniform(0.0, 1.0, n).unwrap();
    ProblemSpec {
        kind: ProblemKind::CProblem,
        grid,
        nonlinearity: Nonlinearity::c_cubic(),
        q_star: ScalarField::from_fn(grid, |x| 1.0 + 0.5 * (PI * x).sin()),
        q_star_boundary: (1.0, 1.0),
        u0: ScalarField::constant(grid, 1.0),
        g: Source::Constant(6.0),
        boundary: (1.0, 1.0),
        c_lower: 1.0,
        homogenized: false,
    }
}

fn diffusion_spec(n: usize) -> ProblemSpec {
    let grid = Grid::uniform(0.0, 1.0, n).unwrap();
    ProblemSpec {
        kind: ProblemKind::AProblem,
        grid,
        nonlinearity: Nonlinearity::a_cubic(),
        q_star: ScalarField::from_fn(grid, |x| 1.0 + 0.3 * (PI * x).sin()),
        q_star_boundary: (1.0, 1.0),
        u0: ScalarField::constant(grid, -1.2),
        g: Source::Constant(-10.0),
        boundary: (-1.2, -1.2),
        c_lower: 1.0,
        homogenized: false,
    }
}

fn adaptive_config(q0: ScalarField, dt: f64, t_end: f64) -> AdaptiveConfig {
    AdaptiveConfig {
        q0_lin: q0.clone(),
        q0,
        m: 1.0,
        c_coe: 1.0,
        lipschitz: LipschitzEval::Formula,
        lipschitz_inflation: 0.0,
        sigma: SigmaMode::Auto,
        dt,
        t_end,
        stabilizer: StabilizerMode::Guaranteed,
    }
}

/// Forward data, shifted to zero boundaries, driving one adaptive run.
fn pipeline(
    spec: &ProblemSpec,
    q0: ScalarField,
    dt: f64,
    t_end: f64,
) -> (ProblemSpec, Trajectory, MrasRun) {
    let data_phys = solve_forward(spec, t_end, dt).unwrap();
    let spec_h = homogenize(spec);
    let lift = spec.lift_values();
    let data_h = Trajectory::new(
        spec.grid,
        dt,
        data_phys
            .snapshots
            .iter()
            .map(|s| s.iter().zip(&lift).map(|(v, l)| v - l).collect())
            .collect(),
    )
    .unwrap();
    let dz = exact_dz(&spec_h, &data_h).unwrap();
    let cfg = adaptive_config(q0, dt, t_end);
    let run = run_mras(&spec_h, &data_h, &dz, &cfg).unwrap();
    (spec_h, data_h, run)
}

fn reference_constants(grid: Grid) -> EnergyConstants {
    EnergyConstants {
        c_coe: 1.0,
        m: 1.0,
        c_vh: embedding_constant(grid),
    }
}

fn entry<'a>(report: &'a VerificationReport, name: &str) -> &'a mras_core::report::ReportEntry {
    report
        .entries
        .iter()
        .find(|e| e.name == name)
        .unwrap_or_else(|| panic!("missing report entry {name}"))
}

#[test]
fn criterion_01_true_coefficient_is_a_fixed_point() {
    let clock = Instant::now();
    let spec = potential_spec(99);
    let q_norm = norm_h(spec.grid, &spec.q_star.values);
    let (_, _, run) = pipeline(&spec, spec.q_star.clone(), 1e-3, 2.0);
    let sup_e = energy(&run.diagnostics).into_iter().fold(0.0, f64::max);
    let bound = 1e-8 * (1.0 + q_norm * q_norm);
    let elapsed = clock.elapsed().as_secs_f64();
    let pass = sup_e <= bound && elapsed < 5.0;
    verdict(1, "fixed point", pass);
    assert!(
        pass,
        "sup energy {sup_e:.3e} vs bound {bound:.3e}, runtime {elapsed:.2}s"
    );
}

#[test]
fn criterion_02_energy_decays_and_halves() {
    let clock = Instant::now();
    let spec = potential_spec(99);
    let constants = reference_constants(spec.grid);
    let omega = predicted_omega(spec.kind, &constants);
    let t_end = 2.0 / omega;
    let q0 = ScalarField::constant(spec.grid, 1.0);
    let (_, _, run) = pipeline(&spec, q0, 1e-3, t_end);
    let e = energy(&run.diagnostics);
    let e0 = e[0];
    let tol = 1e-10 * (1.0 + e0);
    let worst_uptick = e
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let ratio = e.last().unwrap() / e0;
    let elapsed = clock.elapsed().as_secs_f64();
    let pass = worst_uptick <= tol && ratio <= 0.5 && elapsed < 30.0;
    verdict(2, "energy decay", pass);
    assert!(
        pass,
        "worst uptick {worst_uptick:.3e} vs tol {tol:.3e}, E(T)/E(0) = {ratio:.4}, runtime {elapsed:.2}s"
    );
}

#[test]
fn criterion_03_exponential_envelope() {
    let spec = potential_spec(99);
    let constants = reference_constants(spec.grid);
    let omega = predicted_omega(spec.kind, &constants);
    let q0 = ScalarField::constant(spec.grid, 1.0);
    let (_, _, run) = pipeline(&spec, q0, 1e-3, 2.0 / omega);
    let e = energy(&run.diagnostics);
    let e0 = e[0];
    let worst = run
        .diagnostics
        .iter()
        .zip(&e)
        .map(|(row, &ek)| ek / (1.1 * (-omega * row.t).exp() * e0))
        .fold(0.0, f64::max);
    let pass = worst <= 1.0;
    verdict(3, "exponential envelope", pass);
    assert!(pass, "worst envelope ratio {worst:.4}");
}

#[test]
fn criterion_04_integral_balance_slack() {
    let spec = potential_spec(99);
    let constants = reference_constants(spec.grid);
    let omega = predicted_omega(spec.kind, &constants);
    let q0 = ScalarField::constant(spec.grid, 1.0);
    let (spec_h, data_h, run) = pipeline(&spec, q0, 1e-3, 2.0 / omega);
    let report = verify_decay_bounds(&spec_h, &run, &data_h, &constants);
    let e = entry(&report, "integral_balance");
    // The recorded bound carries a 10% discretization indulgence; undo it to
    // express the margin relative to the exact inequality.
    let raw_bound = e.bound / 1.1;
    let relative_slack = (raw_bound - e.measured) / raw_bound;
    let pass = e.passed && relative_slack >= -0.1;
    verdict(4, "integral balance", pass);
    assert!(pass, "relative slack {relative_slack:.4}");
}

#[test]
fn criterion_05_diffusion_coefficient_coercivity() {
    let spec = diffusion_spec(99);
    let data_phys = solve_forward(&spec, 1.0, 1e-3).unwrap();
    let sup_state = data_phys
        .snapshots
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let spec_h = homogenize(&spec);
    let lift = spec.lift_values();
    let data_h = Trajectory::new(
        spec.grid,
        1e-3,
        data_phys
            .snapshots
            .iter()
            .map(|s| s.iter().zip(&lift).map(|(v, l)| v - l).collect())
            .collect(),
    )
    .unwrap();
    let report = verify_coercivity(&spec_h, &data_h, 100, 11);
    let e = entry(&report, "coefficient_coercivity");
    // Lower-bound entries store the achieved value in `bound`; re-derive the
    // criterion from the raw quotient rather than trusting the pass flag.
    let worst_quotient = e.bound;
    let pass = sup_state <= -1.0 && worst_quotient >= 1.0 - 1e-8 && e.passed;
    verdict(5, "diffusion coercivity", pass);
    assert!(
        pass,
        "state sup {sup_state:.4} (needs <= -1), worst quotient {worst_quotient:.12}"
    );
}

#[test]
fn criterion_06_linearization_error_sampling() {
    let spec = potential_spec(99);
    let q0 = ScalarField::constant(spec.grid, 1.0);
    let (spec_h, data_h, _) = pipeline(&spec, q0.clone(), 1e-3, 1.0);
    let cfg = adaptive_config(q0.clone(), 1e-3, 1.0);
    let report = verify_lipschitz(&spec_h, &cfg, &data_h, 100, 13);
    let cubic = entry(&report, "linearization_ratio");

    let mut linear_spec = potential_spec(99);
    linear_spec.nonlinearity = Nonlinearity::c_linear();
    let (lin_h, lin_data, _) = pipeline(&linear_spec, q0.clone(), 1e-3, 1.0);
    let lin_cfg = adaptive_config(q0, 1e-3, 1.0);
    let lin_report = verify_lipschitz(&lin_h, &lin_cfg, &lin_data, 100, 13);
    let linear = entry(&lin_report, "linearization_residual");

    let pass = cubic.measured <= 1.0 && linear.measured <= 1e-12;
    verdict(6, "linearization sampling", pass);
    assert!(
        pass,
        "cubic worst ratio {:.6}, linear worst residual {:.3e}",
        cubic.measured, linear.measured
    );
}

#[test]
fn criterion_07_adjoint_consistency() {
    let mut worst = 0.0f64;
    for spec in [potential_spec(99), diffusion_spec(99)] {
        let data = solve_forward(&spec, 0.5, 1e-3).unwrap();
        let spec_h = homogenize(&spec);
        let lift = spec.lift_values();
        let grid = spec.grid;
        let h = grid.h;
        let n = grid.n;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..100 {
            let snap = data.snapshot(trial % data.len());
            let z: Vec<f64> = snap.iter().zip(&lift).map(|(v, l)| v - l).collect();
            let q_lin: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
            let b = assemble_dfdq(&spec_h, &q_lin, &z);
            let dq: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b_dq = b.apply(&dq);
            let bt_v = b.apply_transpose(&v);
            let dot = |a: &[f64], c: &[f64]| h * a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
            let lhs = dot(&b_dq, &v);
            let rhs = dot(&dq, &bt_v);
            let scale = 1.0f64
                .max(norm_h(grid, &b_dq) * norm_h(grid, &v))
                .max(norm_h(grid, &dq) * norm_h(grid, &bt_v));
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    let pass = worst <= 1e-12;
    verdict(7, "adjoint consistency", pass);
    assert!(pass, "worst scaled adjoint defect {worst:.3e}");
}

fn manufactured_spec(n: usize) -> ProblemSpec {
    // State 2 + e^{-t} sin(pi x) with unit potential; the source is assembled
    // from continuum derivatives so the discrete error is pure scheme error.
    let grid = Grid::uniform(0.0, 1.0, n).unwrap();
    let z_star = |t: f64, x: f64| 2.0 + (-t).exp() * (PI * x).sin();
    let g = move |t: f64, x: f64| {
        let s = (PI * x).sin();
        let z = z_star(t, x);
        (PI * PI - 1.0) * (-t).exp() * s + z + z * z * z
    };
    ProblemSpec {
        kind: ProblemKind::CProblem,
        grid,
        nonlinearity: Nonlinearity::c_cubic(),
        q_star: ScalarField::constant(grid, 1.0),
        q_star_boundary: (1.0, 1.0),
        u0: ScalarField::from_fn(grid, |x| z_star(0.0, x)),
        g: Source::TimeVarying(Arc::new(g)),
        boundary: (2.0, 2.0),
        c_lower: 1.0,
        homogenized: false,
    }
}

#[test]
fn criterion_08_forward_solver_orders() {
    let exact = |t: f64, x: f64| 2.0 + (-t).exp() * (PI * x).sin();
    // Space: dt shrinks with h^2 so the first-order time error tracks the
    // second-order space error instead of flooring it.
    let cases = [(49usize, 4e-4), (99, 1e-4), (199, 2.5e-5)];
    let errs: Vec<f64> = cases
        .iter()
        .map(|&(n, dt)| {
            let spec = manufactured_spec(n);
            let traj = solve_forward(&spec, 0.25, dt).unwrap();
            let last = traj.snapshot(traj.len() - 1);
            let t = traj.time(traj.len() - 1);
            spec.grid
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, &x)| (last[i] - exact(t, x)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let space01 = (errs[0] / errs[1]).log2();
    let space12 = (errs[1] / errs[2]).log2();

    // Time: fixed grid, so differencing refinements cancels the space error.
    let spec = manufactured_spec(99);
    let solves: Vec<Vec<f64>> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let traj = solve_forward(&spec, 1.0, dt).unwrap();
            traj.snapshot(traj.len() - 1).to_vec()
        })
        .collect();
    let sup_diff = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let time_order = (sup_diff(&solves[0], &solves[1]) / sup_diff(&solves[1], &solves[2])).log2();

    let pass = space01 >= 1.9 && space12 >= 1.9 && time_order >= 0.9;
    verdict(8, "forward solver orders", pass);
    assert!(
        pass,
        "space orders {space01:.3}, {space12:.3}; time order {time_order:.3}"
    );
}

/// Reference noisy experiment: identity spatial regularizer (the temporal
/// window does the averaging), so the clean limit reproduces exact data.
fn noisy_config(delta: f64) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSection {
            kind: KindName::Potential,
            domain: [0.0, 1.0],
            n: 99,
            reaction: ReactionName::Cubic,
            coefficient: FieldDescriptor::OnePlusSine {
                amplitude: 0.5,
                k: 1,
            },
            boundary: [1.0, 1.0],
            initial: None,
            source: SourceDescriptor::Constant { value: 6.0 },
            margin: 1.0,
        },
        solver: SolverSection {
            dt: 1e-3,
            t_end: 2.0,
        },
        adaptation: AdaptationSection::default(),
        noise: Some(NoiseSection {
            delta,
            p: 2.0,
            seed: 42,
            sp_width: 0.0,
            ti_window: 5,
        }),
        analysis: AnalysisSection::default(),
    }
}

fn read_energy_series(dir: &std::path::Path) -> Vec<f64> {
    let text = std::fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .collect()
}

#[test]
fn criterion_09_noise_plateau_scaling_and_clean_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let coarse = run_experiment(&noisy_config(0.02), &tmp.path().join("d02")).unwrap();
    let fine = run_experiment(&noisy_config(0.01), &tmp.path().join("d01")).unwrap();
    let ratio = coarse.energy_plateau / fine.energy_plateau;

    let clean_dir = tmp.path().join("d00");
    let clean = run_experiment(&noisy_config(0.0), &clean_dir).unwrap();
    let e = read_energy_series(&clean_dir);
    let e0 = e[0];
    // The clean limit must reproduce the exact-data decay up to 1e-6 slack on
    // both the per-step monotonicity and the halving ratio.
    let tol = (1e-10 + 1e-6) * (1.0 + e0);
    let worst_uptick = e
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let horizon = 2.0 / clean.omega_predicted;
    let idx = ((horizon / 1e-3).round() as usize).min(e.len() - 1);
    let halving = e[idx] / e0;

    let pass = (2.0..=8.0).contains(&ratio) && worst_uptick <= tol && halving <= 0.5 + 1e-6;
    verdict(9, "noise plateau scaling", pass);
    assert!(
        pass,
        "plateau ratio {ratio:.3}, clean worst uptick {worst_uptick:.3e} vs tol {tol:.3e}, clean E(T)/E(0) {halving:.3e}"
    );
}

#[test]
fn criterion_10_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = noisy_config(0.02);
    run_experiment(&cfg, &tmp.path().join("first")).unwrap();
    run_experiment(&cfg, &tmp.path().join("second")).unwrap();
    let a = std::fs::read(tmp.path().join("first/diagnostics.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("second/diagnostics.csv")).unwrap();
    let pass = !a.is_empty() && a == b;
    verdict(10, "deterministic outputs", pass);
    assert!(pass, "diagnostics streams differ between identical runs");
}
