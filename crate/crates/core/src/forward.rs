//! Forward model: the governing operator, its coefficient derivative, the
//! semi-implicit solve that produces observation data, and the
//! maximum-principle check on realized states.
//!
//! All stencils evaluate on physical state values. Coefficient stencils close
//! with the true coefficient's boundary trace, so coefficient differences
//! (the fields the adaptive solver actually propagates) carry zero ghosts.

use crate::error::CoreError;
use crate::field::Grid;
use crate::linalg::{neg_laplacian_with_ghosts, TriDiagMatrix};
use crate::problem::{homogenize, ProblemKind, ProblemSpec};
use crate::report::{ReportEntry, VerificationReport};
use crate::trajectory::Trajectory;

/// -div(q ∇w) in conservative flux form with arithmetic-mean face
/// coefficients; q and w close with their own ghost values.
pub fn neg_divergence_flux(
    grid: Grid,
    q: &[f64],
    q_ghosts: (f64, f64),
    w: &[f64],
    w_ghosts: (f64, f64),
) -> Vec<f64> {
    let n = grid.n;
    assert_eq!(q.len(), n);
    assert_eq!(w.len(), n);
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let face_q = |i: usize| -> f64 {
        // Face i sits between node i-1 and node i (0-based nodes; face 0 and
        // face n touch the boundary).
        let left = if i == 0 { q_ghosts.0 } else { q[i - 1] };
        let right = if i == n { q_ghosts.1 } else { q[i] };
        0.5 * (left + right)
    };
    let dw = |i: usize| -> f64 {
        let left = if i == 0 { w_ghosts.0 } else { w[i - 1] };
        let right = if i == n { w_ghosts.1 } else { w[i] };
        right - left
    };
    (0..n)
        .map(|i| -(face_q(i + 1) * dw(i + 1) - face_q(i) * dw(i)) * inv_h2)
        .collect()
}

/// Matrix of v ↦ -div(q ∇v) for v with zero boundary values.
pub fn diffusion_matrix(grid: Grid, q: &[f64], q_ghosts: (f64, f64)) -> TriDiagMatrix {
    let n = grid.n;
    assert_eq!(q.len(), n);
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let mut face = vec![0.0; n + 1];
    face[0] = 0.5 * (q_ghosts.0 + q[0]);
    for i in 1..n {
        face[i] = 0.5 * (q[i - 1] + q[i]);
    }
    face[n] = 0.5 * (q[n - 1] + q_ghosts.1);

    let diag: Vec<f64> = (0..n).map(|i| (face[i] + face[i + 1]) * inv_h2).collect();
    let sub: Vec<f64> = (1..n).map(|i| -face[i] * inv_h2).collect();
    let sup: Vec<f64> = (1..n).map(|i| -face[i] * inv_h2).collect();
    TriDiagMatrix::new(sub, diag, sup)
}

/// The governing operator f(q, u): stiff diffusion plus coefficient coupling
/// plus the separable reaction, evaluated on physical state values.
pub fn nemytskii_f(spec: &ProblemSpec, q: &[f64], u: &[f64]) -> Vec<f64> {
    let grid = spec.grid;
    let n = grid.n;
    assert_eq!(q.len(), n);
    assert_eq!(u.len(), n);
    let nl = &spec.nonlinearity;
    let w = spec.physical_state(u);

    match spec.kind {
        ProblemKind::CProblem => {
            let stiff = neg_laplacian_with_ghosts(grid, &w, spec.boundary);
            (0..n)
                .map(|i| stiff[i] + q[i] * w[i] + nl.reaction(w[i], q[i]))
                .collect()
        }
        ProblemKind::AProblem => {
            let flux = neg_divergence_flux(grid, q, spec.q_star_boundary, &w, spec.boundary);
            let neg_lap_q = neg_laplacian_with_ghosts(grid, q, spec.q_star_boundary);
            (0..n)
                .map(|i| flux[i] + w[i] * (-neg_lap_q[i]) + nl.reaction(w[i], q[i]))
                .collect()
        }
    }
}

/// Coefficient derivative B = f'_q(q0_lin, z) as a tridiagonal matrix acting
/// on coefficient increments with zero boundary trace. Its transpose is the
/// adjoint in the discrete L² pairing because the quadrature weight is
/// uniform.
pub fn assemble_dfdq(spec: &ProblemSpec, q0_lin: &[f64], z_sample: &[f64]) -> TriDiagMatrix {
    let grid = spec.grid;
    let n = grid.n;
    assert_eq!(q0_lin.len(), n);
    assert_eq!(z_sample.len(), n);
    let nl = &spec.nonlinearity;
    let w = spec.physical_state(z_sample);

    match spec.kind {
        ProblemKind::CProblem => {
            let diag: Vec<f64> = (0..n)
                .map(|i| w[i] + nl.reaction_dq(w[i], q0_lin[i]))
                .collect();
            TriDiagMatrix::new(vec![0.0; n - 1], diag, vec![0.0; n - 1])
        }
        ProblemKind::AProblem => {
            let inv_h2 = 1.0 / (grid.h * grid.h);
            let dw = |i: usize| -> f64 {
                // Face i between node i-1 and node i, physical ghosts.
                let left = if i == 0 { spec.boundary.0 } else { w[i - 1] };
                let right = if i == n { spec.boundary.1 } else { w[i] };
                right - left
            };
            let mut diag = vec![0.0; n];
            let mut sub = vec![0.0; n - 1];
            let mut sup = vec![0.0; n - 1];
            for i in 0..n {
                let dw_right = dw(i + 1);
                let dw_left = dw(i);
                diag[i] = -(dw_right - dw_left) * 0.5 * inv_h2 - 2.0 * w[i] * inv_h2
                    + nl.reaction_dq(w[i], q0_lin[i]);
                if i + 1 < n {
                    sup[i] = -dw_right * 0.5 * inv_h2 + w[i] * inv_h2;
                }
                if i > 0 {
                    sub[i - 1] = dw_left * 0.5 * inv_h2 + w[i] * inv_h2;
                }
            }
            TriDiagMatrix::new(sub, diag, sup)
        }
    }
}

/// Semi-implicit forward solve of D_t u + f(q*, u) = g: the diffusion part
/// (plus, for the potential problem, the q*·u coupling) is implicit through
/// one tridiagonal solve per step, the reaction is explicit. The returned
/// trajectory uses the same state picture as the input spec.
pub fn solve_forward(spec: &ProblemSpec, t_end: f64, dt: f64) -> Result<Trajectory, CoreError> {
    if !(dt > 0.0) {
        return Err(CoreError::InvalidParam {
            name: "dt",
            message: format!("time step must be positive, got {dt}"),
        });
    }
    if t_end < dt {
        return Err(CoreError::InvalidParam {
            name: "T",
            message: format!("horizon {t_end} is shorter than one step {dt}"),
        });
    }
    let steps = (t_end / dt).round() as usize;
    let hom = homogenize(spec);
    let grid = hom.grid;
    let n = grid.n;
    let q_star = &hom.q_star.values;
    let lift = hom.lift_values();
    let nl = &hom.nonlinearity;

    // Implicit operator and the constant explicit loads.
    let (matrix, constant_load) = match hom.kind {
        ProblemKind::CProblem => {
            let lap = crate::linalg::Laplacian::new(grid);
            let ones_plus: Vec<f64> = q_star.iter().map(|q| 1.0 + dt * q).collect();
            let m = lap.matrix().scaled(dt).plus_diag(&ones_plus);
            // q*·lift stays explicit: it is constant in time.
            let load: Vec<f64> = (0..n).map(|i| q_star[i] * lift[i]).collect();
            (m, load)
        }
        ProblemKind::AProblem => {
            let diff = diffusion_matrix(grid, q_star, hom.q_star_boundary);
            let m = diff.scaled(dt).plus_diag(&vec![1.0; n]);
            // Diffusion of the affine lift plus the state-independent part of
            // the curvature coupling are folded into the explicit load below.
            let load = neg_divergence_flux(grid, q_star, hom.q_star_boundary, &lift, hom.boundary);
            (m, load)
        }
    };
    let delta_q_star: Vec<f64> = match hom.kind {
        ProblemKind::AProblem => neg_laplacian_with_ghosts(grid, q_star, hom.q_star_boundary)
            .iter()
            .map(|v| -v)
            .collect(),
        ProblemKind::CProblem => vec![0.0; n],
    };

    let mut u = hom.u0.values.clone();
    let mut snapshots = Vec::with_capacity(steps + 1);
    snapshots.push(u.clone());

    for k in 0..steps {
        let t = k as f64 * dt;
        let g = hom.g.sample(grid, t);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let w = u[i] + lift[i];
            let explicit = match hom.kind {
                ProblemKind::CProblem => constant_load[i] + nl.reaction(w, q_star[i]),
                ProblemKind::AProblem => {
                    constant_load[i] + w * delta_q_star[i] + nl.reaction(w, q_star[i])
                }
            };
            rhs[i] = u[i] + dt * (g[i] - explicit);
        }
        u = matrix.solve(&rhs)?;
        if !u.iter().all(|v| v.is_finite()) {
            return Err(CoreError::BlowUp {
                step: k + 1,
                context: "forward solve",
            });
        }
        snapshots.push(u.clone());
    }

    if !spec.homogenized {
        for snap in &mut snapshots {
            for (v, l) in snap.iter_mut().zip(&lift) {
                *v += l;
            }
        }
    }
    Trajectory::new(grid, dt, snapshots)
}

/// Exact data derivative from the model identity D_t z = g - f(q*, z),
/// avoiding numerical differentiation of the discrete trajectory.
pub fn exact_dz(spec: &ProblemSpec, z: &Trajectory) -> Result<Trajectory, CoreError> {
    let grid = spec.grid;
    let mut snapshots = Vec::with_capacity(z.len());
    for k in 0..z.len() {
        let g = spec.g.sample(grid, z.time(k));
        let f = nemytskii_f(spec, &spec.q_star.values, z.snapshot(k));
        snapshots.push((0..grid.n).map(|i| g[i] - f[i]).collect());
    }
    Trajectory::new(grid, z.dt, snapshots)
}

/// Scans the physical state over the whole trajectory: the potential problem
/// needs min w ≥ c̲ - tol, the diffusion problem max w ≤ -c̲ + tol.
pub fn check_max_principle(spec: &ProblemSpec, traj: &Trajectory, tol: f64) -> VerificationReport {
    let shift = spec.shift_values();
    let mut worst = match spec.kind {
        ProblemKind::CProblem => f64::INFINITY,
        ProblemKind::AProblem => f64::NEG_INFINITY,
    };
    let mut worst_at = (0usize, 0usize);
    for (k, snap) in traj.snapshots.iter().enumerate() {
        for i in 0..spec.grid.n {
            let w = snap[i] + shift[i];
            let more_extreme = match spec.kind {
                ProblemKind::CProblem => w < worst,
                ProblemKind::AProblem => w > worst,
            };
            if more_extreme {
                worst = w;
                worst_at = (k, i);
            }
        }
    }
    let location = format!(
        "t={:.6}, x={:.6}",
        traj.time(worst_at.0),
        spec.grid.x(worst_at.1)
    );
    let entry = match spec.kind {
        ProblemKind::CProblem => {
            ReportEntry::ge("state_margin", worst, spec.c_lower, tol).with_location(location)
        }
        ProblemKind::AProblem => {
            ReportEntry::le("state_margin", worst, -spec.c_lower, tol).with_location(location)
        }
    };
    let mut rep = VerificationReport::new();
    rep.push(entry);
    rep
}
