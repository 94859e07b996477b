//! Uniform 1-D grids, nodal fields, and the discrete norms built on them.
//!
//! Only interior nodes are stored; homogeneous Dirichlet boundary values are
//! implicit. The H norm is the composite trapezoid rule with those zero
//! boundary values, which makes the discrete negative Laplacian exactly
//! self-adjoint in the H inner product, so adjoint identities hold to
//! rounding error instead of discretization error.

use crate::error::CoreError;
use crate::linalg::Laplacian;

/// Uniform grid on (a, b) with n interior nodes and spacing h = (b-a)/(n+1).
///
/// Node i (0-based, 0..n) sits at a + (i+1)h. The endpoints a and b carry
/// implicit Dirichlet values and are never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid {
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Grid, CoreError> {
        if !(b > a) {
            return Err(CoreError::EmptyDomain { a, b });
        }
        if n == 0 {
            return Err(CoreError::ZeroSize);
        }
        let h = (b - a) / (n as f64 + 1.0);
        Ok(Grid { a, b, n, h })
    }

    /// Coordinate of interior node i (0-based).
    pub fn x(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        self.a + (i as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

/// Which discrete norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Discrete L²: trapezoid quadrature with implicit zero boundary.
    H,
    /// Discrete H¹₀ seminorm: forward-difference energy, equals ⟨-Δ_h v, v⟩_H.
    VSemi,
    /// sqrt(H² + VSemi²).
    VFull,
    /// Dual norm sqrt(⟨v, (-Δ_h)⁻¹ v⟩_H), one Laplacian solve per call.
    HMinus1,
}

/// Nodal values of a scalar function on a grid's interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> ScalarField {
        ScalarField {
            grid,
            values: vec![0.0; grid.n],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = (0..grid.n).map(|i| f(grid.x(i))).collect();
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<ScalarField, CoreError> {
        if values.len() != grid.n {
            return Err(CoreError::GridMismatch {
                expected: grid.n,
                got: values.len(),
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> ScalarField {
        ScalarField {
            grid,
            values: vec![c; grid.n],
        }
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        norm(self.grid, &self.values, kind)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Discrete L² inner product h·Σ uᵢvᵢ (trapezoid with zero boundary).
pub fn inner_h(grid: Grid, u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), grid.n);
    assert_eq!(v.len(), grid.n);
    let mut s = 0.0;
    for i in 0..grid.n {
        s += u[i] * v[i];
    }
    grid.h * s
}

pub fn norm_h(grid: Grid, v: &[f64]) -> f64 {
    inner_h(grid, v, v).max(0.0).sqrt()
}

/// Forward-difference gradient energy over all n+1 cell faces, including the
/// two faces against the implicit zero boundary. Equals ⟨-Δ_h v, v⟩_H exactly.
pub fn norm_v_semi(grid: Grid, v: &[f64]) -> f64 {
    assert_eq!(v.len(), grid.n);
    let n = grid.n;
    let mut s = v[0] * v[0] + v[n - 1] * v[n - 1];
    for i in 1..n {
        let d = v[i] - v[i - 1];
        s += d * d;
    }
    (s / grid.h).max(0.0).sqrt()
}

pub fn norm_v_full(grid: Grid, v: &[f64]) -> f64 {
    let h = norm_h(grid, v);
    let vs = norm_v_semi(grid, v);
    (h * h + vs * vs).sqrt()
}

/// Dual norm realized by one Laplacian solve: sqrt(⟨v, (-Δ_h)⁻¹ v⟩_H).
pub fn norm_h_minus1(grid: Grid, v: &[f64]) -> f64 {
    let lap = Laplacian::new(grid);
    let w = lap
        .solve(v)
        .expect("Dirichlet Laplacian is positive definite");
    inner_h(grid, v, &w).max(0.0).sqrt()
}

pub fn norm(grid: Grid, v: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::H => norm_h(grid, v),
        NormKind::VSemi => norm_v_semi(grid, v),
        NormKind::VFull => norm_v_full(grid, v),
        NormKind::HMinus1 => norm_h_minus1(grid, v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const KINDS: [NormKind; 4] = [
        NormKind::H,
        NormKind::VSemi,
        NormKind::VFull,
        NormKind::HMinus1,
    ];

    #[test]
    fn grid_placements() {
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        assert_eq!(g.h, 0.25);
        assert_eq!(g.nodes(), vec![0.25, 0.5, 0.75]);

        let g = Grid::uniform(0.0, 1.0, 1).unwrap();
        assert_eq!(g.h, 0.5);
        assert_eq!(g.x(0), 0.5);

        let g = Grid::uniform(-1.0, 1.0, 7).unwrap();
        assert_eq!(g.h, 0.25);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(
            Grid::uniform(1.0, 1.0, 5),
            Err(CoreError::EmptyDomain { .. })
        ));
        assert!(matches!(
            Grid::uniform(2.0, 1.0, 5),
            Err(CoreError::EmptyDomain { .. })
        ));
        assert!(matches!(Grid::uniform(0.0, 1.0, 0), Err(CoreError::ZeroSize)));
    }

    #[test]
    fn field_length_checked() {
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        assert!(matches!(
            ScalarField::from_values(g, vec![1.0, 2.0]),
            Err(CoreError::GridMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    // The constant-one field underestimates |Omega| = 1 because the quadrature
    // forces zeros at the boundary. The exact integral of the piecewise-linear
    // interpolant (1 inside, linear drop over one boundary cell each side) is
    // n*h - h/3 per the per-cell formula h(l^2 + l*r + r^2)/3, while the norm
    // squared is n*h, so they differ by exactly h/3.
    #[test]
    fn const_one_h_norm_tracks_interpolant_quadrature() {
        for &n in &[3usize, 9, 33, 99, 301] {
            let g = Grid::uniform(0.0, 1.0, n).unwrap();
            let v = ScalarField::constant(g, 1.0);
            let nm = v.norm(NormKind::H);
            assert!(nm >= 0.86 && nm <= 1.0, "n={n}: norm {nm} out of range");

            let mut oracle = 0.0;
            let mut left = 0.0;
            for i in 0..=n {
                let right = if i < n { 1.0 } else { 0.0 };
                oracle += g.h * (left * left + left * right + right * right) / 3.0;
                left = right;
            }
            assert!(
                (nm * nm - oracle).abs() <= g.h / 2.0,
                "n={n}: norm^2 {} vs refined quadrature {oracle}",
                nm * nm
            );
        }
        let g = Grid::uniform(0.0, 1.0, 99).unwrap();
        assert!(ScalarField::constant(g, 1.0).norm(NormKind::H) >= 0.99);
    }

    // sin(pi x) sampled on a uniform grid is an exact eigenvector of the
    // discrete Laplacian, and h*sum(sin^2) = 1/2 exactly, so the discrete norm
    // reproduces the analytic value 1/sqrt(2) to rounding error.
    #[test]
    fn sine_h_norm_is_analytic() {
        let g = Grid::uniform(0.0, 1.0, 199).unwrap();
        let v = ScalarField::from_fn(g, |x| (std::f64::consts::PI * x).sin());
        let nm = v.norm(NormKind::H);
        assert!((nm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((nm - 0.7071).abs() < 1e-3);
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let g = Grid::uniform(0.0, 1.0, 17).unwrap();
        let v = ScalarField::zeros(g);
        for kind in KINDS {
            assert_eq!(v.norm(kind), 0.0);
        }
    }

    #[test]
    fn v_semi_matches_operator_energy() {
        let g = Grid::uniform(0.0, 2.0, 41).unwrap();
        let v = ScalarField::from_fn(g, |x| x * (2.0 - x) * (0.3 + x).cos());
        let av = Laplacian::new(g).apply(&v.values);
        let energy = inner_h(g, &av, &v.values);
        let semi = v.norm(NormKind::VSemi);
        assert!((semi * semi - energy).abs() < 1e-12 * (1.0 + energy));
    }

    // For an exact eigenvector, ||f||_{H^-1} = ||f||_H / lambda_min^(1/2).
    #[test]
    fn h_minus1_of_eigenvector() {
        let g = Grid::uniform(0.0, 1.0, 99).unwrap();
        let v = ScalarField::from_fn(g, |x| (std::f64::consts::PI * x).sin());
        let lam = Laplacian::new(g).min_eigenvalue();
        let expected = v.norm(NormKind::H) / lam.sqrt();
        let got = v.norm(NormKind::HMinus1);
        assert!((got - expected).abs() < 1e-10 * expected);
    }

    fn arb_field() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0e3..1.0e3f64, 1..48)
    }

    proptest! {
        #[test]
        fn norms_absolutely_homogeneous(vals in arb_field(), alpha in -50.0..50.0f64) {
            let g = Grid::uniform(0.0, 1.0, vals.len()).unwrap();
            for kind in KINDS {
                let base = norm(g, &vals, kind);
                let scaled: Vec<f64> = vals.iter().map(|v| alpha * v).collect();
                let got = norm(g, &scaled, kind);
                let want = alpha.abs() * base;
                prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want),
                    "{kind:?}: {got} vs {want}");
            }
        }

        #[test]
        fn norms_satisfy_triangle_inequality(
            u in arb_field(),
            w in proptest::collection::vec(-1.0e3..1.0e3f64, 1..48),
        ) {
            let n = u.len().min(w.len());
            let g = Grid::uniform(0.0, 1.0, n).unwrap();
            let sum: Vec<f64> = (0..n).map(|i| u[i] + w[i]).collect();
            for kind in KINDS {
                let lhs = norm(g, &sum, kind);
                let rhs = norm(g, &u[..n], kind) + norm(g, &w[..n], kind);
                prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs), "{kind:?}: {lhs} vs {rhs}");
            }
        }
    }
}
