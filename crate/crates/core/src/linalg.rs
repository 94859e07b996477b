//! Tridiagonal matrices, the Thomas solve, and the Dirichlet Laplacian.

use crate::error::CoreError;
use crate::field::Grid;

/// Tridiagonal matrix: `sub` couples row i+1 with column i (length n-1),
/// `diag` has length n, `sup` couples row i with column i+1 (length n-1).
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagMatrix {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TriDiagMatrix {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> TriDiagMatrix {
        let n = diag.len();
        assert!(n >= 1, "matrix must have at least one row");
        assert_eq!(sub.len(), n - 1);
        assert_eq!(sup.len(), n - 1);
        TriDiagMatrix { sub, diag, sup }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn scaled(&self, c: f64) -> TriDiagMatrix {
        TriDiagMatrix {
            sub: self.sub.iter().map(|v| c * v).collect(),
            diag: self.diag.iter().map(|v| c * v).collect(),
            sup: self.sup.iter().map(|v| c * v).collect(),
        }
    }

    pub fn minus(&self, other: &TriDiagMatrix) -> TriDiagMatrix {
        assert_eq!(self.n(), other.n());
        TriDiagMatrix {
            sub: self.sub.iter().zip(&other.sub).map(|(a, b)| a - b).collect(),
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a - b).collect(),
            sup: self.sup.iter().zip(&other.sup).map(|(a, b)| a - b).collect(),
        }
    }

    /// Adds d to the diagonal in place and returns self (builder style).
    pub fn plus_diag(mut self, d: &[f64]) -> TriDiagMatrix {
        assert_eq!(d.len(), self.n());
        for (di, add) in self.diag.iter_mut().zip(d) {
            *di += add;
        }
        self
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sup[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sub[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Thomas algorithm. Errors on a vanishing pivot; no pivoting is done, so
    /// callers must pass diagonally dominant or positive definite systems.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, CoreError> {
        let n = self.n();
        assert_eq!(rhs.len(), n);
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];

        let mut den = self.diag[0];
        if den.abs() < 1e-300 {
            return Err(CoreError::SingularSolve { row: 0 });
        }
        if n > 1 {
            c_prime[0] = self.sup[0] / den;
        }
        d_prime[0] = rhs[0] / den;

        for i in 1..n {
            den = self.diag[i] - self.sub[i - 1] * c_prime[i - 1];
            if den.abs() < 1e-300 {
                return Err(CoreError::SingularSolve { row: i });
            }
            if i + 1 < n {
                c_prime[i] = self.sup[i] / den;
            }
            d_prime[i] = (rhs[i] - self.sub[i - 1] * d_prime[i - 1]) / den;
        }

        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            x[i] -= c_prime[i] * x[i + 1];
        }
        Ok(x)
    }
}

/// The negative second-difference operator -Δ_h with homogeneous Dirichlet
/// closure: (Av)_i = (2v_i - v_{i-1} - v_{i+1})/h², v_0 = v_{n+1} = 0.
/// Symmetric positive definite.
pub struct Laplacian {
    grid: Grid,
    matrix: TriDiagMatrix,
}

impl Laplacian {
    pub fn new(grid: Grid) -> Laplacian {
        let n = grid.n;
        let inv_h2 = 1.0 / (grid.h * grid.h);
        let matrix = TriDiagMatrix::new(
            vec![-inv_h2; n - 1],
            vec![2.0 * inv_h2; n],
            vec![-inv_h2; n - 1],
        );
        Laplacian { grid, matrix }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn matrix(&self) -> &TriDiagMatrix {
        &self.matrix
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.apply(v)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, CoreError> {
        self.matrix.solve(rhs)
    }

    /// Smallest eigenvalue by inverse power iteration. The closed form is
    /// (4/h²)·sin²(πh/(2(b-a))); the iteration is kept as the implementation
    /// and the closed form lives in the tests as the oracle.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.grid.n;
        let mut v = vec![1.0; n];
        let nrm = (v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        for x in &mut v {
            *x /= nrm;
        }
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let w = self.solve(&v).expect("positive definite");
            let vv: f64 = v.iter().map(|x| x * x).sum();
            let vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let next = vv / vw;
            let wn = (w.iter().map(|x| x * x).sum::<f64>()).sqrt();
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / wn;
            }
            if (next - lambda).abs() <= 1e-13 * next.abs() {
                return next;
            }
            lambda = next;
        }
        lambda
    }
}

/// (2v_i - v_{i-1} - v_{i+1})/h² with explicit ghost values closing the ends,
/// for stencils whose boundary trace is known but nonzero.
pub fn neg_laplacian_with_ghosts(grid: Grid, v: &[f64], ghosts: (f64, f64)) -> Vec<f64> {
    let n = grid.n;
    assert_eq!(v.len(), n);
    let inv_h2 = 1.0 / (grid.h * grid.h);
    (0..n)
        .map(|i| {
            let left = if i == 0 { ghosts.0 } else { v[i - 1] };
            let right = if i + 1 == n { ghosts.1 } else { v[i + 1] };
            (2.0 * v[i] - left - right) * inv_h2
        })
        .collect()
}

/// Smallest value of the quotient ‖v‖²_{V_semi}/‖v‖²_H over nonzero fields,
/// i.e. the smallest eigenvalue of -Δ_h. Gives the lower bound
/// ‖v‖²_{V_semi} ≥ embedding_constant·‖v‖²_H used in the decay-rate formula.
pub fn embedding_constant(grid: Grid) -> f64 {
    Laplacian::new(grid).min_eigenvalue()
}
