//! Time-indexed snapshot sequences on a uniform time grid.

use crate::error::CoreError;
use crate::field::{Grid, ScalarField};

/// Snapshots at times k·dt, k = 0..len-1. The time grid is implicit, so
/// uniformity is exact by construction.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub dt: f64,
    pub snapshots: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(grid: Grid, dt: f64, snapshots: Vec<Vec<f64>>) -> Result<Trajectory, CoreError> {
        if !(dt > 0.0) {
            return Err(CoreError::InvalidParam {
                name: "dt",
                message: format!("time step must be positive, got {dt}"),
            });
        }
        for (k, snap) in snapshots.iter().enumerate() {
            if snap.len() != grid.n {
                return Err(CoreError::GridMismatch {
                    expected: grid.n,
                    got: snap.len(),
                });
            }
            if !snap.iter().all(|v| v.is_finite()) {
                return Err(CoreError::BlowUp {
                    step: k,
                    context: "trajectory construction",
                });
            }
        }
        Ok(Trajectory {
            grid,
            dt,
            snapshots,
        })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn snapshot(&self, k: usize) -> &[f64] {
        &self.snapshots[k]
    }

    pub fn field(&self, k: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.snapshots[k].clone(),
        }
    }

    /// Final time (len-1)·dt; zero for a single-snapshot trajectory.
    pub fn horizon(&self) -> f64 {
        match self.len() {
            0 => 0.0,
            l => (l - 1) as f64 * self.dt,
        }
    }
}
