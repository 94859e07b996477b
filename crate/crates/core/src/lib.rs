//! Online identification of a space-dependent coefficient in a nonlinear
//! parabolic equation by a model-reference adaptive system, together with a
//! verification harness for the energy bounds the scheme is designed to obey.
//!
//! The crate is organized bottom-up: grids and norms (`field`), tridiagonal
//! linear algebra (`linalg`), problem definitions and the forward solver
//! (`problem`, `forward`), the adaptive solver itself (`mras`), noise
//! injection and regularization (`noise`), bound verification (`analysis`),
//! and CSV/JSON persistence (`io`).

pub mod analysis;
pub mod error;
pub mod field;
pub mod forward;
pub mod io;
pub mod linalg;
pub mod mras;
pub mod noise;
pub mod problem;
pub mod report;
pub mod trajectory;

pub use error::CoreError;
pub use field::{Grid, NormKind, ScalarField};
