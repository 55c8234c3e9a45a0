//! Simulation of matrix-valued diffusions `dX = g(X) dB h(X) + h(X) dBᵀ g(X) + b(X) dt`
//! and of the interacting particle systems formed by their eigenvalues.
//!
//! * [`linalg`]: symmetric / Hermitian matrices, Jacobi eigensolver, spectral functions.
//! * [`noise`]: counter-based reproducible Brownian increments with bridge refinement.
//! * [`models`]: catalog of coefficient triples `(g, h, b)`.
//! * [`matrix_sde`], [`spectral_sde`]: Euler–Maruyama integrators at both levels.
//! * [`verify`]: Monte Carlo experiments and their reports.

pub mod error;
pub mod expr;
pub mod linalg;
pub mod matrix_sde;
pub mod models;
pub mod noise;
pub mod spectral_sde;
pub mod trajectory;
pub mod verify;

pub use error::{LinalgError, ModelError, NoiseError, SdeError};
pub use linalg::{eigendecompose, reorthonormalize, FunctionalCalculus, Matrix, SpectralState, SymmetricMatrixState};
pub use matrix_sde::{simulate_matrix, step_matrix, step_matrix_complex, MatrixSchemeConfig};
pub use models::{catalog, eigen_drift, interaction_sums, kernel_g, Domain, ModelFamily, ModelId, ScalarFn, SpectralCoefficients};
pub use noise::{derive_stream, IncrementSource, Increments, NoiseBundle, NoiseKind, SharedPath};
pub use spectral_sde::{
    build_da, simulate_spectral, step_eigenvalues, step_eigenvectors, EigenvectorLogIncrement, SpectralSchemeConfig,
    TruncationMode,
};
pub use trajectory::{Event, EventKind, MatrixSample, PathDiagnostics, SpectralSample, TrajectoryRecord};
pub use verify::{ExperimentReport, RunSettings, Verdict};
