//! Linear algebra kernels: dense (nalgebra-backed), sparse, banded and Krylov.

pub mod banded;
pub mod dense;
pub mod eigs;
pub mod krylov;
pub mod sparse;
pub mod tridiag;

pub use banded::{BandedLu, DenseLu, LinearSolver};
pub use dense::{CMatrix, CVector, C64};
pub use eigs::{eigs_near, EigPair, ShiftInvertOptions};
pub use sparse::CsrMatrix;
