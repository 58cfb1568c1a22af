//! Dense complex linear algebra used throughout the synthesizers.

mod eigen;
mod householder;
mod matrix;

pub use eigen::{
    normal_eigendecomposition, normal_eigendecomposition_with, principal_arg, unitary_root, EigenMode,
    EigenOptions, EigenSystem,
};
pub use householder::{
    embed_lower, householder_to_e0, householder_to_e0_with_tol, householder_triangularize, qr_one_qudit,
    DEGENERATE_TOL,
};
pub use matrix::{flip_matrix, inc_matrix, vector_norm, ComplexMatrix, StateVector, ONE, ZERO};
