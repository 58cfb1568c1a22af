//! Seeded random instances: Haar-like unitaries, states, Hermitian operators
//! and density matrices.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexMatrix, StateVector};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Normalized state with i.i.d. complex Gaussian amplitudes.
pub fn random_state<R: Rng>(rng: &mut R, dim: usize) -> StateVector {
    let v = StateVector::new((0..dim).map(|_| gaussian(rng)).collect());
    v.normalized().expect("gaussian vector is nonzero")
}

/// Haar-distributed unitary from Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    random_isometry(rng, n, n)
}

/// `rows x cols` matrix with orthonormal columns.
pub fn random_isometry<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let g = gaussian_matrix(rng, rows, cols);
    orthonormalize_columns(&g)
}

/// Modified Gram-Schmidt, applied twice.
pub fn orthonormalize_columns(m: &ComplexMatrix) -> ComplexMatrix {
    let mut q = m.clone();
    for _ in 0..2 {
        for j in 0..q.cols() {
            let mut v = q.column(j);
            for k in 0..j {
                let u = q.column(k);
                let proj = u.inner(&v);
                for i in 0..v.dim() {
                    v[i] -= proj * u[i];
                }
            }
            let v = v.normalized().expect("columns are linearly independent");
            q.set_column(j, v.as_slice());
        }
    }
    q
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = gaussian_matrix(rng, n, n);
    g.add(&g.adjoint()).scale(Complex64::new(0.5, 0.0))
}

/// Full-rank mixed state `G G^dag / Tr`.
pub fn random_density<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = gaussian_matrix(rng, n, n);
    let rho = g.matmul(&g.adjoint());
    let tr = rho.trace();
    rho.scale(Complex64::new(1.0, 0.0) / tr)
}
