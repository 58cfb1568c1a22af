//! Householder reflections onto the first basis vector, and the one-qudit
//! QR reduction built from them.

use num_complex::Complex64;

use super::matrix::{vector_norm, ComplexMatrix, ONE, ZERO};
use crate::error::{Result, SynthError};

/// Below this norm of the reflection vector the input is already a multiple of
/// `e_0` and the identity is returned.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Unitary `W` with `W psi = s e_0`, `|s| = |psi|`.
///
/// `W = I - 2 |eta><eta| / <eta|eta>` with `eta = psi - |psi| (psi_0/|psi_0|) e_0`.
/// The first component of `eta` is evaluated without cancellation. When
/// `psi_0 = 0` the phase factor is taken to be 1.
pub fn householder_to_e0(psi: &[Complex64]) -> Result<ComplexMatrix> {
    householder_to_e0_with_tol(psi, DEGENERATE_TOL)
}

pub fn householder_to_e0_with_tol(psi: &[Complex64], degenerate_tol: f64) -> Result<ComplexMatrix> {
    let eta = reflection_vector(psi, degenerate_tol)?;
    let d = psi.len();
    Ok(match eta {
        None => ComplexMatrix::identity(d),
        Some(eta) => {
            let eta_sq: f64 = eta.iter().map(|z| z.norm_sqr()).sum();
            let scale = 2.0 / eta_sq;
            ComplexMatrix::from_fn(d, d, |i, j| {
                let delta = if i == j { ONE } else { ZERO };
                delta - eta[i] * eta[j].conj() * scale
            })
        }
    })
}

/// The reflection vector `eta`, or `None` in the degenerate case.
fn reflection_vector(psi: &[Complex64], degenerate_tol: f64) -> Result<Option<Vec<Complex64>>> {
    if psi.is_empty() {
        return Err(SynthError::InvalidArgument("empty vector".into()));
    }
    let norm = vector_norm(psi);
    if norm == 0.0 {
        return Err(SynthError::ZeroVector);
    }
    let head = psi[0].norm();
    let phase = if head == 0.0 { ONE } else { psi[0] / head };
    let tail_sq: f64 = psi[1..].iter().map(|z| z.norm_sqr()).sum();
    // |psi_0| - |psi| = -tail^2 / (|psi_0| + |psi|)
    let mut eta = psi.to_vec();
    eta[0] = -phase * (tail_sq / (head + norm));
    if vector_norm(&eta) < degenerate_tol {
        return Ok(None);
    }
    Ok(Some(eta))
}

/// Reduces an arbitrary square block to upper-triangular form with Householder
/// reflections. Returns the reflections in application order (each `d x d`,
/// identity on the leading coordinates it does not touch) and the resulting
/// triangular matrix. Only the first `col_limit` columns are reduced.
pub fn householder_triangularize(
    block: &ComplexMatrix,
    col_limit: usize,
) -> (Vec<ComplexMatrix>, ComplexMatrix) {
    let d = block.rows();
    let mut r = block.clone();
    let mut reflections = Vec::new();
    for j in 0..col_limit.min(d.saturating_sub(1)) {
        let sub: Vec<Complex64> = (j..d).map(|i| r[(i, j)]).collect();
        let local = match householder_to_e0(&sub) {
            Ok(h) => h,
            Err(SynthError::ZeroVector) => continue,
            Err(e) => unreachable!("unexpected householder failure: {e}"),
        };
        let h = embed_lower(&local, d);
        r = h.matmul(&r);
        reflections.push(h);
    }
    (reflections, r)
}

/// Places `local` on the trailing coordinates of a `d x d` identity.
pub fn embed_lower(local: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let offset = d - local.rows();
    ComplexMatrix::from_fn(d, d, |i, j| {
        if i >= offset && j >= offset {
            local[(i - offset, j - offset)]
        } else if i == j {
            ONE
        } else {
            ZERO
        }
    })
}

/// One-qudit QR of a unitary: reflections whose product (applied in order)
/// takes `u` to a diagonal matrix of unit-modulus phases.
pub fn qr_one_qudit(u: &ComplexMatrix) -> Result<(Vec<ComplexMatrix>, Vec<Complex64>)> {
    u.ensure_unitary(1e-10)?;
    let (reflections, r) = householder_triangularize(u, u.cols());
    Ok((reflections, r.diagonal()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_state, random_unitary, seeded_rng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_vector_gives_identity() {
        let w = householder_to_e0(&[ONE, ZERO, ZERO]).unwrap();
        assert_eq!(w, ComplexMatrix::identity(3));
    }

    #[test]
    fn second_basis_vector_gives_swap() {
        // eta = (-1, 1), W = I - eta eta^dag = [[0,1],[1,0]]
        let w = householder_to_e0(&[ZERO, ONE]).unwrap();
        let swap = ComplexMatrix::from_row_major(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap();
        assert!(w.max_distance(&swap) < 1e-15);
    }

    #[test]
    fn equal_superposition_maps_to_e0() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [c(s, 0.0), c(s, 0.0)];
        let w = householder_to_e0(&psi).unwrap();
        let out = w.apply(&psi);
        assert!((out[0] - ONE).norm() < 1e-15);
        assert!(out[1].norm() < 1e-15);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let err = householder_to_e0(&[ZERO, ZERO]).unwrap_err();
        assert_eq!(err.to_string(), "zero vector has no reflection");
    }

    #[test]
    fn reflections_are_hermitian_involutions() {
        let mut rng = seeded_rng(11);
        for d in 2..7 {
            let psi = random_state(&mut rng, d);
            let w = householder_to_e0(psi.as_slice()).unwrap();
            assert!(w.max_distance(&w.adjoint()) < 1e-12);
            assert!(w.matmul(&w).max_distance(&ComplexMatrix::identity(d)) < 1e-12);
            let out = w.apply(psi.as_slice());
            assert!((out[0].norm() - psi.norm()).abs() < 1e-12);
            assert!(out[1..].iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn nearly_aligned_vector_is_reduced_accurately() {
        let psi = [c(0.6, 0.8), c(1e-9, 0.0), c(0.0, -2e-9)];
        let w = householder_to_e0(&psi).unwrap();
        let out = w.apply(&psi);
        assert!(out[1].norm() < 1e-20 && out[2].norm() < 1e-20);
    }

    #[test]
    fn qr_identity_and_diagonal() {
        let (refl, phases) = qr_one_qudit(&ComplexMatrix::identity(3)).unwrap();
        assert!(refl.iter().all(|h| h.max_distance(&ComplexMatrix::identity(3)) < 1e-15));
        assert!(phases.iter().all(|p| (p - ONE).norm() < 1e-15));

        let diag = [Complex64::from_polar(1.0, 0.3), Complex64::from_polar(1.0, -1.1)];
        let (_, phases) = qr_one_qudit(&ComplexMatrix::from_diagonal(&diag)).unwrap();
        assert!((phases[0] - diag[0]).norm() < 1e-15);
        assert!((phases[1] - diag[1]).norm() < 1e-15);
    }

    #[test]
    fn qr_random_unitary_reconstructs() {
        let mut rng = seeded_rng(5);
        let u = random_unitary(&mut rng, 4);
        let (refl, phases) = qr_one_qudit(&u).unwrap();
        let mut acc = u.clone();
        for h in &refl {
            acc = h.matmul(&acc);
        }
        assert!(acc.max_off_diagonal() < 1e-9);
        let mut back = ComplexMatrix::from_diagonal(&phases);
        for h in refl.iter().rev() {
            back = h.adjoint().matmul(&back);
        }
        assert!(back.max_distance(&u) < 1e-9);
    }
}
