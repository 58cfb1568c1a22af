//! Eigendecomposition of normal matrices.
//!
//! A normal matrix `M` splits as `H1 + i H2` with `H1 = (M + M^dag)/2` and
//! `H2 = (M - M^dag)/(2i)` commuting Hermitian matrices. Both are diagonalized
//! at once by complex Jacobi rotations, each chosen to minimize the combined
//! off-diagonal mass of the pair. A Hermitian input is the single-matrix case.

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, StateVector, ZERO};
use crate::error::{Result, SynthError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMode {
    Hermitian,
    Unitary,
    /// Any normal matrix.
    Normal,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Allowed `max |M - M^dag|`, `max |M^dag M - I|` or normality defect.
    pub symmetry_tol: f64,
    /// Eigenvalues closer than this are treated as one eigenspace and their
    /// vectors re-orthonormalized.
    pub degeneracy_tol: f64,
    pub max_sweeps: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { symmetry_tol: 1e-10, degeneracy_tol: 1e-8, max_sweeps: 100 }
    }
}

/// Eigenvalues and orthonormal eigenvectors (columns of `vectors`).
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<Complex64>,
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn vector(&self, k: usize) -> StateVector {
        self.vectors.column(k)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `V diag(values) V^dag`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let lam = ComplexMatrix::from_diagonal(&self.values);
        self.vectors.matmul(&lam).matmul(&self.vectors.adjoint())
    }

    /// Largest `|M v_k - lambda_k v_k|` over all pairs.
    pub fn max_residual(&self, m: &ComplexMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            let v = self.vector(k);
            let mv = m.apply(v.as_slice());
            let r = mv
                .iter()
                .zip(v.as_slice())
                .map(|(a, b)| (a - self.values[k] * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        worst
    }
}

pub fn normal_eigendecomposition(m: &ComplexMatrix, mode: EigenMode) -> Result<EigenSystem> {
    normal_eigendecomposition_with(m, mode, &EigenOptions::default())
}

pub fn normal_eigendecomposition_with(
    m: &ComplexMatrix,
    mode: EigenMode,
    opts: &EigenOptions,
) -> Result<EigenSystem> {
    if !m.is_square() {
        return Err(SynthError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let n = m.rows();
    match mode {
        EigenMode::Hermitian => {
            let residual = m.hermiticity_residual();
            if residual >= opts.symmetry_tol {
                return Err(SynthError::NotHermitian { residual });
            }
        }
        EigenMode::Unitary => m.ensure_unitary(opts.symmetry_tol)?,
        EigenMode::Normal => {
            let residual = m.normality_residual();
            if residual >= opts.symmetry_tol * m.max_abs().max(1.0).powi(2) {
                return Err(SynthError::NotNormal { residual });
            }
        }
    }

    let adj = m.adjoint();
    let h1 = m.add(&adj).scale(Complex64::new(0.5, 0.0));
    let mut pair = vec![h1];
    if mode != EigenMode::Hermitian {
        // (M - M^dag) / (2i)
        pair.push(m.sub(&adj).scale(Complex64::new(0.0, -0.5)));
    }
    let mut vectors = ComplexMatrix::identity(n);
    joint_jacobi(&mut pair, &mut vectors, opts.max_sweeps)?;

    let mut values: Vec<Complex64> = (0..n)
        .map(|k| {
            let re = pair[0][(k, k)].re;
            let im = pair.get(1).map_or(0.0, |h2| h2[(k, k)].re);
            Complex64::new(re, im)
        })
        .collect();
    if mode == EigenMode::Unitary {
        for v in &mut values {
            *v /= v.norm();
        }
    }

    reorthonormalize_degenerate(&values, &mut vectors, opts.degeneracy_tol);
    Ok(EigenSystem { values, vectors })
}

/// Simultaneous Jacobi diagonalization of commuting Hermitian matrices,
/// accumulating the rotations into `vectors`.
fn joint_jacobi(mats: &mut [ComplexMatrix], vectors: &mut ComplexMatrix, max_sweeps: usize) -> Result<()> {
    let n = vectors.rows();
    let scale = mats.iter().map(|a| a.max_abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let threshold = 1e-15 * scale;
    let mut off = 0.0;
    for _ in 0..max_sweeps {
        off = off_diagonal(mats);
        if off <= threshold * n as f64 {
            return Ok(());
        }
        for p in 0..n {
            for q in p + 1..n {
                if mats.iter().all(|a| a[(p, q)].norm() <= threshold * 1e-3) {
                    continue;
                }
                let (c, s) = jacobi_angles(mats, p, q);
                if s.norm() < 1e-300 {
                    continue;
                }
                for a in mats.iter_mut() {
                    rotate(a, p, q, c, s);
                }
                rotate_columns(vectors, p, q, c, s);
            }
        }
    }
    let final_off = off_diagonal(mats);
    if final_off <= threshold * n as f64 * 1e3 {
        return Ok(());
    }
    Err(SynthError::NoConvergence { sweeps: max_sweeps, off: final_off.max(off) })
}

fn off_diagonal(mats: &[ComplexMatrix]) -> f64 {
    mats.iter().map(|a| a.max_off_diagonal()).fold(0.0, f64::max)
}

/// Rotation `R = [[c, -conj(s)], [s, c]]` on coordinates `(p, q)` minimizing the
/// summed squared off-diagonal of `R^dag A R` over all matrices.
fn jacobi_angles(mats: &[ComplexMatrix], p: usize, q: usize) -> (f64, Complex64) {
    let mut g = [[0.0f64; 3]; 3];
    for a in mats {
        let b = a[(p, q)];
        let h = [a[(p, p)].re - a[(q, q)].re, 2.0 * b.re, 2.0 * b.im];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += h[i] * h[j];
            }
        }
    }
    let [x, y, z] = top_eigenvector_sym3(g);
    let (x, y, z) = if x < 0.0 { (-x, -y, -z) } else { (x, y, z) };
    let c = ((x + 1.0) / 2.0).sqrt();
    let s = Complex64::new(y, -z) / (2.0 * c);
    (c, s)
}

/// `A <- R^dag A R` for the rotation of [`jacobi_angles`].
fn rotate(a: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: Complex64) {
    rotate_columns(a, p, q, c, s);
    let n = a.cols();
    let sc = s.conj();
    for j in 0..n {
        let ap = a[(p, j)];
        let aq = a[(q, j)];
        a[(p, j)] = ap * c + sc * aq;
        a[(q, j)] = -s * ap + aq * c;
    }
}

/// `A <- A R`.
fn rotate_columns(a: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: Complex64) {
    let sc = s.conj();
    for i in 0..a.rows() {
        let ap = a[(i, p)];
        let aq = a[(i, q)];
        a[(i, p)] = ap * c + aq * s;
        a[(i, q)] = -ap * sc + aq * c;
    }
}

/// Unit eigenvector of the largest eigenvalue of a real symmetric 3x3 matrix
/// (cyclic Jacobi).
fn top_eigenvector_sym3(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..50 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        let diag = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
        if off <= 1e-300 || off <= 1e-18 * diag {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for row in a.iter_mut() {
                let (akp, akq) = (row[p], row[q]);
                row[p] = c * akp - s * akq;
                row[q] = s * akp + c * akq;
            }
            let (rp, rq) = (a[p], a[q]);
            for k in 0..3 {
                a[p][k] = c * rp[k] - s * rq[k];
                a[q][k] = s * rp[k] + c * rq[k];
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let k = (0..3).max_by(|&i, &j| a[i][i].total_cmp(&a[j][j])).unwrap();
    [v[0][k], v[1][k], v[2][k]]
}

/// Modified Gram-Schmidt inside each cluster of eigenvalues closer than `tol`.
fn reorthonormalize_degenerate(values: &[Complex64], vectors: &mut ComplexMatrix, tol: f64) {
    let n = values.len();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let group: Vec<usize> = (i..n).filter(|&j| !assigned[j] && (values[j] - values[i]).norm() < tol).collect();
        for &j in &group {
            assigned[j] = true;
        }
        if group.len() < 2 {
            continue;
        }
        for (gi, &j) in group.iter().enumerate() {
            let mut v = vectors.column(j);
            for &k in &group[..gi] {
                let u = vectors.column(k);
                let proj = u.inner(&v);
                for r in 0..n {
                    v[r] -= proj * u[r];
                }
            }
            let norm = v.norm();
            let v: Vec<Complex64> = v.as_slice().iter().map(|z| z / norm).collect();
            vectors.set_column(j, &v);
        }
    }
}

/// Principal `d`-th root of a unitary: eigenphases in `(-pi, pi]` divided by `d`.
pub fn unitary_root(v: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    let eig = normal_eigendecomposition(v, EigenMode::Unitary)?;
    let roots: Vec<Complex64> = eig.values.iter().map(|z| Complex64::from_polar(1.0, principal_arg(*z) / d as f64)).collect();
    let n = v.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, root) in roots.iter().enumerate() {
        let u = eig.vector(k);
        for i in 0..n {
            let a = root * u[i];
            if a == ZERO {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += a * u[j].conj();
            }
        }
    }
    Ok(out)
}

/// Argument in `(-pi, pi]`.
pub fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}
