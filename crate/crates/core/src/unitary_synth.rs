//! Unitary and isometry synthesis.
//!
//! [`triangle`] reduces `U` to a diagonal with controlled Householder gates,
//! block column by block column, recursing into the diagonal blocks; the
//! output circuit emulates the diagonal and then undoes the reduction.
//! [`spectral_synthesize`] builds each eigenvector, applies a controlled
//! phase to `|0..0>` and unbuilds it.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::circuit::{
    apply_gate_to_matrix, gate_counts, to_digits, Circuit, ControlWord, Gate, Letter, Primitive,
};
use crate::error::{Result, SynthError};
use crate::linalg::{
    embed_lower, householder_to_e0, householder_triangularize, inc_matrix, normal_eigendecomposition, principal_arg,
    vector_norm, ComplexMatrix, EigenMode, StateVector, ONE,
};
use crate::state_synth::{club_householder, state_prep_circuit_with, ELIDE_TOL};

/// Tolerance for diagonal entries drifting off the unit circle.
pub const PHASE_DRIFT_TOL: f64 = 1e-9;

/// Eigenphases below this magnitude are treated as zero.
pub const ZERO_PHASE_TOL: f64 = 1e-10;

/// Diagonal phases below this magnitude are not emulated.
pub const ELIDE_PHASE_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct TriangleResult {
    /// Diagonal emulation followed by the inverse reduction.
    pub circuit: Circuit,
    /// Reduction gates in application order (`R`, with `R U` diagonal).
    pub reduction: Circuit,
    /// Diagonal of `R U`, renormalized to unit modulus.
    pub diagonal: Vec<Complex64>,
    /// Largest off-diagonal modulus of `R U` over the reduced columns.
    pub off_diagonal_residual: f64,
    /// Number of reduction gates by control count.
    pub histogram: BTreeMap<usize, usize>,
}

pub fn triangle(u: &ComplexMatrix, d: usize, n: usize) -> Result<Circuit> {
    Ok(triangle_detailed(u, d, n)?.circuit)
}

pub fn triangle_detailed(u: &ComplexMatrix, d: usize, n: usize) -> Result<TriangleResult> {
    check_register(u, d, n)?;
    u.ensure_unitary(1e-9)?;
    reduce_and_emulate(u.clone(), d, n, u.cols())
}

fn check_register(u: &ComplexMatrix, d: usize, n: usize) -> Result<()> {
    if d < 2 || n < 1 {
        return Err(SynthError::InvalidArgument(format!("need d >= 2 and n >= 1, got d = {d}, n = {n}")));
    }
    let dim = d.pow(n as u32);
    if u.rows() != dim {
        return Err(SynthError::DimensionMismatch { expected: dim, found: u.rows() });
    }
    Ok(())
}

fn reduce_and_emulate(work: ComplexMatrix, d: usize, n: usize, col_limit: usize) -> Result<TriangleResult> {
    let mut reducer = Reducer { d, n, work, col_limit, gates: Vec::new() };
    reducer.reduce(0, 0, &[])?;
    let work = reducer.work;
    let mut reduction = Circuit::new(d, n);
    reduction.gates = reducer.gates;
    reduction.note("triangle reduction");

    let mut off = 0.0f64;
    let mut diagonal = Vec::with_capacity(col_limit);
    for j in 0..col_limit {
        for i in 0..work.rows() {
            if i != j {
                off = off.max(work[(i, j)].norm());
            }
        }
        let z = work[(j, j)];
        if (z.norm() - 1.0).abs() > PHASE_DRIFT_TOL {
            return Err(SynthError::PhaseDrift { index: j, modulus: z.norm() });
        }
        diagonal.push(z / z.norm());
    }
    let mut phases: Vec<f64> = diagonal.iter().map(|z| z.arg()).collect();
    phases.resize(d.pow(n as u32), 0.0);

    let mut circuit = emulate_diagonal(&phases, d, n)?;
    circuit.extend(reduction.inverse());
    circuit.metadata = vec!["triangle".into()];
    let histogram = gate_counts(&reduction).per_arity;
    Ok(TriangleResult { circuit, reduction, diagonal, off_diagonal_residual: off, histogram })
}

struct Reducer {
    d: usize,
    n: usize,
    work: ComplexMatrix,
    col_limit: usize,
    gates: Vec<Gate>,
}

impl Reducer {
    fn push(&mut self, gate: Gate) -> Result<()> {
        if gate.elidable {
            return Ok(());
        }
        apply_gate_to_matrix(&gate, &mut self.work, self.d, self.n)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Triangularizes the diagonal block at `offset` spanning lines `s..n`.
    /// Gates carry `controls` on lines above `s`.
    fn reduce(&mut self, s: usize, offset: usize, controls: &[(usize, usize)]) -> Result<()> {
        let (d, n) = (self.d, self.n);
        if offset >= self.col_limit {
            return Ok(());
        }
        let local_n = n - s;
        if local_n == 1 {
            let cols = d.min(self.col_limit - offset);
            let block = self.work.submatrix(offset, offset, d, cols);
            let (reflections, _) = householder_triangularize(&block, cols);
            let v = reflections.iter().fold(ComplexMatrix::identity(d), |acc, h| h.matmul(&acc));
            let word = ControlWord::with_controls(n, s, controls, d)?;
            return self.push(Gate::new(word, v).mark_elidable(ELIDE_TOL));
        }
        let bs = d.pow(local_n as u32 - 1);
        self.reduce(s + 1, offset, controls)?;
        for m in 0..d - 1 {
            for cl in 0..bs {
                let col = offset + m * bs + cl;
                if col >= self.col_limit {
                    break;
                }
                let lower = to_digits(cl, d, local_n - 1);
                for l in m + 1..d {
                    let start = offset + l * bs;
                    let sub: Vec<Complex64> = (0..bs).map(|i| self.work[(start + i, col)]).collect();
                    if vector_norm(&sub) == 0.0 {
                        continue;
                    }
                    let (club, _) = club_householder(&StateVector::new(sub), &lower, d, local_n - 1)?;
                    let mut extra = controls.to_vec();
                    extra.push((s, l));
                    for g in club.gates.iter().filter(|g| !g.elidable) {
                        self.push(embed_gate(g, n, s + 1, &extra)?)?;
                    }
                }
                let fiber: Vec<Complex64> = (m..d).map(|k| self.work[(offset + k * bs + cl, col)]).collect();
                if vector_norm(&fiber) == 0.0 {
                    continue;
                }
                let v = embed_lower(&householder_to_e0(&fiber)?, d);
                let mut word_controls = controls.to_vec();
                word_controls.extend(lower.iter().enumerate().map(|(i, &c)| (s + 1 + i, c)));
                let word = ControlWord::with_controls(n, s, &word_controls, d)?;
                self.push(Gate::new(word, v).mark_elidable(ELIDE_TOL))?;
            }
            let mut next = controls.to_vec();
            next.push((s, m + 1));
            self.reduce(s + 1, offset + (m + 1) * bs, &next)?;
        }
        Ok(())
    }
}

/// Places a gate on `g.word.len()` lines starting at `first_line` of an
/// `n`-line register and adds `extra` controls.
fn embed_gate(g: &Gate, n: usize, first_line: usize, extra: &[(usize, usize)]) -> Result<Gate> {
    let d = g.d();
    let mut letters = vec![Letter::Any; n];
    for (i, l) in g.word.letters().iter().enumerate() {
        letters[first_line + i] = *l;
    }
    for &(pos, val) in extra {
        letters[pos] = Letter::Value(val);
    }
    let word = ControlWord::new(letters, d)?;
    Ok(Gate::new(word, g.v.clone()))
}

/// `sum_j e^{i phases[j]} |j><j|` as `(n-1)`-controlled phase gates targeting
/// the last qudit, one per index; zero phases are skipped.
pub fn emulate_diagonal(phases: &[f64], d: usize, n: usize) -> Result<Circuit> {
    let dim = d.pow(n as u32);
    if phases.len() != dim {
        return Err(SynthError::DimensionMismatch { expected: dim, found: phases.len() });
    }
    let mut c = Circuit::new(d, n);
    for (j, &phi) in phases.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, phi);
        if (phase - ONE).norm() < ELIDE_PHASE_TOL {
            continue;
        }
        let digits = to_digits(j, d, n);
        let controls: Vec<(usize, usize)> = digits[..n - 1].iter().copied().enumerate().collect();
        let mut diag = vec![ONE; d];
        diag[digits[n - 1]] = phase;
        let word = ControlWord::with_controls(n, n - 1, &controls, d)?;
        c.push(Gate::new(word, ComplexMatrix::from_diagonal(&diag)).with_primitive(Primitive::Phase));
    }
    c.note("diagonal emulation");
    Ok(c)
}

/// Product over eigenpairs with nonzero phase of `W_j^dag P_j W_j`, where
/// `W_j` collapses the eigenvector onto `|0..0>` and `P_j` applies the
/// eigenvalue to `|0..0>` with an `(n-1)`-controlled phase.
pub fn spectral_synthesize(u: &ComplexMatrix, d: usize, n: usize) -> Result<Circuit> {
    check_register(u, d, n)?;
    u.ensure_unitary(1e-9)?;
    let eig = normal_eigendecomposition(u, EigenMode::Unitary)?;
    let mut out = Circuit::new(d, n);
    for j in 0..eig.len() {
        let lambda = eig.values[j];
        if principal_arg(lambda).abs() < ZERO_PHASE_TOL {
            continue;
        }
        let vector = eig.vector(j);
        let w = match basis_index(&vector) {
            Some(idx) => inc_layer(&to_digits(idx, d, n), d, n),
            None => club_householder(&vector, &vec![0; n], d, n)?.0.elided(),
        };
        let mut diag = vec![ONE; d];
        diag[0] = lambda / lambda.norm();
        let controls: Vec<(usize, usize)> = (0..n - 1).map(|p| (p, 0)).collect();
        let word = ControlWord::with_controls(n, n - 1, &controls, d)?;
        let p = Gate::new(word, ComplexMatrix::from_diagonal(&diag)).with_primitive(Primitive::Phase);
        out.gates.extend(w.gates.iter().cloned());
        out.push(p);
        out.extend(w.inverse());
    }
    out.metadata = vec!["spectral".into()];
    Ok(out)
}

/// Index of the only nonzero amplitude, if the vector is a basis ket up to phase.
fn basis_index(v: &StateVector) -> Option<usize> {
    let mut found = None;
    for (i, z) in v.as_slice().iter().enumerate() {
        if z.norm() > ELIDE_TOL {
            if found.is_some() {
                return None;
            }
            found = Some(i);
        }
    }
    found
}

/// Local INC powers taking `|m>` to `|0..0>`.
fn inc_layer(m: &[usize], d: usize, n: usize) -> Circuit {
    let mut c = Circuit::new(d, n);
    for (line, &digit) in m.iter().enumerate() {
        if digit != 0 {
            let power = d - digit;
            c.push(Gate::local(n, line, inc_matrix(d, power)).with_primitive(Primitive::IncPower(power)));
        }
    }
    c
}

/// Circuit whose unitary agrees with the `d^n x l` isometry `a` on its first
/// `l` columns, up to one global phase. Operations that would only affect the
/// remaining columns are never generated.
pub fn synthesize_isometry(a: &ComplexMatrix, d: usize, n: usize) -> Result<Circuit> {
    check_register(a, d, n)?;
    let cols = a.cols();
    if cols == 0 || cols > a.rows() {
        return Err(SynthError::InvalidArgument(format!("isometry needs 1..={} columns, got {cols}", a.rows())));
    }
    let residual = a.adjoint().matmul(a).max_distance(&ComplexMatrix::identity(cols));
    if residual > 1e-9 {
        return Err(SynthError::NotIsometry { residual });
    }
    if cols == 1 {
        return state_prep_circuit_with(&a.column(0), d, n, true);
    }
    let mut circuit = reduce_and_emulate(a.clone(), d, n, cols)?.circuit;
    circuit.metadata = vec![format!("isometry with {cols} columns")];
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::circuit_unitary;
    use crate::random::{random_isometry, random_unitary, seeded_rng};

    fn phase_error(c: &Circuit, u: &ComplexMatrix) -> f64 {
        circuit_unitary(c).unwrap().distance_up_to_phase(u).0
    }

    #[test]
    fn triangle_diagonal_input_needs_no_householders() {
        let diag: Vec<Complex64> = (0..4).map(|j| Complex64::from_polar(1.0, 0.3 * j as f64)).collect();
        let u = ComplexMatrix::from_diagonal(&diag);
        let r = triangle_detailed(&u, 2, 2).unwrap();
        assert!(r.reduction.is_empty());
        assert_eq!(r.circuit.len(), 3);
        assert!(phase_error(&r.circuit, &u) < 1e-12);
    }

    #[test]
    fn triangle_single_qudit() {
        let mut rng = seeded_rng(1);
        let u = random_unitary(&mut rng, 3);
        let r = triangle_detailed(&u, 3, 1).unwrap();
        assert!(r.reduction.len() <= 1);
        assert!(r.circuit.gates.iter().all(|g| g.num_controls() == 0));
        assert!(phase_error(&r.circuit, &u) < 1e-10);
    }

    #[test]
    fn triangle_random_small() {
        let mut rng = seeded_rng(2);
        for (d, n) in [(2usize, 2usize), (2, 3), (3, 2), (4, 2), (2, 4)] {
            let u = random_unitary(&mut rng, d.pow(n as u32));
            let r = triangle_detailed(&u, d, n).unwrap();
            assert!(r.off_diagonal_residual < 1e-8, "d={d} n={n}");
            assert!(phase_error(&r.circuit, &u) < 1e-8, "d={d} n={n}");
        }
    }

    #[test]
    fn triangle_histogram_matches_recursion_counts() {
        let mut rng = seeded_rng(3);
        for (d, n) in [(2usize, 2usize), (2, 3), (3, 2), (3, 3), (2, 4)] {
            let u = random_unitary(&mut rng, d.pow(n as u32));
            let r = triangle_detailed(&u, d, n).unwrap();
            let model = crate::counts::count_model(d, n).unwrap();
            for k in 0..n {
                assert_eq!(r.histogram.get(&k).copied().unwrap_or(0) as u128, model.f(n, k), "d={d} n={n} k={k}");
            }
        }
    }

    #[test]
    fn emulation_examples() {
        assert!(emulate_diagonal(&[0.0; 9], 3, 2).unwrap().is_empty());
        let mut phases = vec![0.0; 9];
        phases[8] = 0.7;
        let c = emulate_diagonal(&phases, 3, 2).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.gates[0].word.format(3), "2T");
        let mut rng = seeded_rng(4);
        use rand::Rng;
        let phases: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c = emulate_diagonal(&phases, 2, 2).unwrap();
        let expected = ComplexMatrix::from_diagonal(&phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect::<Vec<_>>());
        assert!(circuit_unitary(&c).unwrap().max_distance(&expected) < 1e-12);
    }

    #[test]
    fn spectral_examples() {
        assert!(spectral_synthesize(&ComplexMatrix::identity(4), 2, 2).unwrap().is_empty());
        let diag: Vec<Complex64> = (0..9).map(|j| Complex64::from_polar(1.0, 0.2 * j as f64)).collect();
        let u = ComplexMatrix::from_diagonal(&diag);
        let c = spectral_synthesize(&u, 3, 2).unwrap();
        assert!(c.gates.iter().all(|g| g.num_controls() == 0 || g.primitive == Some(Primitive::Phase)));
        assert!(phase_error(&c, &u) < 1e-10);
        let mut rng = seeded_rng(5);
        let u = random_unitary(&mut rng, 9);
        assert!(phase_error(&spectral_synthesize(&u, 3, 2).unwrap(), &u) < 1e-7);
    }

    #[test]
    fn isometry_columns_match() {
        let mut rng = seeded_rng(6);
        for cols in [1, 2, 3, 8] {
            let a = random_isometry(&mut rng, 8, cols);
            let c = synthesize_isometry(&a, 2, 3).unwrap();
            let u = circuit_unitary(&c).unwrap();
            let got = u.submatrix(0, 0, 8, cols);
            assert!(got.distance_up_to_phase(&a).0 < 1e-7, "cols={cols}");
        }
    }

    #[test]
    fn full_isometry_agrees_with_triangle() {
        let mut rng = seeded_rng(7);
        let u = random_unitary(&mut rng, 9);
        let a = synthesize_isometry(&u, 3, 2).unwrap();
        let t = triangle(&u, 3, 2).unwrap();
        assert_eq!(a.len(), t.len());
        assert!(circuit_unitary(&a).unwrap().max_distance(&circuit_unitary(&t).unwrap()) < 1e-9);
    }

    #[test]
    fn non_isometry_is_rejected() {
        let a = ComplexMatrix::from_fn(4, 2, |_, _| ONE);
        assert!(matches!(synthesize_isometry(&a, 2, 2), Err(SynthError::NotIsometry { .. })));
    }
}
