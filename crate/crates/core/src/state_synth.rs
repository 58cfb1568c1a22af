//! State synthesis: a circuit `W` of `(d^n - 1)/(d - 1)` gates, each with at
//! most one control, such that `W |psi> = s |m>` with `|s| = |psi|`.

use num_complex::Complex64;

use crate::circuit::{apply_gate_in_place, from_digits, inc_conjugate_gate, to_digits, Circuit, Gate, Primitive};
use crate::club::{club_terms, control_word_for_term, ClubTerm};
use crate::error::{Result, SynthError};
use crate::linalg::{householder_to_e0, vector_norm, ComplexMatrix, StateVector, ONE};

/// Tolerance below which a step's reflection counts as the identity.
pub const ELIDE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default)]
pub struct ClubOptions {
    /// Keep a copy of the working state after every step.
    pub record_snapshots: bool,
    /// Append a phase gate so that `W |psi> = |psi| |m>` exactly.
    pub fix_phase: bool,
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub term: ClubTerm,
    /// Index of the step's gate in the output circuit.
    pub gate_index: usize,
    pub elidable: bool,
    /// Working state after the step, in the frame where the target is `|0..0>`.
    pub snapshot: Option<StateVector>,
}

#[derive(Clone, Debug)]
pub struct SynthesisTrace {
    pub steps: Vec<TraceStep>,
    pub target: Vec<usize>,
    /// `s / |s|` for the surviving amplitude (before any phase fix).
    pub residual_phase: Complex64,
    pub norm: f64,
}

/// One reflection for term `t`: target on the leftmost club, at most one
/// control, and `v` the Householder that collapses the fiber
/// `psi[t_1..t_{l-1} k 0..0]`, `k = 0..d-1`, onto `k = 0`.
pub fn single_club_householder(term: &ClubTerm, psi: &StateVector, d: usize, n: usize) -> Result<Gate> {
    let dim = d.pow(n as u32);
    if psi.dim() != dim {
        return Err(SynthError::DimensionMismatch { expected: dim, found: psi.dim() });
    }
    if term.n() != n {
        return Err(SynthError::InvalidTerm(format!("term {} has length {}, expected {n}", term.machine(), term.n())));
    }
    let word = control_word_for_term(term, d)?;
    let mut digits = term.prefix().to_vec();
    digits.push(0);
    digits.resize(n, 0);
    let target = term.prefix().len();
    let fiber: Vec<Complex64> = (0..d)
        .map(|k| {
            digits[target] = k;
            psi[from_digits(&digits, d)]
        })
        .collect();
    let v = if vector_norm(&fiber) == 0.0 { ComplexMatrix::identity(d) } else { householder_to_e0(&fiber)? };
    let mut gate = Gate::new(word, v).mark_elidable(ELIDE_TOL);
    if gate.num_controls() == 0 {
        gate = gate.with_primitive(Primitive::Local);
    }
    Ok(gate)
}

pub fn club_householder(psi: &StateVector, m: &[usize], d: usize, n: usize) -> Result<(Circuit, SynthesisTrace)> {
    club_householder_with(psi, m, d, n, ClubOptions::default())
}

/// Reduces `psi` onto `|m>`. The reduction is carried out on the shifted
/// state `phi[x] = psi[x + m]` (digitwise mod `d`), and every gate is then
/// conjugated by `⊗ INC^{m_k}`.
pub fn club_householder_with(
    psi: &StateVector,
    m: &[usize],
    d: usize,
    n: usize,
    opts: ClubOptions,
) -> Result<(Circuit, SynthesisTrace)> {
    let dim = d.pow(n as u32);
    if psi.dim() != dim {
        return Err(SynthError::DimensionMismatch { expected: dim, found: psi.dim() });
    }
    if m.len() != n || m.iter().any(|&v| v >= d) {
        return Err(SynthError::InvalidArgument(format!("target {m:?} is not an {n}-dit string for d = {d}")));
    }
    let norm = psi.norm();
    if norm == 0.0 {
        return Err(SynthError::ZeroVector);
    }
    let mut phi = StateVector::zeros(dim);
    for idx in 0..dim {
        let shifted: Vec<usize> = to_digits(idx, d, n).iter().zip(m).map(|(x, s)| (x + s) % d).collect();
        phi[idx] = psi[from_digits(&shifted, d)];
    }

    let mut circuit = Circuit::new(d, n);
    let mut steps = Vec::new();
    for term in club_terms(d, n) {
        let gate = single_club_householder(&term, &phi, d, n)?;
        apply_gate_in_place(&gate, phi.as_mut_slice(), d, n)?;
        steps.push(TraceStep {
            term,
            gate_index: circuit.len(),
            elidable: gate.elidable,
            snapshot: opts.record_snapshots.then(|| phi.clone()),
        });
        circuit.push(inc_conjugate_gate(&gate, m));
    }

    let s = phi[0];
    let residual_phase = if s.norm() == 0.0 { ONE } else { s / s.norm() };
    if opts.fix_phase {
        circuit.push(global_phase_gate(n, d, residual_phase.conj()));
    }
    circuit.note(format!("club householder onto {m:?}"));
    Ok((circuit, SynthesisTrace { steps, target: m.to_vec(), residual_phase, norm }))
}

/// Scalar phase on qudit 0.
pub fn global_phase_gate(n: usize, d: usize, phase: Complex64) -> Gate {
    Gate::local(n, 0, ComplexMatrix::identity(d).scale(phase)).with_primitive(Primitive::Phase)
}

/// Circuit taking `|0..0>` to `psi / |psi|` up to a global phase (exactly,
/// with `fix_phase`).
pub fn state_prep_circuit(psi: &StateVector, d: usize, n: usize) -> Result<Circuit> {
    state_prep_circuit_with(psi, d, n, false)
}

pub fn state_prep_circuit_with(psi: &StateVector, d: usize, n: usize, fix_phase: bool) -> Result<Circuit> {
    let opts = ClubOptions { fix_phase, ..Default::default() };
    let (w, _) = club_householder_with(psi, &vec![0; n], d, n, opts)?;
    let mut prep = w.inverse();
    prep.metadata = vec!["state preparation".into()];
    Ok(prep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{apply_circuit, circuit_unitary, gate_counts};
    use crate::club::{make_club_sequence, surviving_indices};
    use crate::linalg::inc_matrix;
    use crate::random::{random_state, seeded_rng};

    fn assert_collapsed(out: &StateVector, index: usize, norm: f64, tol: f64) {
        for (i, z) in out.as_slice().iter().enumerate() {
            if i == index {
                assert!((z.norm() - norm).abs() < tol, "surviving amplitude {z}");
            } else {
                assert!(z.norm() < tol, "amplitude {i} = {z}");
            }
        }
    }

    #[test]
    fn fig_one_control_word() {
        let d = 3;
        let n = 7;
        let term = ClubTerm::parse("2100ccc", d).unwrap();
        let mut rng = seeded_rng(1);
        let psi = random_state(&mut rng, d.pow(n as u32));
        let g = single_club_householder(&term, &psi, d, n).unwrap();
        assert_eq!(g.word.format(d), "*1**T**");
    }

    #[test]
    fn all_zero_prefix_gives_local_gate() {
        let mut rng = seeded_rng(2);
        let psi = random_state(&mut rng, 27);
        let g = single_club_householder(&ClubTerm::parse("00c", 3).unwrap(), &psi, 3, 3).unwrap();
        assert_eq!(g.num_controls(), 0);
        assert_eq!(g.primitive, Some(Primitive::Local));
    }

    #[test]
    fn single_step_zeroes_its_fiber() {
        let mut rng = seeded_rng(3);
        let psi = random_state(&mut rng, 9);
        let g = single_club_householder(&ClubTerm::parse("1c", 3).unwrap(), &psi, 3, 2).unwrap();
        let out = crate::circuit::apply_gate(&g, &psi, 3, 2).unwrap();
        assert!(out[4].norm() < 1e-12 && out[5].norm() < 1e-12);
        let before = (psi[3].norm_sqr() + psi[4].norm_sqr() + psi[5].norm_sqr()).sqrt();
        assert!((out[3].norm() - before).abs() < 1e-12);
    }

    #[test]
    fn term_without_club_is_rejected() {
        let term = ClubTerm::new(vec![0, 1], 2, 3).unwrap();
        assert!(single_club_householder(&term, &StateVector::basis(9, 0), 3, 2).is_err());
    }

    #[test]
    fn uniform_qubit_pair() {
        let psi = StateVector::new(vec![Complex64::new(0.5, 0.0); 4]);
        let (c, trace) = club_householder(&psi, &[0, 0], 2, 2).unwrap();
        assert_eq!(c.len(), 3);
        let out = apply_circuit(&c, &psi).unwrap();
        assert_collapsed(&out, 0, 1.0, 1e-12);
        assert!((trace.residual_phase.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_target_gives_identity_steps() {
        let psi = StateVector::basis(9, 0);
        let (c, trace) = club_householder(&psi, &[0, 0], 3, 2).unwrap();
        assert_eq!(c.len(), 4);
        assert!(trace.steps.iter().all(|s| s.elidable));
        assert_eq!(gate_counts(&c).total, 0);
    }

    #[test]
    fn collapse_onto_nonzero_target() {
        let mut rng = seeded_rng(4);
        let psi = random_state(&mut rng, 27);
        let m = [1, 2, 0];
        let (c, _) = club_householder(&psi, &m, 3, 3).unwrap();
        assert_eq!(c.len(), 13);
        let out = apply_circuit(&c, &psi).unwrap();
        assert_collapsed(&out, from_digits(&m, 3), 1.0, 1e-9);
        assert!(c.gates.iter().all(|g| g.num_controls() <= 1));
    }

    #[test]
    fn unnormalized_input_keeps_its_norm() {
        let mut rng = seeded_rng(5);
        let psi = StateVector::new(random_state(&mut rng, 8).as_slice().iter().map(|z| z * 3.0).collect());
        let (c, trace) = club_householder(&psi, &[0, 0, 0], 2, 3).unwrap();
        let out = apply_circuit(&c, &psi).unwrap();
        assert_collapsed(&out, 0, 3.0, 1e-9);
        assert!((trace.norm - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert!(matches!(club_householder(&StateVector::zeros(4), &[0, 0], 2, 2), Err(SynthError::ZeroVector)));
    }

    #[test]
    fn fix_phase_makes_amplitude_positive() {
        let mut rng = seeded_rng(6);
        let psi = random_state(&mut rng, 16);
        let opts = ClubOptions { fix_phase: true, ..Default::default() };
        let (c, _) = club_householder_with(&psi, &[0, 0, 0, 0], 2, 4, opts).unwrap();
        let out = apply_circuit(&c, &psi).unwrap();
        assert!((out[0] - ONE).norm() < 1e-9);
    }

    #[test]
    fn state_prep_examples() {
        let prep = state_prep_circuit(&StateVector::basis(8, 0), 2, 3).unwrap();
        let u = circuit_unitary(&prep).unwrap();
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-12);

        let s = 1.0 / 8f64.sqrt();
        let uniform = StateVector::new(vec![Complex64::new(s, 0.0); 8]);
        let prep = state_prep_circuit(&uniform, 2, 3).unwrap();
        assert_eq!(prep.len(), 7);
        let out = apply_circuit(&prep, &StateVector::basis(8, 0)).unwrap();
        assert!((out.inner(&uniform).norm() - 1.0).abs() < 1e-12);

        let mut rng = seeded_rng(7);
        let psi = random_state(&mut rng, 9);
        let prep = state_prep_circuit_with(&psi, 3, 2, true).unwrap();
        let out = apply_circuit(&prep, &StateVector::basis(9, 0)).unwrap();
        assert!(out.max_distance(&psi) < 1e-9);
    }

    #[test]
    fn zero_pattern_soundness_on_random_states() {
        for (d, n) in [(2, 3), (3, 2), (3, 3), (4, 2)] {
            let seq = make_club_sequence(d, n).unwrap();
            let mut rng = seeded_rng(100 + d as u64 * 10 + n as u64);
            let psi = random_state(&mut rng, d.pow(n as u32));
            let opts = ClubOptions { record_snapshots: true, ..Default::default() };
            let (_, trace) = club_householder_with(&psi, &vec![0; n], d, n, opts).unwrap();
            for (j, step) in trace.steps.iter().enumerate() {
                let alive = surviving_indices(&seq, j + 2).unwrap();
                let snap = step.snapshot.as_ref().unwrap();
                for (idx, z) in snap.as_slice().iter().enumerate() {
                    if !alive.contains(&idx) {
                        assert!(z.norm() < 1e-10, "d={d} n={n} step={} idx={idx}", j + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn nonzero_target_is_inc_conjugate_of_zero_target() {
        let (d, n) = (3, 2);
        let mut rng = seeded_rng(8);
        let psi = random_state(&mut rng, 9);
        let m = [2, 1];
        let (cm, _) = club_householder(&psi, &m, d, n).unwrap();
        let mut phi = StateVector::zeros(9);
        for idx in 0..9 {
            let x = to_digits(idx, d, n);
            phi[idx] = psi[from_digits(&[(x[0] + m[0]) % d, (x[1] + m[1]) % d], d)];
        }
        let (c0, _) = club_householder(&phi, &[0, 0], d, n).unwrap();
        let layer = inc_matrix(d, m[0]).kron(&inc_matrix(d, m[1]));
        let expected = layer.matmul(&circuit_unitary(&c0).unwrap()).matmul(&layer.adjoint());
        assert!(circuit_unitary(&cm).unwrap().max_distance(&expected) < 1e-9);
    }

    #[test]
    fn arity_histogram_matches_sequence() {
        let (d, n) = (3, 3);
        let mut rng = seeded_rng(9);
        let psi = random_state(&mut rng, 27);
        let (c, _) = club_householder(&psi, &[0, 0, 0], d, n).unwrap();
        let counts = gate_counts(&c);
        assert_eq!(counts.arity(0), 3);
        assert_eq!(counts.arity(1), 10);
    }
}
