//! Circuit verification and the expectation-value pipeline.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::circuit::{
    apply_circuit_to_matrix, circuit_unitary_with_cap, library_violations, to_digits, Circuit, GateLibrary,
    DEFAULT_DIM_CAP,
};
use crate::error::{Result, SynthError};
use crate::linalg::{normal_eigendecomposition, ComplexMatrix, EigenMode, StateVector};
use crate::state_synth::club_householder;
use crate::unitary_synth::{spectral_synthesize, triangle};

/// Error tiers reported by [`verify_circuit`].
pub const TIERS: [f64; 3] = [1e-12, 1e-9, 1e-7];

/// A validated density matrix.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    rho: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(rho: ComplexMatrix) -> Result<Self> {
        if !rho.is_square() {
            return Err(SynthError::NotSquare { rows: rho.rows(), cols: rho.cols() });
        }
        let trace = rho.trace();
        if (trace - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(SynthError::InvalidDensity(format!("trace is {trace}")));
        }
        let herm = rho.hermiticity_residual();
        if herm > 1e-10 {
            return Err(SynthError::InvalidDensity(format!("not Hermitian, residual {herm:e}")));
        }
        let eig = normal_eigendecomposition(&rho, EigenMode::Hermitian)?;
        let min = eig.values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(SynthError::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { rho })
    }

    pub fn pure(psi: &StateVector) -> Result<Self> {
        let psi = psi.normalized()?;
        let v = psi.as_slice();
        Self::new(ComplexMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj()))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.rows()
    }

    /// `C rho C^dag` for the circuit's unitary `C`.
    pub fn conjugate_by(&self, c: &Circuit) -> Result<ComplexMatrix> {
        let mut m = self.rho.clone();
        apply_circuit_to_matrix(c, &mut m)?;
        let mut m = m.adjoint();
        apply_circuit_to_matrix(c, &mut m)?;
        Ok(m)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub up_to_phase: bool,
    pub tol: f64,
    pub cap: usize,
    /// Gate library the circuit is declared to be lowered into.
    pub library: Option<GateLibrary>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { up_to_phase: true, tol: 1e-7, cap: DEFAULT_DIM_CAP, library: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationResult {
    pub raw_error: f64,
    /// Error after dividing out the best global phase; never above `raw_error`.
    pub phase_adjusted_error: f64,
    /// Phase `p` with `circuit ~ p * target`.
    pub phase: (f64, f64),
    /// `(tolerance, passed)` for each entry of [`TIERS`].
    pub tiers: Vec<(f64, bool)>,
    pub library: Option<GateLibrary>,
    pub library_violations: Vec<usize>,
    pub tol: f64,
    pub passed: bool,
}

impl VerificationResult {
    /// The error the verdict is based on.
    pub fn error(&self, up_to_phase: bool) -> f64 {
        if up_to_phase {
            self.phase_adjusted_error
        } else {
            self.raw_error
        }
    }
}

pub fn verify_circuit(c: &Circuit, target: &ComplexMatrix, opts: &VerifyOptions) -> Result<VerificationResult> {
    let dim = c.dim();
    if target.rows() != dim || target.cols() != dim {
        return Err(SynthError::DimensionMismatch { expected: dim, found: target.rows().max(target.cols()) });
    }
    let u = circuit_unitary_with_cap(c, opts.cap)?;
    let raw = u.max_distance(target);
    let (adjusted, phase) = u.distance_up_to_phase(target);
    let adjusted = adjusted.min(raw);
    let err = if opts.up_to_phase { adjusted } else { raw };
    let violations = opts.library.map(|lib| library_violations(c, lib)).unwrap_or_default();
    Ok(VerificationResult {
        raw_error: raw,
        phase_adjusted_error: adjusted,
        phase: (phase.re, phase.im),
        tiers: TIERS.iter().map(|&t| (t, err < t)).collect(),
        library: opts.library,
        passed: err < opts.tol && violations.is_empty(),
        library_violations: violations,
        tol: opts.tol,
    })
}

/// Which synthesizer builds the diagonalizing circuit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Synthesizer {
    #[default]
    Triangle,
    Spectral,
}

impl Synthesizer {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "triangle" => Ok(Self::Triangle),
            "spectral" => Ok(Self::Spectral),
            other => Err(SynthError::InvalidArgument(format!("unknown synthesizer {other:?}"))),
        }
    }

    pub fn synthesize(self, u: &ComplexMatrix, d: usize, n: usize) -> Result<Circuit> {
        match self {
            Self::Triangle => triangle(u, d, n),
            Self::Spectral => spectral_synthesize(u, d, n),
        }
    }
}

/// Measurement of one Hermitian operator in its eigenbasis.
#[derive(Clone, Debug, Serialize)]
pub struct HermitianMeasurement {
    pub eigenvalues: Vec<f64>,
    /// Populations `<j| C rho C^dag |j>` after the diagonalizing circuit.
    pub populations: Vec<f64>,
    pub gates: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Expectation {
    pub value: (f64, f64),
    /// Measurement of `A` itself, or of `(A + A^dag)/2` for non-Hermitian `A`.
    pub hermitian_part: HermitianMeasurement,
    /// Measurement of `(A - A^dag)/(2i)` for non-Hermitian `A`.
    pub anti_hermitian_part: Option<HermitianMeasurement>,
    /// `Tr[A rho]` computed directly.
    pub direct: (f64, f64),
}

fn register_shape(dim: usize, d: usize) -> Result<usize> {
    let mut n = 0;
    let mut size = 1;
    while size < dim {
        size *= d;
        n += 1;
    }
    if size != dim || n == 0 {
        return Err(SynthError::InvalidArgument(format!("dimension {dim} is not a power of {d}")));
    }
    Ok(n)
}

fn measure_hermitian(h: &ComplexMatrix, rho: &DensityMatrix, d: usize, synth: Synthesizer) -> Result<HermitianMeasurement> {
    let n = register_shape(h.rows(), d)?;
    let eig = normal_eigendecomposition(h, EigenMode::Hermitian)?;
    let c = synth.synthesize(&eig.vectors.adjoint(), d, n)?;
    let rotated = rho.conjugate_by(&c)?;
    let populations: Vec<f64> = rotated.diagonal().iter().map(|z| z.re).collect();
    let eigenvalues: Vec<f64> = eig.values.iter().map(|z| z.re).collect();
    let value = eigenvalues.iter().zip(&populations).map(|(l, p)| l * p).sum();
    Ok(HermitianMeasurement { eigenvalues, populations, gates: c.len(), value })
}

/// `Tr[A rho]` via diagonalizing circuits; `A` is split into Hermitian and
/// anti-Hermitian parts when it is not Hermitian.
pub fn expectation_value(a: &ComplexMatrix, rho: &DensityMatrix, d: usize, synth: Synthesizer) -> Result<Expectation> {
    if !a.is_square() {
        return Err(SynthError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if a.rows() != rho.dim() {
        return Err(SynthError::DimensionMismatch { expected: rho.dim(), found: a.rows() });
    }
    let direct = a.matmul(rho.matrix()).trace();
    let half = Complex64::new(0.5, 0.0);
    let (hermitian_part, anti) = if a.hermiticity_residual() < 1e-10 {
        (measure_hermitian(&a.add(&a.adjoint()).scale(half), rho, d, synth)?, None)
    } else {
        let ah = a.add(&a.adjoint()).scale(half);
        let aa = a.sub(&a.adjoint()).scale(Complex64::new(0.0, -0.5));
        (measure_hermitian(&ah, rho, d, synth)?, Some(measure_hermitian(&aa, rho, d, synth)?))
    };
    let im = anti.as_ref().map_or(0.0, |m| m.value);
    Ok(Expectation {
        value: (hermitian_part.value, im),
        hermitian_part,
        anti_hermitian_part: anti,
        direct: (direct.re, direct.im),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SubspaceExpectation {
    pub value: (f64, f64),
    /// Eigenvalues in the selected order, as `(re, im)`.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Population of `|j>` after `W(u_j)`, for `j < k`.
    pub populations: Vec<f64>,
}

/// Eigenpairs of a normal `A` sorted by descending modulus, then by phase.
fn ordered_eigenpairs(a: &ComplexMatrix) -> Result<Vec<(Complex64, StateVector)>> {
    let eig = normal_eigendecomposition(a, EigenMode::Normal)?;
    let mut pairs: Vec<(Complex64, StateVector)> = (0..eig.len()).map(|j| (eig.values[j], eig.vector(j))).collect();
    pairs.sort_by(|x, y| y.0.norm().total_cmp(&x.0.norm()).then(x.0.arg().total_cmp(&y.0.arg())));
    Ok(pairs)
}

/// `Tr[P A P rho]` for `P` the projector onto the first `k` eigenvectors of
/// the normal operator `A`, using one ♣-Householder circuit per eigenvector.
pub fn subspace_expectation(a: &ComplexMatrix, rho: &DensityMatrix, k: usize, d: usize) -> Result<SubspaceExpectation> {
    if !a.is_square() {
        return Err(SynthError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if a.rows() != rho.dim() {
        return Err(SynthError::DimensionMismatch { expected: rho.dim(), found: a.rows() });
    }
    if k > a.rows() {
        return Err(SynthError::InvalidArgument(format!("k = {k} exceeds dimension {}", a.rows())));
    }
    let n = register_shape(a.rows(), d)?;
    let pairs = ordered_eigenpairs(a)?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut populations = Vec::with_capacity(k);
    for (j, (lambda, u)) in pairs.iter().take(k).enumerate() {
        let (w, _) = club_householder(u, &to_digits(j, d, n), d, n)?;
        let rotated = rho.conjugate_by(&w.elided())?;
        let p = rotated[(j, j)].re;
        populations.push(p);
        value += lambda * p;
    }
    Ok(SubspaceExpectation {
        value: (value.re, value.im),
        eigenvalues: pairs.iter().take(k).map(|(l, _)| (l.re, l.im)).collect(),
        populations,
    })
}

/// Multinomial outcome counts for `shots` measurements of `populations`.
pub fn sample_counts<R: Rng>(rng: &mut R, populations: &[f64], shots: u64) -> Result<Vec<u64>> {
    let weights: Vec<f64> = populations.iter().map(|p| p.max(0.0)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| SynthError::InvalidArgument(e.to_string()))?;
    let mut counts = vec![0u64; populations.len()];
    for _ in 0..shots {
        counts[dist.sample(rng)] += 1;
    }
    Ok(counts)
}

/// `sum_j lambda_j counts_j / shots`.
pub fn sampled_value(eigenvalues: &[f64], counts: &[u64]) -> f64 {
    let shots: u64 = counts.iter().sum();
    if shots == 0 {
        return 0.0;
    }
    eigenvalues.iter().zip(counts).map(|(l, &c)| l * c as f64).sum::<f64>() / shots as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::random::{random_density, random_hermitian, random_state, random_unitary, seeded_rng};

    #[test]
    fn identity_circuit_verifies() {
        let c = Circuit::new(3, 2);
        let r = verify_circuit(&c, &ComplexMatrix::identity(9), &VerifyOptions::default()).unwrap();
        assert_eq!(r.raw_error, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn global_phase_is_divided_out() {
        let mut rng = seeded_rng(1);
        let u = random_unitary(&mut rng, 3);
        let mut c = Circuit::new(3, 1);
        c.push(Gate::local(1, 0, u.clone()));
        let target = u.scale(Complex64::from_polar(1.0, std::f64::consts::PI / 5.0));
        let r = verify_circuit(&c, &target, &VerifyOptions::default()).unwrap();
        assert!(r.raw_error > 0.1);
        assert!(r.phase_adjusted_error < 1e-12);
        let strict = VerifyOptions { up_to_phase: false, ..Default::default() };
        assert!(!verify_circuit(&c, &target, &strict).unwrap().passed);
    }

    #[test]
    fn cap_is_enforced() {
        let c = Circuit::new(2, 3);
        let opts = VerifyOptions { cap: 4, ..Default::default() };
        assert!(matches!(verify_circuit(&c, &ComplexMatrix::identity(8), &opts), Err(SynthError::CapExceeded { .. })));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
        let bad = ComplexMatrix::from_diagonal(&[Complex64::new(1.5, 0.0), Complex64::new(-0.5, 0.0)]);
        assert!(DensityMatrix::new(bad).is_err());
        let mut rng = seeded_rng(2);
        assert!(DensityMatrix::new(random_density(&mut rng, 4)).is_ok());
        assert!(DensityMatrix::pure(&random_state(&mut rng, 4)).is_ok());
    }

    #[test]
    fn diagonal_expectation() {
        let a = ComplexMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0].map(|x| Complex64::new(x, 0.0)));
        let rho = ComplexMatrix::from_diagonal(&[0.1, 0.2, 0.3, 0.4].map(|x| Complex64::new(x, 0.0)));
        let e = expectation_value(&a, &DensityMatrix::new(rho).unwrap(), 2, Synthesizer::Triangle).unwrap();
        assert!((e.value.0 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_expectation_both_synthesizers() {
        let mut rng = seeded_rng(3);
        let a = random_hermitian(&mut rng, 9);
        let rho = DensityMatrix::new(random_density(&mut rng, 9)).unwrap();
        for s in [Synthesizer::Triangle, Synthesizer::Spectral] {
            let e = expectation_value(&a, &rho, 3, s).unwrap();
            assert!((e.value.0 - e.direct.0).abs() < 1e-8);
            let total: f64 = e.hermitian_part.populations.iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn non_hermitian_split() {
        let mut rng = seeded_rng(4);
        let a = crate::random::gaussian_matrix(&mut rng, 4, 4);
        let rho = DensityMatrix::new(random_density(&mut rng, 4)).unwrap();
        let e = expectation_value(&a, &rho, 2, Synthesizer::Triangle).unwrap();
        assert!(e.anti_hermitian_part.is_some());
        assert!((e.value.0 - e.direct.0).abs() < 1e-8 && (e.value.1 - e.direct.1).abs() < 1e-8);
    }

    #[test]
    fn subspace_limits() {
        let mut rng = seeded_rng(5);
        let a = random_hermitian(&mut rng, 8);
        let rho = DensityMatrix::new(random_density(&mut rng, 8)).unwrap();
        assert_eq!(subspace_expectation(&a, &rho, 0, 2).unwrap().value, (0.0, 0.0));
        let full = subspace_expectation(&a, &rho, 8, 2).unwrap();
        let e = expectation_value(&a, &rho, 2, Synthesizer::Triangle).unwrap();
        assert!((full.value.0 - e.direct.0).abs() < 1e-8);
        let mags: Vec<f64> = full.eigenvalues.iter().map(|&(re, im)| Complex64::new(re, im).norm()).collect();
        assert!(mags.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn sampling_counts_sum_to_shots() {
        let mut rng = seeded_rng(6);
        let counts = sample_counts(&mut rng, &[0.25, 0.75, 0.0], 1000).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 1000);
        assert_eq!(counts[2], 0);
        assert!((sampled_value(&[0.0, 1.0, 5.0], &counts) - 0.75).abs() < 0.1);
    }
}
