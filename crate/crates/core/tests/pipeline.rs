use qudit_synth::circuit::{apply_circuit, circuit_unitary, gate_counts, GateLibrary};
use qudit_synth::counts::{table_report, Algorithm, CountSource, TableOptions};
use qudit_synth::io::{circuit_from_json, circuit_to_json};
use qudit_synth::linalg::{ComplexMatrix, StateVector};
use qudit_synth::lowering::{lower_circuit, LoweringOptions, TargetLevel};
use qudit_synth::random::{random_density, random_hermitian, random_isometry, random_state, random_unitary, seeded_rng};
use qudit_synth::state_synth::state_prep_circuit_with;
use qudit_synth::unitary_synth::{spectral_synthesize, synthesize_isometry, triangle};
use qudit_synth::verify::{expectation_value, subspace_expectation, verify_circuit, DensityMatrix, Synthesizer, VerifyOptions};

#[test]
fn state_prep_lowered_to_cinc_prepares_the_state() {
    let mut rng = seeded_rng(11);
    for (d, n) in [(2usize, 3usize), (3, 2), (3, 3)] {
        let dim = d.pow(n as u32);
        let psi = random_state(&mut rng, dim);
        let c = state_prep_circuit_with(&psi, d, n, true).unwrap();
        let (lowered, report) = lower_circuit(&c, TargetLevel::Cinc, &LoweringOptions::default()).unwrap();
        assert!(report.library_violations.is_empty());
        let out = apply_circuit(&lowered, &StateVector::basis(dim, 0)).unwrap();
        assert!(out.max_distance(&psi) < 1e-9, "d={d} n={n}");
    }
}

#[test]
fn lowered_unitary_verifies_against_library() {
    let mut rng = seeded_rng(12);
    let u = random_unitary(&mut rng, 9);
    for c in [triangle(&u, 3, 2).unwrap(), spectral_synthesize(&u, 3, 2).unwrap()] {
        let (lowered, _) = lower_circuit(&c, TargetLevel::CincOnly, &LoweringOptions::default()).unwrap();
        assert_eq!(gate_counts(&lowered).cinc_inv, 0);
        let opts = VerifyOptions { library: Some(GateLibrary::CincOnly), ..Default::default() };
        let r = verify_circuit(&lowered, &u, &opts).unwrap();
        assert!(r.passed, "{r:?}");
    }
}

#[test]
fn measured_counts_equal_the_model_on_small_registers() {
    let opts = TableOptions { measure_cap: 16, seed: 3 };
    let report = table_report(2..=4, 2..=4, &opts).unwrap();
    let mut measured = 0;
    for row in &report.rows {
        if row.source == CountSource::Measured {
            measured += 1;
            assert_eq!((row.cinc, row.cinc_inv), row.model, "{row:?}");
        }
    }
    assert_eq!(measured, 2 * 5);
    let cell = report.cells.iter().find(|c| (c.d, c.n) == (2, 2)).unwrap();
    assert_eq!(cell.best, (18, 18));
    let row = report.rows.iter().find(|r| (r.d, r.n, r.algo) == (2, 3, Algorithm::Spectral)).unwrap();
    assert_eq!(row.cinc, 192);
}

#[test]
fn table_csv_has_expected_columns() {
    let report = table_report([2], [2, 3], &TableOptions { measure_cap: 1, seed: 0 }).unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("d,n,algo,cinc,cinc_inv,paper_cinc,paper_cinc_inv,match"));
    assert!(csv.contains("2,2,triangle,18,18,18,18,true"));
    assert!(csv.contains("2,3,spectral,192,176,192,154,true"));
    assert!(csv.contains("2,3,triangle,196,154,192,154,true"));
}

#[test]
fn isometry_then_json_round_trip() {
    let mut rng = seeded_rng(13);
    let a = random_isometry(&mut rng, 9, 4);
    let c = synthesize_isometry(&a, 3, 2).unwrap();
    let back = circuit_from_json(&circuit_to_json(&c)).unwrap();
    let u = circuit_unitary(&back).unwrap();
    assert!(u.submatrix(0, 0, 9, 4).distance_up_to_phase(&a).0 < 1e-8);
}

#[test]
fn expectation_on_three_qutrits() {
    let mut rng = seeded_rng(14);
    let a = random_hermitian(&mut rng, 27);
    let rho = DensityMatrix::new(random_density(&mut rng, 27)).unwrap();
    let t = expectation_value(&a, &rho, 3, Synthesizer::Triangle).unwrap();
    let s = expectation_value(&a, &rho, 3, Synthesizer::Spectral).unwrap();
    assert!((t.value.0 - t.direct.0).abs() < 1e-8);
    assert!((t.value.0 - s.value.0).abs() < 1e-8);
    assert!(t.hermitian_part.populations.iter().all(|&p| p > -1e-12));
}

#[test]
fn subspace_matches_projector_trace() {
    let mut rng = seeded_rng(15);
    let a = random_hermitian(&mut rng, 8);
    let rho = DensityMatrix::new(random_density(&mut rng, 8)).unwrap();
    let r = subspace_expectation(&a, &rho, 2, 2).unwrap();
    let eig = qudit_synth::linalg::normal_eigendecomposition(&a, qudit_synth::linalg::EigenMode::Hermitian).unwrap();
    let mut pairs: Vec<_> = (0..8).map(|j| (eig.values[j].re, eig.vector(j))).collect();
    pairs.sort_by(|x, y| y.0.abs().total_cmp(&x.0.abs()).then(x.0.signum().total_cmp(&y.0.signum()).reverse()));
    let direct: f64 = pairs
        .iter()
        .take(2)
        .map(|(l, u)| {
            let ru = rho.matrix().apply(u.as_slice());
            l * u.inner(&StateVector::new(ru)).re
        })
        .sum();
    assert!((r.value.0 - direct).abs() < 1e-8);
}

#[test]
fn identity_has_trivial_circuits() {
    let id = ComplexMatrix::identity(8);
    assert!(spectral_synthesize(&id, 2, 3).unwrap().is_empty());
    assert!(triangle(&id, 2, 3).unwrap().is_empty());
}
