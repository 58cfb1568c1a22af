//! JSON formats for matrices, vectors and circuits.
//!
//! Matrices are `{"rows", "cols", "re", "im"}` with row-major entries,
//! vectors are `{"dim", "re", "im"}` and circuits are
//! `{"d", "n", "gates": [{"word", "v", "level", "primitive"?, "elidable"?}], "metadata"?}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, ControlWord, Gate, Level, Primitive};
use crate::error::{Result, SynthError};
use crate::linalg::{ComplexMatrix, StateVector};

/// Version of the file formats, printed by `--version`.
pub const FORMAT_VERSION: &str = "1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateJson {
    pub word: String,
    pub v: MatrixJson,
    pub level: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub elidable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircuitJson {
    pub d: usize,
    pub n: usize,
    pub gates: Vec<GateJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metadata: Vec<String>,
}

fn parse_err(e: serde_json::Error) -> SynthError {
    SynthError::Parse(e.to_string())
}

fn split(values: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (values.iter().map(|z| z.re).collect(), values.iter().map(|z| z.im).collect())
}

fn join(re: &[f64], im: &[f64], len: usize) -> Result<Vec<Complex64>> {
    if re.len() != len || im.len() != len {
        return Err(SynthError::Parse(format!("expected {len} entries, got re {} and im {}", re.len(), im.len())));
    }
    Ok(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        let (re, im) = split(m.as_slice());
        Self { rows: m.rows(), cols: m.cols(), re, im }
    }
}

impl TryFrom<&MatrixJson> for ComplexMatrix {
    type Error = SynthError;

    fn try_from(j: &MatrixJson) -> Result<Self> {
        ComplexMatrix::from_row_major(j.rows, j.cols, join(&j.re, &j.im, j.rows * j.cols)?)
    }
}

impl From<&StateVector> for VectorJson {
    fn from(v: &StateVector) -> Self {
        let (re, im) = split(v.as_slice());
        Self { dim: v.dim(), re, im }
    }
}

impl TryFrom<&VectorJson> for StateVector {
    type Error = SynthError;

    fn try_from(j: &VectorJson) -> Result<Self> {
        Ok(StateVector::new(join(&j.re, &j.im, j.dim)?))
    }
}

impl From<&Circuit> for CircuitJson {
    fn from(c: &Circuit) -> Self {
        let gates = c
            .gates
            .iter()
            .map(|g| GateJson {
                word: g.word.format(c.d),
                v: MatrixJson::from(&g.v),
                level: g.level.as_str().to_string(),
                primitive: g.primitive.map(|p| p.to_string()),
                elidable: g.elidable,
            })
            .collect();
        Self { d: c.d, n: c.n, gates, metadata: c.metadata.clone() }
    }
}

impl TryFrom<&CircuitJson> for Circuit {
    type Error = SynthError;

    fn try_from(j: &CircuitJson) -> Result<Self> {
        let mut c = Circuit::new(j.d, j.n);
        for g in &j.gates {
            let word = ControlWord::parse(&g.word, j.d)?;
            let v = ComplexMatrix::try_from(&g.v)?;
            let mut gate = Gate::new(word, v).with_level(Level::parse(&g.level)?);
            if let Some(p) = &g.primitive {
                gate = gate.with_primitive(Primitive::parse(p)?);
            }
            gate.elidable = g.elidable;
            c.push(gate);
        }
        c.metadata = j.metadata.clone();
        c.validate()?;
        Ok(c)
    }
}

pub fn matrix_to_json(m: &ComplexMatrix) -> String {
    serde_json::to_string_pretty(&MatrixJson::from(m)).expect("matrix serializes")
}

pub fn matrix_from_json(s: &str) -> Result<ComplexMatrix> {
    ComplexMatrix::try_from(&serde_json::from_str::<MatrixJson>(s).map_err(parse_err)?)
}

pub fn vector_to_json(v: &StateVector) -> String {
    serde_json::to_string_pretty(&VectorJson::from(v)).expect("vector serializes")
}

pub fn vector_from_json(s: &str) -> Result<StateVector> {
    StateVector::try_from(&serde_json::from_str::<VectorJson>(s).map_err(parse_err)?)
}

pub fn circuit_to_json(c: &Circuit) -> String {
    serde_json::to_string_pretty(&CircuitJson::from(c)).expect("circuit serializes")
}

pub fn circuit_from_json(s: &str) -> Result<Circuit> {
    Circuit::try_from(&serde_json::from_str::<CircuitJson>(s).map_err(parse_err)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_state, random_unitary, seeded_rng};
    use crate::state_synth::state_prep_circuit;

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let mut rng = seeded_rng(1);
        let u = random_unitary(&mut rng, 4);
        let back = matrix_from_json(&matrix_to_json(&u)).unwrap();
        assert_eq!(back.as_slice(), u.as_slice());
    }

    #[test]
    fn vector_round_trip() {
        let mut rng = seeded_rng(2);
        let v = random_state(&mut rng, 9);
        assert_eq!(vector_from_json(&vector_to_json(&v)).unwrap().as_slice(), v.as_slice());
    }

    #[test]
    fn circuit_round_trip() {
        let mut rng = seeded_rng(3);
        let psi = random_state(&mut rng, 9);
        let c = state_prep_circuit(&psi, 3, 2).unwrap();
        let back = circuit_from_json(&circuit_to_json(&c)).unwrap();
        assert_eq!(back.len(), c.len());
        for (a, b) in back.gates.iter().zip(&c.gates) {
            assert_eq!(a.word, b.word);
            assert_eq!(a.v.as_slice(), b.v.as_slice());
            assert_eq!(a.level, b.level);
            assert_eq!(a.primitive, b.primitive);
        }
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matrix_from_json(r#"{"rows":2,"cols":2,"re":[1,0,0],"im":[0,0,0,0]}"#).is_err());
        assert!(matrix_from_json("not json").is_err());
        let bad_word = r#"{"d":2,"n":2,"gates":[{"word":"TT","v":{"rows":2,"cols":2,"re":[1,0,0,1],"im":[0,0,0,0]},"level":"controlled"}]}"#;
        assert!(circuit_from_json(bad_word).is_err());
    }
}
