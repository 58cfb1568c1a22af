//! Gate intermediate representation.
//!
//! A [`Gate`] is a controlled one-qudit operator addressed by a [`ControlWord`]:
//! one letter per qudit, each a control value, `*` (don't care) or `T` (the
//! target). Qudit 0 is the most significant digit of a basis index, and a
//! circuit's gates are applied to kets in list order, so the circuit unitary
//! is the product of gate matrices in reverse list order.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Result, SynthError};
use crate::linalg::{inc_matrix, ComplexMatrix, StateVector, ZERO};

/// Default limit on `d^n` for dense simulation.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Unitarity tolerance for gate matrices.
pub const GATE_UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    Value(usize),
    Any,
    Target,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ControlWord {
    letters: Vec<Letter>,
}

impl ControlWord {
    pub fn new(letters: Vec<Letter>, d: usize) -> Result<Self> {
        let targets = letters.iter().filter(|l| **l == Letter::Target).count();
        if targets != 1 {
            return Err(SynthError::InvalidWord(format!("expected exactly one target letter, found {targets}")));
        }
        if let Some(Letter::Value(v)) = letters.iter().find(|l| matches!(l, Letter::Value(v) if *v >= d)) {
            return Err(SynthError::InvalidWord(format!("control value {v} out of range for d = {d}")));
        }
        Ok(ControlWord { letters })
    }

    /// Word with the given target and `(position, value)` controls.
    pub fn with_controls(n: usize, target: usize, controls: &[(usize, usize)], d: usize) -> Result<Self> {
        if target >= n {
            return Err(SynthError::InvalidWord(format!("target {target} out of range for n = {n}")));
        }
        let mut letters = vec![Letter::Any; n];
        letters[target] = Letter::Target;
        for &(pos, val) in controls {
            if pos >= n || pos == target {
                return Err(SynthError::InvalidWord(format!("bad control position {pos}")));
            }
            letters[pos] = Letter::Value(val);
        }
        Self::new(letters, d)
    }

    pub fn uncontrolled(n: usize, target: usize) -> Self {
        let mut letters = vec![Letter::Any; n];
        letters[target] = Letter::Target;
        ControlWord { letters }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn target(&self) -> usize {
        self.letters.iter().position(|l| *l == Letter::Target).expect("word has a target")
    }

    /// `(position, value)` for every numeric letter.
    pub fn controls(&self) -> Vec<(usize, usize)> {
        self.letters
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Letter::Value(v) => Some((i, *v)),
                _ => None,
            })
            .collect()
    }

    /// Number of numeric letters.
    pub fn num_controls(&self) -> usize {
        self.letters.iter().filter(|l| matches!(l, Letter::Value(_))).count()
    }

    /// Whether the word matches the digit string (the target digit is ignored).
    pub fn matches(&self, digits: &[usize]) -> bool {
        self.letters.iter().zip(digits).all(|(l, c)| match l {
            Letter::Value(v) => v == c,
            _ => true,
        })
    }

    /// Positions the gate acts on: controls and target.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, l)| **l != Letter::Any)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn format(&self, d: usize) -> String {
        let parts = self.letters.iter().map(|l| match l {
            Letter::Value(v) => v.to_string(),
            Letter::Any => "*".to_string(),
            Letter::Target => "T".to_string(),
        });
        if d > 10 {
            parts.collect::<Vec<_>>().join(" ")
        } else {
            parts.collect()
        }
    }

    /// Parses `"*1T"`, or space-separated letters (required when `d > 10`).
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        let tokens: Vec<String> = if s.contains(' ') || d > 10 {
            s.split_whitespace().map(str::to_string).collect()
        } else {
            s.chars().map(|c| c.to_string()).collect()
        };
        let letters = tokens
            .iter()
            .map(|t| match t.as_str() {
                "*" => Ok(Letter::Any),
                "T" => Ok(Letter::Target),
                _ => t
                    .parse::<usize>()
                    .map(Letter::Value)
                    .map_err(|_| SynthError::InvalidWord(format!("bad letter {t:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters, d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    /// Arbitrary number of controls.
    Controlled,
    /// At most one control.
    TwoQudit,
    /// Local gates, CINC and CINC^-1 only.
    CincLowered,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Controlled => "controlled",
            Level::TwoQudit => "two-qudit",
            Level::CincLowered => "cinc-lowered",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "controlled" => Ok(Level::Controlled),
            "two-qudit" => Ok(Level::TwoQudit),
            "cinc-lowered" => Ok(Level::CincLowered),
            _ => Err(SynthError::Parse(format!("unknown level {s:?}"))),
        }
    }
}

/// Tags for recognized special gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Cinc,
    CincInv,
    IncPower(usize),
    Flip(usize, usize),
    Local,
    Phase,
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Cinc => write!(f, "CINC"),
            Primitive::CincInv => write!(f, "CINC_INV"),
            Primitive::IncPower(k) => write!(f, "INC_POWER({k})"),
            Primitive::Flip(j, k) => write!(f, "FLIP({j},{k})"),
            Primitive::Local => write!(f, "LOCAL"),
            Primitive::Phase => write!(f, "PHASE"),
        }
    }
}

impl Primitive {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || SynthError::Parse(format!("unknown primitive {s:?}"));
        let args = |inner: &str| -> Result<Vec<usize>> {
            inner.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| bad())).collect()
        };
        match s {
            "CINC" => Ok(Primitive::Cinc),
            "CINC_INV" => Ok(Primitive::CincInv),
            "LOCAL" => Ok(Primitive::Local),
            "PHASE" => Ok(Primitive::Phase),
            _ => {
                if let Some(inner) = s.strip_prefix("INC_POWER(").and_then(|r| r.strip_suffix(')')) {
                    match args(inner)?.as_slice() {
                        [k] => Ok(Primitive::IncPower(*k)),
                        _ => Err(bad()),
                    }
                } else if let Some(inner) = s.strip_prefix("FLIP(").and_then(|r| r.strip_suffix(')')) {
                    match args(inner)?.as_slice() {
                        [j, k] => Ok(Primitive::Flip(*j, *k)),
                        _ => Err(bad()),
                    }
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// Controlled one-qudit gate `∧(C, V)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub word: ControlWord,
    pub v: ComplexMatrix,
    pub level: Level,
    pub primitive: Option<Primitive>,
    /// Set when `v` is the identity; such gates are skipped by counting and lowering.
    pub elidable: bool,
}

impl Gate {
    pub fn new(word: ControlWord, v: ComplexMatrix) -> Self {
        let level = if word.num_controls() <= 1 { Level::TwoQudit } else { Level::Controlled };
        Gate { word, v, level, primitive: None, elidable: false }
    }

    pub fn with_level(mut self, level: Level) -> Self {
        self.level = level;
        self
    }

    pub fn with_primitive(mut self, primitive: Primitive) -> Self {
        self.primitive = Some(primitive);
        self
    }

    pub fn local(n: usize, target: usize, v: ComplexMatrix) -> Self {
        Gate::new(ControlWord::uncontrolled(n, target), v)
            .with_level(Level::CincLowered)
            .with_primitive(Primitive::Local)
    }

    /// CINC with the control firing on `d - 1`.
    pub fn cinc(n: usize, control: usize, target: usize, d: usize) -> Self {
        let word = ControlWord::with_controls(n, target, &[(control, d - 1)], d).expect("valid cinc word");
        Gate::new(word, inc_matrix(d, 1)).with_level(Level::CincLowered).with_primitive(Primitive::Cinc)
    }

    pub fn cinc_inv(n: usize, control: usize, target: usize, d: usize) -> Self {
        let word = ControlWord::with_controls(n, target, &[(control, d - 1)], d).expect("valid cinc word");
        Gate::new(word, inc_matrix(d, d - 1))
            .with_level(Level::CincLowered)
            .with_primitive(Primitive::CincInv)
    }

    pub fn d(&self) -> usize {
        self.v.rows()
    }

    pub fn target(&self) -> usize {
        self.word.target()
    }

    pub fn num_controls(&self) -> usize {
        self.word.num_controls()
    }

    /// Inverse gate: same word, `v^dag`, tag mapped accordingly.
    pub fn adjoint(&self) -> Self {
        let d = self.d();
        let primitive = self.primitive.map(|p| match p {
            Primitive::Cinc => Primitive::CincInv,
            Primitive::CincInv => Primitive::Cinc,
            Primitive::IncPower(k) => Primitive::IncPower((d - k % d) % d),
            other => other,
        });
        Gate { word: self.word.clone(), v: self.v.adjoint(), level: self.level, primitive, elidable: self.elidable }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.v.max_distance(&ComplexMatrix::identity(self.d())) < tol
    }

    /// Marks the gate elidable when `v` is the identity within `tol`.
    pub fn mark_elidable(mut self, tol: f64) -> Self {
        self.elidable = self.is_identity(tol);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub d: usize,
    pub n: usize,
    pub gates: Vec<Gate>,
    pub metadata: Vec<String>,
}

impl Circuit {
    pub fn new(d: usize, n: usize) -> Self {
        assert!(d >= 2 && n >= 1, "need d >= 2 and n >= 1");
        Circuit { d, n, gates: Vec::new(), metadata: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) {
        debug_assert_eq!(gate.word.len(), self.n);
        debug_assert_eq!(gate.d(), self.d);
        self.gates.push(gate);
    }

    pub fn extend(&mut self, other: Circuit) {
        debug_assert_eq!((self.d, self.n), (other.d, other.n));
        self.gates.extend(other.gates);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.metadata.push(text.into());
    }

    /// Circuit for the inverse operator.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            d: self.d,
            n: self.n,
            gates: self.gates.iter().rev().map(Gate::adjoint).collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Drops gates flagged elidable.
    pub fn elided(&self) -> Circuit {
        Circuit {
            d: self.d,
            n: self.n,
            gates: self.gates.iter().filter(|g| !g.elidable).cloned().collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Checks word lengths, matrix sizes and unitarity of every gate.
    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            if g.word.len() != self.n {
                return Err(SynthError::DimensionMismatch { expected: self.n, found: g.word.len() });
            }
            if g.v.rows() != self.d || g.v.cols() != self.d {
                return Err(SynthError::DimensionMismatch { expected: self.d, found: g.v.rows() });
            }
            if g.word.controls().iter().any(|&(_, v)| v >= self.d) {
                return Err(SynthError::InvalidWord(g.word.format(self.d)));
            }
            g.v.ensure_unitary(GATE_UNITARY_TOL)?;
        }
        Ok(())
    }
}

/// Digits of `index` in base `d`, most significant first.
pub fn to_digits(mut index: usize, d: usize, n: usize) -> Vec<usize> {
    let mut digits = vec![0; n];
    for slot in digits.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    digits
}

pub fn from_digits(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &c| acc * d + c)
}

/// Base indices (target digit 0) of the fibers a gate acts on, and the stride
/// between consecutive fiber elements.
fn fiber_bases(word: &ControlWord, d: usize, n: usize) -> (Vec<usize>, usize) {
    let target = word.target();
    let stride = d.pow((n - 1 - target) as u32);
    let controls: Vec<(usize, usize)> =
        word.controls().into_iter().map(|(pos, val)| (d.pow((n - 1 - pos) as u32), val)).collect();
    let dim = d.pow(n as u32);
    let bases = (0..dim)
        .filter(|&idx| (idx / stride).is_multiple_of(d) && controls.iter().all(|&(w, val)| (idx / w) % d == val))
        .collect();
    (bases, stride)
}

pub fn apply_gate_in_place(g: &Gate, amps: &mut [Complex64], d: usize, n: usize) -> Result<()> {
    let dim = d.pow(n as u32);
    if amps.len() != dim {
        return Err(SynthError::DimensionMismatch { expected: dim, found: amps.len() });
    }
    if g.word.len() != n {
        return Err(SynthError::DimensionMismatch { expected: n, found: g.word.len() });
    }
    let (bases, stride) = fiber_bases(&g.word, d, n);
    let mut fiber = vec![ZERO; d];
    for base in bases {
        for (k, slot) in fiber.iter_mut().enumerate() {
            *slot = amps[base + k * stride];
        }
        for k in 0..d {
            amps[base + k * stride] = g.v.row(k).iter().zip(&fiber).map(|(a, b)| a * b).sum();
        }
    }
    Ok(())
}

pub fn apply_gate(g: &Gate, psi: &StateVector, d: usize, n: usize) -> Result<StateVector> {
    let mut out = psi.clone();
    apply_gate_in_place(g, out.as_mut_slice(), d, n)?;
    Ok(out)
}

pub fn apply_circuit(c: &Circuit, psi: &StateVector) -> Result<StateVector> {
    let mut out = psi.clone();
    for g in &c.gates {
        apply_gate_in_place(g, out.as_mut_slice(), c.d, c.n)?;
    }
    Ok(out)
}

/// `m <- G m`, treating each column of `m` as a state.
pub fn apply_gate_to_matrix(g: &Gate, m: &mut ComplexMatrix, d: usize, n: usize) -> Result<()> {
    let dim = d.pow(n as u32);
    if m.rows() != dim {
        return Err(SynthError::DimensionMismatch { expected: dim, found: m.rows() });
    }
    let cols = m.cols();
    let (bases, stride) = fiber_bases(&g.word, d, n);
    let mut rows = vec![ZERO; d * cols];
    let data = m.as_mut_slice();
    for base in bases {
        for k in 0..d {
            let r = base + k * stride;
            rows[k * cols..(k + 1) * cols].copy_from_slice(&data[r * cols..(r + 1) * cols]);
        }
        for k in 0..d {
            let r = base + k * stride;
            let out = &mut data[r * cols..(r + 1) * cols];
            out.iter_mut().for_each(|z| *z = ZERO);
            for (l, coef) in g.v.row(k).iter().enumerate() {
                if *coef == ZERO {
                    continue;
                }
                for (o, x) in out.iter_mut().zip(&rows[l * cols..(l + 1) * cols]) {
                    *o += coef * x;
                }
            }
        }
    }
    Ok(())
}

/// `m <- C m` for a whole circuit.
pub fn apply_circuit_to_matrix(c: &Circuit, m: &mut ComplexMatrix) -> Result<()> {
    for g in &c.gates {
        apply_gate_to_matrix(g, m, c.d, c.n)?;
    }
    Ok(())
}

pub fn circuit_unitary(c: &Circuit) -> Result<ComplexMatrix> {
    circuit_unitary_with_cap(c, DEFAULT_DIM_CAP)
}

pub fn circuit_unitary_with_cap(c: &Circuit, cap: usize) -> Result<ComplexMatrix> {
    let dim = c.d.checked_pow(c.n as u32).unwrap_or(usize::MAX);
    if dim > cap {
        return Err(SynthError::CapExceeded { size: dim, cap });
    }
    let mut m = ComplexMatrix::identity(dim);
    apply_circuit_to_matrix(c, &mut m)?;
    Ok(m)
}

/// Full matrix of a single gate.
pub fn gate_unitary(g: &Gate, d: usize, n: usize) -> Result<ComplexMatrix> {
    let mut c = Circuit::new(d, n);
    c.push(g.clone());
    circuit_unitary(&c)
}

/// Permutation matrix exchanging qudits `a` and `b`.
pub fn swap_matrix(d: usize, n: usize, a: usize, b: usize) -> ComplexMatrix {
    let dim = d.pow(n as u32);
    let mut m = ComplexMatrix::zeros(dim, dim);
    for idx in 0..dim {
        let mut digits = to_digits(idx, d, n);
        digits.swap(a, b);
        m[(from_digits(&digits, d), idx)] = crate::linalg::ONE;
    }
    m
}

/// Relabels a gate whose target sits at `j` so that the target moves to the
/// last qudit, exchanging the letters at `j` and `n - 1`. Conjugating the
/// result by the swap of qudits `j` and `n - 1` gives back the original gate.
pub fn swap_conjugate(g: &Gate, j: usize, n: usize) -> Result<Gate> {
    if j >= n || g.word.len() != n {
        return Err(SynthError::InvalidArgument(format!("position {j} out of range for n = {n}")));
    }
    if g.target() != j {
        return Err(SynthError::InvalidArgument(format!("target is at {}, not {j}", g.target())));
    }
    let mut letters = g.word.letters().to_vec();
    letters.swap(j, n - 1);
    let mut out = g.clone();
    out.word = ControlWord { letters };
    Ok(out)
}

/// `[⊗ INC^{m_k}] ∧(C, V) [⊗ INC^{-m_k}] = ∧(C', INC^{m_t} V INC^{-m_t})`
/// where `C'` shifts every control value by `m_k` mod `d`.
pub fn inc_conjugate_gate(g: &Gate, m_dits: &[usize]) -> Gate {
    let d = g.d();
    assert_eq!(m_dits.len(), g.word.len());
    let letters = g
        .word
        .letters()
        .iter()
        .zip(m_dits)
        .map(|(l, &m)| match l {
            Letter::Value(v) => Letter::Value((v + m) % d),
            other => *other,
        })
        .collect();
    let shift = m_dits[g.target()] % d;
    let v = if shift == 0 {
        g.v.clone()
    } else {
        inc_matrix(d, shift).matmul(&g.v).matmul(&inc_matrix(d, d - shift))
    };
    // INC powers commute with INC, conjugated diagonals stay diagonal, and
    // locals stay local. Shifted controls no longer fire on d - 1.
    let primitive = match g.primitive {
        Some(Primitive::Cinc | Primitive::CincInv) if m_dits.iter().any(|&m| m % d != 0) => None,
        Some(Primitive::Flip(a, b)) => Some(Primitive::Flip((a + shift) % d, (b + shift) % d)),
        other => other,
    };
    Gate { word: ControlWord { letters }, v, level: g.level, primitive, elidable: g.elidable }
}

/// Tallies by number of controls and by primitive tag. Elidable gates are skipped.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GateCounts {
    pub per_arity: BTreeMap<usize, usize>,
    pub cinc: usize,
    pub cinc_inv: usize,
    pub flip: usize,
    pub local: usize,
    pub total: usize,
}

impl GateCounts {
    pub fn arity(&self, k: usize) -> usize {
        self.per_arity.get(&k).copied().unwrap_or(0)
    }

    pub fn add(&mut self, other: &GateCounts) {
        for (k, v) in &other.per_arity {
            *self.per_arity.entry(*k).or_default() += v;
        }
        self.cinc += other.cinc;
        self.cinc_inv += other.cinc_inv;
        self.flip += other.flip;
        self.local += other.local;
        self.total += other.total;
    }
}

pub fn gate_counts(c: &Circuit) -> GateCounts {
    let mut counts = GateCounts::default();
    for g in c.gates.iter().filter(|g| !g.elidable) {
        *counts.per_arity.entry(g.num_controls()).or_default() += 1;
        counts.total += 1;
        match g.primitive {
            Some(Primitive::Cinc) => counts.cinc += 1,
            Some(Primitive::CincInv) => counts.cinc_inv += 1,
            Some(Primitive::Flip(_, _)) => counts.flip += 1,
            _ => {}
        }
        if g.num_controls() == 0 {
            counts.local += 1;
        }
    }
    counts
}

/// Gate libraries a lowered circuit can be checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum GateLibrary {
    /// Any gate with at most one control.
    TwoQudit,
    /// Local gates plus CINC and CINC^-1.
    Cinc,
    /// Local gates plus CINC.
    CincOnly,
    /// Local gates plus controlled flips.
    ControlledFlip,
}

/// Gates (by index) that fall outside `library`. Tags are checked against
/// the stored matrices and control values.
pub fn library_violations(c: &Circuit, library: GateLibrary) -> Vec<usize> {
    let d = c.d;
    let inc = inc_matrix(d, 1);
    let dec = inc_matrix(d, d - 1);
    let fires_on_top = |g: &Gate| g.word.controls().iter().all(|&(_, v)| v == d - 1);
    let ok = |g: &Gate| -> bool {
        let k = g.num_controls();
        let is_local = k == 0;
        let is_cinc = k == 1 && g.primitive == Some(Primitive::Cinc) && fires_on_top(g) && g.v.max_distance(&inc) < 1e-12;
        let is_cinc_inv =
            k == 1 && g.primitive == Some(Primitive::CincInv) && fires_on_top(g) && g.v.max_distance(&dec) < 1e-12;
        let is_flip = k == 1
            && matches!(g.primitive, Some(Primitive::Flip(a, b)) if g.v.max_distance(&crate::linalg::flip_matrix(d, a, b)) < 1e-12);
        match library {
            GateLibrary::TwoQudit => k <= 1,
            GateLibrary::Cinc => is_local || is_cinc || is_cinc_inv,
            GateLibrary::CincOnly => is_local || is_cinc,
            GateLibrary::ControlledFlip => is_local || is_flip,
        }
    };
    c.gates.iter().enumerate().filter(|(_, g)| !g.elidable && !ok(g)).map(|(i, _)| i).collect()
}
