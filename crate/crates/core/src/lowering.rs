//! Ancilla-free lowering of controlled gates.
//!
//! * `∧_k(V)` for `k >= 2` becomes singly-controlled gates through the
//!   root decomposition `X = V^{1/d}`; the `∧_{k-1}(INC)` gates it needs are
//!   split in halves over a dirty spare line when one is available.
//! * `∧_1(V)` becomes local gates plus exactly `d` CINC and `d` CINC^-1,
//!   one phase gadget per eigenvector of `V`.
//! * CINC can be further expanded into controlled flips, or CINC^-1 into
//!   `d - 1` CINC.
//!
//! All controls in the generated circuits fire on `d - 1`; other control
//! values are first moved there by local INC powers on the control line.

use serde::Serialize;

use crate::circuit::{gate_counts, library_violations, Circuit, ControlWord, Gate, GateCounts, GateLibrary, Level, Primitive};
use crate::error::{Result, SynthError};
use crate::linalg::{
    flip_matrix, householder_to_e0, inc_matrix, normal_eigendecomposition, principal_arg, unitary_root, ComplexMatrix,
    EigenMode, ONE,
};

/// Matrices this close to INC (or INC^-1) are emitted as CINC (or CINC^-1).
pub const PRIMITIVE_MATCH_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoweringOptions {
    /// Drop `∧_k(X)` remainders whose `|X - I|_max` falls below this value.
    pub epsilon: Option<f64>,
}

/// How far a circuit is lowered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetLevel {
    TwoQudit,
    Cinc,
    CincOnly,
}

impl TargetLevel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "two-qudit" => Ok(TargetLevel::TwoQudit),
            "cinc" => Ok(TargetLevel::Cinc),
            "cinc-only" => Ok(TargetLevel::CincOnly),
            _ => Err(SynthError::Parse(format!("unknown lowering level {s:?}"))),
        }
    }

    pub fn library(self) -> GateLibrary {
        match self {
            TargetLevel::TwoQudit => GateLibrary::TwoQudit,
            TargetLevel::Cinc => GateLibrary::Cinc,
            TargetLevel::CincOnly => GateLibrary::CincOnly,
        }
    }
}

fn local(n: usize, target: usize, v: ComplexMatrix) -> Gate {
    Gate::local(n, target, v)
}

/// `∧_1(v)` firing on `d - 1`, or a local gate when `control` is `None`.
fn single(n: usize, d: usize, control: Option<usize>, target: usize, v: ComplexMatrix, inc: bool) -> Gate {
    match control {
        None => {
            let g = local(n, target, v);
            if inc {
                g.with_primitive(Primitive::IncPower(1))
            } else {
                g
            }
        }
        Some(c) => {
            let word = ControlWord::with_controls(n, target, &[(c, d - 1)], d).expect("valid word");
            let g = Gate::new(word, v).with_level(Level::TwoQudit);
            if inc {
                g.with_primitive(Primitive::IncPower(1))
            } else {
                g
            }
        }
    }
}

/// Local INC powers moving each control value to `d - 1`, and their inverses.
fn normalize_controls(g: &Gate, n: usize) -> (Vec<Gate>, Vec<Gate>) {
    let d = g.d();
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for (pos, val) in g.word.controls() {
        let s = d - 1 - val;
        if s != 0 {
            pre.push(local(n, pos, inc_matrix(d, s)).with_primitive(Primitive::IncPower(s)));
            post.push(local(n, pos, inc_matrix(d, d - s)).with_primitive(Primitive::IncPower(d - s)));
        }
    }
    (pre, post)
}

fn is_inc(g: &Gate) -> bool {
    g.primitive == Some(Primitive::IncPower(1))
        || g.primitive == Some(Primitive::Cinc)
        || g.v.max_distance(&inc_matrix(g.d(), 1)) < PRIMITIVE_MATCH_TOL
}

/// Lowers `∧_1(V)` to local gates, `d` CINC and `d` CINC^-1. A `V` equal to
/// INC (or INC^-1) becomes a single CINC (or CINC^-1).
pub fn lower_singly_controlled(g: &Gate, n: usize) -> Result<Circuit> {
    let d = g.d();
    let controls = g.word.controls();
    if controls.len() != 1 {
        return Err(SynthError::InvalidArgument(format!("expected one control, found {}", controls.len())));
    }
    g.v.ensure_unitary(1e-10)?;
    let (c, _) = controls[0];
    let t = g.target();
    let (pre, post) = normalize_controls(g, n);
    let mut out = Circuit::new(d, n);
    out.gates.extend(pre);
    if is_inc(g) {
        out.push(Gate::cinc(n, c, t, d));
    } else if g.primitive == Some(Primitive::CincInv) || g.v.max_distance(&inc_matrix(d, d - 1)) < PRIMITIVE_MATCH_TOL {
        out.push(Gate::cinc_inv(n, c, t, d));
    } else {
        let eig = normal_eigendecomposition(&g.v, EigenMode::Unitary)?;
        for k in 0..eig.len() {
            let theta = principal_arg(eig.values[k]);
            let xi = num_complex::Complex64::from_polar(1.0, theta / d as f64);
            let w = householder_to_e0(eig.vector(k).as_slice())?;
            let dmat = ComplexMatrix::from_diagonal(&(0..d).map(|j| xi.powu(j as u32)).collect::<Vec<_>>());
            let mut ctrl_phase = vec![ONE; d];
            ctrl_phase[d - 1] = xi;
            out.push(local(n, t, w.clone()));
            out.push(local(n, t, dmat.adjoint()));
            out.push(Gate::cinc_inv(n, c, t, d));
            out.push(local(n, t, dmat));
            out.push(Gate::cinc(n, c, t, d));
            out.push(local(n, c, ComplexMatrix::from_diagonal(&ctrl_phase)));
            out.push(local(n, t, w.adjoint()));
        }
    }
    out.gates.extend(post);
    Ok(out)
}

/// `∧_1(V)` over the controlled-flip library: each CINC of the standard
/// lowering becomes `d - 1` controlled transpositions.
pub fn lower_controlled_flip_form(g: &Gate, n: usize) -> Result<Circuit> {
    let lowered = lower_singly_controlled(g, n)?;
    Ok(expand_flips(&lowered))
}

/// Replaces CINC and CINC^-1 by controlled flips, using
/// `INC = (0 1)(1 2)...(d-2 d-1)` with the rightmost transposition first.
pub fn expand_flips(c: &Circuit) -> Circuit {
    let d = c.d;
    let mut out = Circuit::new(d, c.n);
    out.metadata = c.metadata.clone();
    for g in &c.gates {
        let order: Vec<usize> = match g.primitive {
            Some(Primitive::Cinc) => (0..d - 1).rev().collect(),
            Some(Primitive::CincInv) => (0..d - 1).collect(),
            _ => {
                out.push(g.clone());
                continue;
            }
        };
        for j in order {
            let mut f = Gate::new(g.word.clone(), flip_matrix(d, j, j + 1))
                .with_level(Level::TwoQudit)
                .with_primitive(Primitive::Flip(j, j + 1));
            f.elidable = false;
            out.push(f);
        }
    }
    out
}

/// Replaces each CINC^-1 with `d - 1` CINC.
pub fn cinc_only_rewrite(c: &Circuit) -> Circuit {
    let mut out = Circuit::new(c.d, c.n);
    out.metadata = c.metadata.clone();
    for g in &c.gates {
        if g.primitive == Some(Primitive::CincInv) {
            let (ctrl, _) = g.word.controls()[0];
            for _ in 0..c.d - 1 {
                out.push(Gate::cinc(c.n, ctrl, g.target(), c.d));
            }
        } else {
            out.push(g.clone());
        }
    }
    out
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MultiControlStats {
    /// `|X_j - I|_max` along the chain of roots, outermost first.
    pub root_chain: Vec<f64>,
    /// Remainders dropped by epsilon truncation.
    pub truncated: usize,
}

struct Decomposer<'a> {
    n: usize,
    d: usize,
    opts: &'a LoweringOptions,
    out: Vec<Gate>,
    stats: MultiControlStats,
}

impl Decomposer<'_> {
    /// Emits `∧(controls -> target, v)`, all controls firing on `d - 1`.
    /// `domain` lists the lines the emitted gates may touch.
    fn emit(&mut self, controls: &[usize], target: usize, v: ComplexMatrix, inc: bool, domain: &[usize], chain: bool) -> Result<()> {
        let (n, d) = (self.n, self.d);
        if !inc {
            if let Some(eps) = self.opts.epsilon {
                if v.max_distance(&ComplexMatrix::identity(d)) < eps {
                    self.stats.truncated += 1;
                    return Ok(());
                }
            }
        }
        match controls.len() {
            0 => {
                self.out.push(single(n, d, None, target, v, inc));
                return Ok(());
            }
            1 => {
                self.out.push(single(n, d, Some(controls[0]), target, v, inc));
                return Ok(());
            }
            _ => {}
        }
        let k = controls.len();
        if inc && k >= 3 {
            let spare = domain.iter().copied().find(|l| *l != target && !controls.contains(l));
            if let Some(spare) = spare {
                let split = k.div_ceil(2);
                let group1 = &controls[..split];
                let mut group2 = controls[split..].to_vec();
                group2.push(spare);
                for _ in 0..d {
                    self.emit(group1, spare, inc_matrix(d, 1), true, domain, false)?;
                    self.emit(&group2, target, inc_matrix(d, 1), true, domain, false)?;
                }
                return Ok(());
            }
        }
        let (&last, rest) = controls.split_last().expect("k >= 2");
        let x = unitary_root(&v, d)?;
        if chain {
            self.stats.root_chain.push(x.max_distance(&ComplexMatrix::identity(d)));
        }
        let x_dag = x.adjoint();
        self.emit(&[last], target, x.pow(d - 1), false, domain, false)?;
        self.emit(rest, last, inc_matrix(d, 1), true, domain, false)?;
        for _ in 0..d - 1 {
            self.emit(&[last], target, x_dag.clone(), false, domain, false)?;
            self.emit(rest, last, inc_matrix(d, 1), true, domain, false)?;
        }
        self.emit(rest, target, x, false, domain, chain && !inc)
    }
}

/// Lowers a gate with two or more controls to gates with at most one
/// control, touching only the lines in the gate's support.
pub fn lower_multi_controlled(g: &Gate, n: usize, opts: &LoweringOptions) -> Result<(Circuit, MultiControlStats)> {
    let domain = g.word.support();
    lower_multi_controlled_in(g, n, opts, &domain)
}

fn lower_multi_controlled_in(
    g: &Gate,
    n: usize,
    opts: &LoweringOptions,
    domain: &[usize],
) -> Result<(Circuit, MultiControlStats)> {
    let d = g.d();
    g.v.ensure_unitary(1e-10)?;
    let controls: Vec<usize> = g.word.controls().iter().map(|&(p, _)| p).collect();
    let (pre, post) = normalize_controls(g, n);
    let mut dec = Decomposer { n, d, opts, out: Vec::new(), stats: MultiControlStats::default() };
    dec.emit(&controls, g.target(), g.v.clone(), is_inc(g), domain, true)?;
    let mut out = Circuit::new(d, n);
    out.gates.extend(pre);
    out.gates.extend(dec.out);
    out.gates.extend(post);
    Ok((out, dec.stats))
}

/// `∧_k(INC)` with controls on lines `0..k`, target `k`, on `n_ambient`
/// lines; the lines above `k` serve as dirty workspace for the halving split.
pub fn lower_k_controlled_inc(k: usize, d: usize, n_ambient: usize) -> Result<Circuit> {
    if k + 2 > n_ambient {
        return Err(SynthError::InvalidArgument(format!(
            "∧_{k}(INC) needs at least {} lines for a spare, got {n_ambient}",
            k + 2
        )));
    }
    let controls: Vec<(usize, usize)> = (0..k).map(|p| (p, d - 1)).collect();
    let word = ControlWord::with_controls(n_ambient, k, &controls, d)?;
    let g = Gate::new(word, inc_matrix(d, 1)).with_primitive(Primitive::IncPower(1));
    let domain: Vec<usize> = (0..n_ambient).collect();
    Ok(lower_multi_controlled_in(&g, n_ambient, &LoweringOptions::default(), &domain)?.0)
}

/// Per-gate comparison of measured counts with the recurrences.
#[derive(Clone, Debug, Serialize)]
pub struct CountCheck {
    pub gate_index: usize,
    pub controls: usize,
    pub measured_cinc: usize,
    pub measured_cinc_inv: usize,
    pub predicted_cinc: u128,
    pub predicted_cinc_inv: u128,
    pub bound_cinc: f64,
    pub bound_cinc_inv: f64,
    pub within_bounds: bool,
    pub root_chain: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoweringReport {
    pub level: String,
    pub input_gates: usize,
    pub output_gates: usize,
    pub counts: GateCounts,
    pub checks: Vec<CountCheck>,
    pub truncated: usize,
    /// Indices of gates outside the target library (empty on success).
    pub library_violations: Vec<usize>,
}

/// Lowers every gate of `c` to `level`. Elidable gates are dropped.
pub fn lower_circuit(c: &Circuit, level: TargetLevel, opts: &LoweringOptions) -> Result<(Circuit, LoweringReport)> {
    let (d, n) = (c.d, c.n);
    let mut out = Circuit::new(d, n);
    out.metadata = c.metadata.clone();
    let mut checks = Vec::new();
    let mut truncated = 0;
    for (idx, g) in c.gates.iter().enumerate().filter(|(_, g)| !g.elidable) {
        let k = g.num_controls();
        let two_qudit = if k >= 2 {
            let (sub, stats) = lower_multi_controlled(g, n, opts)?;
            truncated += stats.truncated;
            if level != TargetLevel::TwoQudit {
                let lowered = lower_two_qudit_gates(&sub)?;
                let counts = gate_counts(&lowered);
                let (pc, pci) = controlled_counts(k, d, HalvingSplit::ControlsPlusSpare)?;
                let (bc, bci) = controlled_count_bounds(k + 1, d);
                checks.push(CountCheck {
                    gate_index: idx,
                    controls: k,
                    measured_cinc: counts.cinc,
                    measured_cinc_inv: counts.cinc_inv,
                    predicted_cinc: pc,
                    predicted_cinc_inv: pci,
                    bound_cinc: bc,
                    bound_cinc_inv: bci,
                    within_bounds: (counts.cinc as f64) <= bc && (counts.cinc_inv as f64) <= bci,
                    root_chain: stats.root_chain,
                });
                out.gates.extend(lowered.gates);
                continue;
            }
            sub
        } else {
            let mut single = Circuit::new(d, n);
            single.push(g.clone());
            single
        };
        match level {
            TargetLevel::TwoQudit => {
                for mut h in two_qudit.gates {
                    if h.level == Level::Controlled {
                        h.level = Level::TwoQudit;
                    }
                    out.push(h);
                }
            }
            _ => out.gates.extend(lower_two_qudit_gates(&two_qudit)?.gates),
        }
    }
    if level == TargetLevel::CincOnly {
        out = cinc_only_rewrite(&out);
    }
    let violations = library_violations(&out, level.library());
    let report = LoweringReport {
        level: match level {
            TargetLevel::TwoQudit => "two-qudit",
            TargetLevel::Cinc => "cinc",
            TargetLevel::CincOnly => "cinc-only",
        }
        .into(),
        input_gates: c.len(),
        output_gates: out.len(),
        counts: gate_counts(&out),
        checks,
        truncated,
        library_violations: violations,
    };
    Ok((out, report))
}

/// Lowers gates with at most one control to the `{local, CINC, CINC^-1}` library.
fn lower_two_qudit_gates(c: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(c.d, c.n);
    for g in &c.gates {
        match g.num_controls() {
            0 => {
                let mut h = g.clone();
                h.level = Level::CincLowered;
                h.primitive = Some(Primitive::Local);
                out.push(h);
            }
            1 if matches!(g.primitive, Some(Primitive::Cinc | Primitive::CincInv))
                && g.word.controls()[0].1 == c.d - 1 =>
            {
                out.push(g.clone());
            }
            1 => out.gates.extend(lower_singly_controlled(g, c.n)?.gates),
            k => return Err(SynthError::InvalidArgument(format!("gate with {k} controls left after lowering"))),
        }
    }
    Ok(out)
}

/// How the halving step splits `∧_k(INC)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HalvingSplit {
    /// Sub-gate sizes `⌊(k+1)/2⌋` and `⌈(k+1)/2⌉`: the spare line joins the
    /// second group as a control. This is what the emitted circuits do.
    ControlsPlusSpare,
    /// Sub-gate sizes `⌊k/2⌋` and `⌈k/2⌉`.
    ControlsOnly,
}

fn checked_mul(a: u128, b: u128) -> Result<u128> {
    a.checked_mul(b).ok_or(SynthError::Overflow("control counts"))
}

fn checked_add(a: u128, b: u128) -> Result<u128> {
    a.checked_add(b).ok_or(SynthError::Overflow("control counts"))
}

/// `(b_k, b~_k)`: CINC and CINC^-1 counts for `∧_k(INC)` with a spare line.
pub fn inc_counts(k: usize, d: usize, split: HalvingSplit) -> Result<(u128, u128)> {
    let dd = d as u128;
    let mut b = vec![(0u128, 0u128); k.max(2) + 1];
    b[1] = (1, 0);
    b[2] = (dd * dd + 2 * dd, dd * dd + dd);
    for j in 3..=k {
        let (lo, hi) = match split {
            HalvingSplit::ControlsPlusSpare => (j.div_ceil(2), (j + 1).div_ceil(2)),
            HalvingSplit::ControlsOnly => (j / 2, j.div_ceil(2)),
        };
        b[j] = (
            checked_mul(dd, checked_add(b[lo].0, b[hi].0)?)?,
            checked_mul(dd, checked_add(b[lo].1, b[hi].1)?)?,
        );
    }
    Ok(b[k])
}

/// `(c_k, c~_k)`: CINC and CINC^-1 counts for a generic `∧_k(V)`.
pub fn controlled_counts(k: usize, d: usize, split: HalvingSplit) -> Result<(u128, u128)> {
    let dd = d as u128;
    if k == 0 {
        return Ok((0, 0));
    }
    let (mut c, mut ci) = (dd, dd);
    for j in 2..=k {
        let (b, bi) = inc_counts(j - 1, d, split)?;
        c = checked_add(checked_add(checked_mul(dd, b)?, c)?, dd * dd)?;
        ci = checked_add(checked_add(checked_mul(dd, bi)?, ci)?, dd * dd)?;
    }
    Ok((c, ci))
}

/// Upper bounds for `(b_{n-2}, b~_{n-2})`.
pub fn inc_count_bounds(n: usize, d: usize) -> (f64, f64) {
    let df = d as f64;
    let scale = 2.0 * df * (n as f64).powf(1.0 + df.log2());
    ((df * df + 2.0 * df) * scale, (df * df + df) * scale)
}

/// Upper bounds for `(c_{n-1}, c~_{n-1})`.
pub fn controlled_count_bounds(n: usize, d: usize) -> (f64, f64) {
    let df = d as f64;
    let e = 2.0 + df.log2();
    let growth = ((n as f64 + 1.0).powf(e) - 4.0 * df * df) / e;
    let tail = (n as f64 - 2.0) * df * df;
    (
        2.0 * df * df * (df * df + 2.0 * df) * growth + tail + 2.0 * df,
        2.0 * df * df * (df * df + df) * growth + tail + df,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormC {
    pub n: usize,
    pub d: usize,
    pub c: u128,
    pub c_inv: u128,
    pub bound_c: f64,
    pub bound_c_inv: f64,
    pub c_ok: bool,
    pub c_inv_ok: bool,
}

/// `c_{n-1}`, `c~_{n-1}` and their closed-form bounds.
pub fn closed_form_counts_c(n: usize, d: usize) -> Result<ClosedFormC> {
    closed_form_counts_c_with(n, d, HalvingSplit::ControlsPlusSpare)
}

pub fn closed_form_counts_c_with(n: usize, d: usize, split: HalvingSplit) -> Result<ClosedFormC> {
    if n < 2 {
        return Err(SynthError::InvalidArgument("need n >= 2".into()));
    }
    let (c, c_inv) = controlled_counts(n - 1, d, split)?;
    let (bound_c, bound_c_inv) = controlled_count_bounds(n, d);
    Ok(ClosedFormC { n, d, c, c_inv, bound_c, bound_c_inv, c_ok: c as f64 <= bound_c, c_inv_ok: c_inv as f64 <= bound_c_inv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_unitary, gate_unitary};
    use crate::random::{random_unitary, seeded_rng};

    fn controlled(d: usize, n: usize, controls: &[(usize, usize)], target: usize, v: ComplexMatrix) -> Gate {
        Gate::new(ControlWord::with_controls(n, target, controls, d).unwrap(), v)
    }

    #[test]
    fn d_gadget_identity() {
        let mut rng = seeded_rng(1);
        use rand::Rng;
        for d in 2..=5 {
            for _ in 0..100 {
                let xi = num_complex::Complex64::from_polar(1.0, rng.random_range(-3.2..3.2));
                let dm = ComplexMatrix::from_diagonal(&(0..d).map(|j| xi.powu(j as u32)).collect::<Vec<_>>());
                let lhs = inc_matrix(d, 1).matmul(&dm).matmul(&inc_matrix(d, d - 1)).matmul(&dm.adjoint());
                let mut diag = vec![ONE; d];
                diag[0] = xi.powu(d as u32);
                let rhs = ComplexMatrix::from_diagonal(&diag).scale(xi.inv());
                assert!(lhs.max_distance(&rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn singly_controlled_random() {
        let mut rng = seeded_rng(2);
        for d in 2..=4 {
            let g = controlled(d, 2, &[(0, d - 1)], 1, random_unitary(&mut rng, d));
            let c = lower_singly_controlled(&g, 2).unwrap();
            let counts = gate_counts(&c);
            assert_eq!((counts.cinc, counts.cinc_inv), (d, d));
            assert!(circuit_unitary(&c).unwrap().max_distance(&gate_unitary(&g, d, 2).unwrap()) < 1e-8);
            assert!(library_violations(&c, GateLibrary::Cinc).is_empty());
        }
    }

    #[test]
    fn singly_controlled_identity_and_inc() {
        let g = controlled(3, 2, &[(0, 2)], 1, ComplexMatrix::identity(3));
        let c = lower_singly_controlled(&g, 2).unwrap();
        assert!(circuit_unitary(&c).unwrap().max_distance(&ComplexMatrix::identity(9)) < 1e-10);

        let g = controlled(3, 2, &[(0, 2)], 1, inc_matrix(3, 1));
        let c = lower_singly_controlled(&g, 2).unwrap();
        assert!(circuit_unitary(&c).unwrap().max_distance(&gate_unitary(&Gate::cinc(2, 0, 1, 3), 3, 2).unwrap()) < 1e-8);
    }

    #[test]
    fn other_control_values_and_target_above_control() {
        let mut rng = seeded_rng(3);
        let g = controlled(3, 3, &[(2, 0)], 0, random_unitary(&mut rng, 3));
        let c = lower_singly_controlled(&g, 3).unwrap();
        assert!(circuit_unitary(&c).unwrap().max_distance(&gate_unitary(&g, 3, 3).unwrap()) < 1e-8);
    }

    #[test]
    fn flip_form_counts() {
        let mut rng = seeded_rng(4);
        for d in 2..=4 {
            let g = controlled(d, 2, &[(0, d - 1)], 1, random_unitary(&mut rng, d));
            let c = lower_controlled_flip_form(&g, 2).unwrap();
            assert_eq!(gate_counts(&c).flip, 2 * d * (d - 1));
            assert!(circuit_unitary(&c).unwrap().max_distance(&gate_unitary(&g, d, 2).unwrap()) < 1e-8);
            assert!(library_violations(&c, GateLibrary::ControlledFlip).is_empty());
        }
    }

    #[test]
    fn toffoli_like_counts() {
        let d = 3;
        let g = controlled(d, 3, &[(0, 2), (1, 2)], 2, inc_matrix(d, 1)).with_primitive(Primitive::IncPower(1));
        let c = Circuit { d, n: 3, gates: vec![g.clone()], metadata: vec![] };
        let (low, _) = lower_circuit(&c, TargetLevel::Cinc, &LoweringOptions::default()).unwrap();
        let counts = gate_counts(&low);
        assert_eq!((counts.cinc, counts.cinc_inv), (15, 12));
        assert!(circuit_unitary(&low).unwrap().max_distance(&gate_unitary(&g, d, 3).unwrap()) < 1e-7);
    }

    #[test]
    fn multi_controlled_identity() {
        let g = controlled(3, 3, &[(0, 2), (1, 2)], 2, ComplexMatrix::identity(3));
        let (c, _) = lower_multi_controlled(&g, 3, &LoweringOptions::default()).unwrap();
        assert!(circuit_unitary(&c).unwrap().max_distance(&ComplexMatrix::identity(27)) < 1e-9);
    }

    #[test]
    fn three_controls_qubits() {
        let mut rng = seeded_rng(5);
        let g = controlled(2, 4, &[(0, 1), (1, 1), (2, 1)], 3, random_unitary(&mut rng, 2));
        let (c, stats) = lower_multi_controlled(&g, 4, &LoweringOptions::default()).unwrap();
        assert!(c.gates.iter().all(|h| h.num_controls() <= 1));
        assert!(circuit_unitary(&c).unwrap().max_distance(&gate_unitary(&g, 2, 4).unwrap()) < 1e-7);
        assert_eq!(stats.root_chain.len(), 2);
    }

    #[test]
    fn mixed_control_values() {
        let mut rng = seeded_rng(6);
        let g = controlled(3, 3, &[(0, 0), (2, 1)], 1, random_unitary(&mut rng, 3));
        let (c, _) = lower_multi_controlled(&g, 3, &LoweringOptions::default()).unwrap();
        assert!(circuit_unitary(&c).unwrap().max_distance(&gate_unitary(&g, 3, 3).unwrap()) < 1e-7);
    }

    #[test]
    fn halving_matches_recurrence() {
        let d = 2;
        for n in 5..=7 {
            let k = n - 2;
            let c = lower_k_controlled_inc(k, d, n).unwrap();
            let (low, _) = lower_circuit(&c, TargetLevel::Cinc, &LoweringOptions::default()).unwrap();
            let counts = gate_counts(&low);
            let (b, bi) = inc_counts(k, d, HalvingSplit::ControlsPlusSpare).unwrap();
            assert_eq!((counts.cinc as u128, counts.cinc_inv as u128), (b, bi), "n={n}");
            let (bb, bbi) = inc_count_bounds(n, d);
            assert!((b as f64) <= bb && (bi as f64) <= bbi);
        }
        let c = lower_k_controlled_inc(3, 2, 5).unwrap();
        let controls: Vec<(usize, usize)> = (0..3).map(|p| (p, 1)).collect();
        let g = controlled(2, 5, &controls, 3, inc_matrix(2, 1));
        assert!(circuit_unitary(&c).unwrap().max_distance(&gate_unitary(&g, 2, 5).unwrap()) < 1e-7);
        assert!(lower_k_controlled_inc(3, 2, 4).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let c = closed_form_counts_c(3, 3).unwrap();
        assert_eq!((c.c, c.c_inv), (15, 12));
        for d in 2..=5 {
            for n in 3..=10 {
                for split in [HalvingSplit::ControlsPlusSpare, HalvingSplit::ControlsOnly] {
                    let c = closed_form_counts_c_with(n, d, split).unwrap();
                    assert!(c.c_ok && c.c_inv_ok, "d={d} n={n} {split:?}");
                }
            }
        }
    }

    #[test]
    fn measured_c_for_three_controls() {
        let mut rng = seeded_rng(7);
        let g = controlled(2, 4, &[(0, 1), (1, 1), (2, 1)], 3, random_unitary(&mut rng, 2));
        let c = Circuit { d: 2, n: 4, gates: vec![g], metadata: vec![] };
        let (low, report) = lower_circuit(&c, TargetLevel::Cinc, &LoweringOptions::default()).unwrap();
        let counts = gate_counts(&low);
        let (pc, pci) = controlled_counts(3, 2, HalvingSplit::ControlsPlusSpare).unwrap();
        assert_eq!((counts.cinc as u128, counts.cinc_inv as u128), (pc, pci));
        assert!(report.checks[0].within_bounds);
    }

    #[test]
    fn cinc_only_rewrite_is_equivalent() {
        let mut rng = seeded_rng(8);
        let g = controlled(3, 2, &[(1, 2)], 0, random_unitary(&mut rng, 3));
        let c = Circuit { d: 3, n: 2, gates: vec![g.clone()], metadata: vec![] };
        let (low, report) = lower_circuit(&c, TargetLevel::CincOnly, &LoweringOptions::default()).unwrap();
        assert!(report.library_violations.is_empty());
        assert_eq!(gate_counts(&low).cinc, 3 + 3 * 2);
        assert!(circuit_unitary(&low).unwrap().max_distance(&gate_unitary(&g, 3, 2).unwrap()) < 1e-8);
    }

    #[test]
    fn epsilon_truncation_drops_small_remainders() {
        let mut rng = seeded_rng(9);
        let controls: Vec<(usize, usize)> = (0..4).map(|p| (p, 1)).collect();
        let g = controlled(2, 5, &controls, 4, random_unitary(&mut rng, 2));
        let exact = lower_multi_controlled(&g, 5, &LoweringOptions::default()).unwrap();
        let approx = lower_multi_controlled(&g, 5, &LoweringOptions { epsilon: Some(0.5) }).unwrap();
        assert!(approx.1.truncated > 0);
        assert!(approx.0.len() < exact.0.len());
    }
}
