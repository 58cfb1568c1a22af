//! The ♣-sequence that schedules state-synthesis reflections, and the
//! zero-pattern index sets used to check which amplitudes may still be
//! nonzero after each step.
//!
//! A term is a word over `{0..d-1, ♣}` whose clubs form a suffix. The term
//! with numeric prefix `c_1..c_{l-1}` drives a reflection targeting line `l`
//! (0-based: `prefix.len()`).
//!
//! Step indices `j` in this module are 1-based, matching the position of the
//! term in the sequence.

use std::collections::BTreeSet;
use std::fmt;

use crate::circuit::{from_digits, to_digits, ControlWord};
use crate::error::{Result, SynthError};

/// Default cap on the number of materialized terms.
pub const DEFAULT_TERM_CAP: u128 = 1_000_000;

pub const CLUB: char = '♣';

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClubTerm {
    prefix: Vec<usize>,
    n: usize,
}

impl ClubTerm {
    pub fn new(prefix: Vec<usize>, n: usize, d: usize) -> Result<Self> {
        if prefix.len() > n {
            return Err(SynthError::InvalidTerm(format!("prefix longer than n = {n}")));
        }
        if let Some(v) = prefix.iter().find(|&&v| v >= d) {
            return Err(SynthError::InvalidTerm(format!("letter {v} out of range for d = {d}")));
        }
        Ok(ClubTerm { prefix, n })
    }

    /// Numeric letters before the first club.
    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_club(&self) -> bool {
        self.prefix.len() < self.n
    }

    /// 0-based position of the leftmost club, if any.
    pub fn leftmost_club(&self) -> Option<usize> {
        self.has_club().then_some(self.prefix.len())
    }

    pub fn clubs(&self) -> usize {
        self.n - self.prefix.len()
    }

    /// Machine-readable form, `c` standing for a club.
    pub fn machine(&self) -> String {
        self.render('c')
    }

    fn render(&self, club: char) -> String {
        let mut s: String = self.prefix.iter().map(|v| char::from_digit(*v as u32, 36).unwrap_or('?')).collect();
        s.extend(std::iter::repeat_n(club, self.clubs()));
        s
    }

    /// Parses `"21cc"` or `"21♣♣"`. Letters are single base-36 digits.
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        let mut prefix = Vec::new();
        let mut clubs = 0;
        for ch in s.chars() {
            if ch == 'c' || ch == CLUB {
                clubs += 1;
            } else if clubs > 0 {
                return Err(SynthError::InvalidTerm(format!("digit after a club in {s:?}")));
            } else {
                let v = ch
                    .to_digit(36)
                    .ok_or_else(|| SynthError::InvalidTerm(format!("bad letter {ch:?} in {s:?}")))?;
                prefix.push(v as usize);
            }
        }
        let n = prefix.len() + clubs;
        ClubTerm::new(prefix, n, d)
    }
}

impl fmt::Display for ClubTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(CLUB))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClubSequence {
    pub d: usize,
    pub n: usize,
    pub terms: Vec<ClubTerm>,
}

impl ClubSequence {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The `j`-th term (1-based).
    pub fn term(&self, j: usize) -> &ClubTerm {
        &self.terms[j - 1]
    }
}

/// `(d^n - 1) / (d - 1)`, the number of terms.
pub fn sequence_length(d: usize, n: usize) -> Result<u128> {
    let dn = (d as u128).checked_pow(n as u32).ok_or(SynthError::Overflow("sequence length"))?;
    Ok((dn - 1) / (d as u128 - 1))
}

pub fn make_club_sequence(d: usize, n: usize) -> Result<ClubSequence> {
    make_club_sequence_with_cap(d, n, DEFAULT_TERM_CAP)
}

pub fn make_club_sequence_with_cap(d: usize, n: usize, cap: u128) -> Result<ClubSequence> {
    if d < 2 || n < 1 {
        return Err(SynthError::InvalidArgument(format!("need d >= 2 and n >= 1, got d = {d}, n = {n}")));
    }
    let len = sequence_length(d, n)?;
    if len > cap {
        return Err(SynthError::CapExceeded { size: usize::try_from(len).unwrap_or(usize::MAX), cap: cap as usize });
    }
    let prefixes = build_prefixes(d, n);
    let terms = prefixes.into_iter().map(|prefix| ClubTerm { prefix, n }).collect();
    Ok(ClubSequence { d, n, terms })
}

/// Recursive construction: the `(n-1)` sequence prefixed by each letter,
/// followed by the all-club term.
fn build_prefixes(d: usize, n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![Vec::new()];
    }
    let inner = build_prefixes(d, n - 1);
    let mut out = Vec::with_capacity(d * inner.len() + 1);
    for q in 0..d {
        for p in &inner {
            let mut prefix = Vec::with_capacity(p.len() + 1);
            prefix.push(q);
            prefix.extend_from_slice(p);
            out.push(prefix);
        }
    }
    out.push(Vec::new());
    out
}

/// Streams the sequence without materializing it.
pub fn club_terms(d: usize, n: usize) -> ClubTerms {
    ClubTerms { d, n, next: Some(vec![0; n - 1]) }
}

pub struct ClubTerms {
    d: usize,
    n: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for ClubTerms {
    type Item = ClubTerm;

    fn next(&mut self) -> Option<ClubTerm> {
        let current = self.next.take()?;
        self.next = successor(&current, self.d, self.n);
        Some(ClubTerm { prefix: current, n: self.n })
    }
}

/// Prefix of the term following `prefix`, or `None` after the all-club term.
fn successor(prefix: &[usize], d: usize, n: usize) -> Option<Vec<usize>> {
    let (&last, head) = prefix.split_last()?;
    let mut next = head.to_vec();
    if last < d - 1 {
        next.push(last + 1);
        next.resize(n - 1, 0);
    }
    Some(next)
}

/// The rightmost position holding a positive letter, with its value.
fn active_control(term: &ClubTerm) -> Option<(usize, usize)> {
    term.prefix.iter().enumerate().rev().find(|(_, &v)| v > 0).map(|(i, &v)| (i, v))
}

/// Control word for a term: target on the leftmost club, and a single control
/// on the rightmost positive letter (none when the prefix is all zeros).
pub fn control_word_for_term(term: &ClubTerm, d: usize) -> Result<ControlWord> {
    let target = term
        .leftmost_club()
        .ok_or_else(|| SynthError::InvalidTerm(format!("term {} has no club", term.machine())))?;
    let controls: Vec<(usize, usize)> = active_control(term).into_iter().collect();
    ControlWord::with_controls(term.n, target, &controls, d)
}

/// Index sets describing the possibly-nonzero amplitudes before step `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroPatternSets {
    pub j: usize,
    pub r1: BTreeSet<usize>,
    pub r2: BTreeSet<usize>,
    pub r3: BTreeSet<usize>,
}

impl ZeroPatternSets {
    pub fn union(&self) -> BTreeSet<usize> {
        self.r1.iter().chain(&self.r2).chain(&self.r3).copied().collect()
    }

    pub fn is_disjoint(&self) -> bool {
        self.r1.is_disjoint(&self.r2) && self.r1.is_disjoint(&self.r3) && self.r2.is_disjoint(&self.r3)
    }
}

fn in_r1(x: &[usize], c: &[usize]) -> bool {
    (0..c.len()).any(|q| x[..q] == c[..q] && x[q] < c[q] && x[q + 1..].iter().all(|&v| v == 0))
}

fn in_r2(x: &[usize], c: &[usize]) -> bool {
    x[..c.len()] == *c && x[c.len() + 1..].iter().all(|&v| v == 0)
}

fn in_r3(x: &[usize], c: &[usize]) -> bool {
    // Big-endian lexicographic comparison of equal-length dit strings.
    x[..c.len()] > *c
}

/// `R1(j)`, `R2(j)`, `R3(j)` for the `j`-th term (1-based).
pub fn zero_pattern_sets(seq: &ClubSequence, j: usize) -> Result<ZeroPatternSets> {
    if j == 0 || j > seq.len() {
        return Err(SynthError::InvalidArgument(format!("step {j} outside 1..={}", seq.len())));
    }
    let c = seq.term(j).prefix();
    let (d, n) = (seq.d, seq.n);
    let mut sets = ZeroPatternSets { j, r1: BTreeSet::new(), r2: BTreeSet::new(), r3: BTreeSet::new() };
    for idx in 0..d.pow(n as u32) {
        let x = to_digits(idx, d, n);
        if in_r1(&x, c) {
            sets.r1.insert(idx);
        }
        if in_r2(&x, c) {
            sets.r2.insert(idx);
        }
        if in_r3(&x, c) {
            sets.r3.insert(idx);
        }
    }
    Ok(sets)
}

/// Indices that may be nonzero before step `j`; `j = p + 1` gives the
/// single surviving index `0`.
pub fn surviving_indices(seq: &ClubSequence, j: usize) -> Result<BTreeSet<usize>> {
    if j == seq.len() + 1 {
        return Ok(BTreeSet::from([0]));
    }
    Ok(zero_pattern_sets(seq, j)?.union())
}

/// Indices zeroed by the reflection at step `j`.
pub fn zeroed_set(seq: &ClubSequence, j: usize) -> BTreeSet<usize> {
    let term = seq.term(j);
    let (d, n) = (seq.d, seq.n);
    (1..d)
        .map(|k| {
            let mut x = term.prefix().to_vec();
            x.push(k);
            x.resize(n, 0);
            from_digits(&x, d)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitionCase {
    /// The last prefix letter is below `d - 1`; the next term increments it.
    Increment,
    /// The last prefix letter is `d - 1`; the next term drops it.
    Ascend,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionReport {
    pub j: usize,
    pub case: TransitionCase,
    pub zeroed: BTreeSet<usize>,
    /// The sets at `j` and `j + 1` are each pairwise disjoint.
    pub disjoint: bool,
    /// `S(j) = S(j+1) ⊔ Z` with `Z` disjoint from `S(j+1)`.
    pub partition_holds: bool,
}

impl TransitionReport {
    pub fn holds(&self) -> bool {
        self.disjoint && self.partition_holds
    }
}

/// Compares the sets at steps `j` and `j + 1` (1-based, `j < p`).
pub fn transition_check(seq: &ClubSequence, j: usize) -> Result<TransitionReport> {
    if j == 0 || j >= seq.len() {
        return Err(SynthError::InvalidArgument(format!("transition {j} outside 1..{}", seq.len())));
    }
    let here = zero_pattern_sets(seq, j)?;
    let next = zero_pattern_sets(seq, j + 1)?;
    let zeroed = zeroed_set(seq, j);
    let last = *seq.term(j).prefix().last().expect("non-final term has a prefix");
    let case = if last < seq.d - 1 { TransitionCase::Increment } else { TransitionCase::Ascend };
    let next_union = next.union();
    let mut rhs = next_union.clone();
    rhs.extend(&zeroed);
    let partition_holds = zeroed.is_disjoint(&next_union) && here.union() == rhs;
    Ok(TransitionReport { j, case, zeroed, disjoint: here.is_disjoint() && next.is_disjoint(), partition_holds })
}

/// Whether cycling the target dit maps `(R1 ∪ R2 ∪ R3) ∩ S[C(j)]` into itself,
/// where `S[C(j)]` is the set of indices matching the step's control word.
pub fn orbit_closure_check(seq: &ClubSequence, j: usize) -> Result<bool> {
    let sets = zero_pattern_sets(seq, j)?;
    let word = control_word_for_term(seq.term(j), seq.d)?;
    let (d, n) = (seq.d, seq.n);
    let target = word.target();
    let union = sets.union();
    let matched: BTreeSet<usize> =
        union.iter().copied().filter(|&idx| word.matches(&to_digits(idx, d, n))).collect();
    // Closure under the generator is closure under the whole cyclic group.
    Ok(matched.iter().all(|&idx| {
        let mut x = to_digits(idx, d, n);
        x[target] = (x[target] + 1) % d;
        matched.contains(&from_digits(&x, d))
    }))
}

/// Whether the sets at step 1 partition the full index set.
pub fn coverage_check(seq: &ClubSequence) -> Result<bool> {
    let sets = zero_pattern_sets(seq, 1)?;
    let total = seq.d.pow(seq.n as u32);
    Ok(sets.r1.is_empty() && sets.is_disjoint() && sets.union().len() == total)
}
