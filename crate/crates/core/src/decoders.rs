//! Erasure decoders over the binary image of a q-ary code.
//!
//! All peeling decoders share one schedule. An iteration is a sweep over
//! the checks in index order; bits recovered while sweeping are visible to
//! checks processed later in the same sweep. A check is revisited only after
//! one of its variables gained a bit, which yields the same recovered set as
//! re-evaluating every check. Decoding stops after a sweep that recovers
//! nothing, once every bit is known, or at `max_iter` sweeps.

use serde::{Deserialize, Serialize};

use crate::codegraph::BinaryImage;
use crate::error::{Error, Result};

/// Iteration cap used when none is configured.
pub const DEFAULT_MAX_ITER: usize = 60;

/// Unknown count above which [`decode_ml`] refuses to run.
pub const ML_UNKNOWN_LIMIT: usize = 20_000;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BitState {
    Known(bool),
    Erased,
}

/// Per-bit channel output, packed per symbol: bit `s` of `known[n]` tells
/// whether bit `s` of symbol `n` was received, `values[n]` holds its value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ErasurePattern {
    p: u32,
    known: Vec<u32>,
    values: Vec<u32>,
}

impl ErasurePattern {
    /// Every bit received, all zero.
    pub fn all_known(n_symbols: usize, p: u32) -> Self {
        ErasurePattern {
            p,
            known: vec![full_mask(p); n_symbols],
            values: vec![0; n_symbols],
        }
    }

    /// Every bit erased.
    pub fn all_erased(n_symbols: usize, p: u32) -> Self {
        ErasurePattern {
            p,
            known: vec![0; n_symbols],
            values: vec![0; n_symbols],
        }
    }

    /// Pattern from packed masks; value bits outside `known` are cleared.
    pub fn from_masks(p: u32, known: Vec<u32>, values: Vec<u32>) -> Result<Self> {
        if known.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: known.len(),
                found: values.len(),
            });
        }
        let full = full_mask(p);
        let values = known.iter().zip(values).map(|(&k, v)| v & k & full).collect();
        let known = known.into_iter().map(|k| k & full).collect();
        Ok(ErasurePattern { p, known, values })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n_symbols(&self) -> usize {
        self.known.len()
    }

    pub fn bit_count(&self) -> usize {
        self.known.len() * self.p as usize
    }

    pub fn state(&self, bit: usize) -> BitState {
        let (n, s) = (bit / self.p as usize, bit % self.p as usize);
        if (self.known[n] >> s) & 1 == 1 {
            BitState::Known((self.values[n] >> s) & 1 == 1)
        } else {
            BitState::Erased
        }
    }

    pub fn set(&mut self, bit: usize, state: BitState) {
        let (n, s) = (bit / self.p as usize, bit % self.p as usize);
        let b = 1u32 << s;
        match state {
            BitState::Known(v) => {
                self.known[n] |= b;
                if v {
                    self.values[n] |= b;
                } else {
                    self.values[n] &= !b;
                }
            }
            BitState::Erased => {
                self.known[n] &= !b;
                self.values[n] &= !b;
            }
        }
    }

    pub fn known_masks(&self) -> &[u32] {
        &self.known
    }

    pub fn value_masks(&self) -> &[u32] {
        &self.values
    }

    pub fn erased_bits(&self) -> usize {
        self.known
            .iter()
            .map(|&k| (self.p - (k & full_mask(self.p)).count_ones()) as usize)
            .sum()
    }

    /// Symbols with at least one erased bit.
    pub fn erased_symbols(&self) -> usize {
        let full = full_mask(self.p);
        self.known.iter().filter(|&&k| k != full).count()
    }

    /// Recovered iff every bit of `other` erased here is known there.
    pub fn is_subset_recovered(&self, other: &ErasurePattern) -> bool {
        self.known
            .iter()
            .zip(&other.known)
            .all(|(&a, &b)| a & !b == 0)
    }
}

#[inline]
fn full_mask(p: u32) -> u32 {
    if p >= 32 {
        u32::MAX
    } else {
        (1u32 << p) - 1
    }
}

/// Outcome of one decoding run.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub final_state: ErasurePattern,
    /// Sweeps executed; the last one recovered nothing when decoding stalled.
    pub iterations_used: usize,
    /// Bits recovered in each sweep.
    pub ops_per_iteration: Vec<usize>,
    pub recovered_bits: usize,
    pub unrecovered_bits: usize,
    /// Symbols with at least one bit still erased.
    pub unrecovered_symbols: usize,
    pub success: bool,
}

impl DecodeResult {
    fn from_run(start: &ErasurePattern, final_state: ErasurePattern, ops: Vec<usize>) -> Self {
        let unrecovered_bits = final_state.erased_bits();
        let recovered_bits = start.erased_bits() - unrecovered_bits;
        DecodeResult {
            iterations_used: ops.len(),
            ops_per_iteration: ops,
            recovered_bits,
            unrecovered_bits,
            unrecovered_symbols: final_state.erased_symbols(),
            success: unrecovered_bits == 0,
            final_state,
        }
    }

    /// Erased-bit count remaining after each sweep, starting with the input.
    pub fn erasure_trajectory(&self) -> Vec<usize> {
        let mut left = self.recovered_bits + self.unrecovered_bits;
        std::iter::once(left)
            .chain(self.ops_per_iteration.iter().map(|&ops| {
                left -= ops;
                left
            }))
            .collect()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Peeling with the per-target inverse operation.
    Hybrid,
    /// Peeling on the rows of `H̄` as given.
    NoInverse,
    /// Plain peeling for GF(2) codes.
    Binary,
    /// Gaussian elimination over all erased bits.
    Ml,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Hybrid => "hybrid",
            DecoderKind::NoInverse => "no_inverse",
            DecoderKind::Binary => "binary",
            DecoderKind::Ml => "ml",
        }
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(DecoderKind::Hybrid),
            "no_inverse" => Ok(DecoderKind::NoInverse),
            "binary" => Ok(DecoderKind::Binary),
            "ml" => Ok(DecoderKind::Ml),
            _ => Err(Error::Config(format!("unknown decoder `{s}`"))),
        }
    }
}

/// Runs the selected decoder.
pub fn decode(
    kind: DecoderKind,
    big: &BinaryImage<'_>,
    pattern: &ErasurePattern,
    max_iter: usize,
) -> Result<DecodeResult> {
    match kind {
        DecoderKind::Hybrid => decode_hybrid(big, pattern, max_iter),
        DecoderKind::NoInverse => decode_no_inverse(big, pattern, max_iter),
        DecoderKind::Binary => decode_binary(big, pattern, max_iter),
        DecoderKind::Ml => decode_ml(big, pattern),
    }
}

struct PeelState<'g, 'a> {
    big: &'g BinaryImage<'a>,
    known: Vec<u32>,
    values: Vec<u32>,
    dirty: Vec<bool>,
    full: u32,
}

impl<'g, 'a> PeelState<'g, 'a> {
    fn new(big: &'g BinaryImage<'a>, pattern: &ErasurePattern) -> Result<Self> {
        let graph = big.graph();
        if pattern.n_symbols() != graph.n_vars() || pattern.p() != big.p() {
            return Err(Error::LengthMismatch {
                expected: big.bit_count(),
                found: pattern.bit_count(),
            });
        }
        let full = full_mask(big.p());
        let dirty = (0..graph.n_checks())
            .map(|m| {
                graph
                    .check_edges(m)
                    .iter()
                    .any(|e| pattern.known[e.var as usize] != full)
            })
            .collect();
        Ok(PeelState {
            big,
            known: pattern.known.clone(),
            values: pattern.values.clone(),
            dirty,
            full,
        })
    }

    #[inline]
    fn recover(&mut self, n: usize, bits: u32, values: u32) {
        self.known[n] |= bits;
        self.values[n] |= values;
        let graph = self.big.graph();
        for m in graph.var_checks(n) {
            self.dirty[m] = true;
        }
    }

    /// Sweeps until completion, a stall, or `max_iter`.
    fn run(mut self, max_iter: usize, mut process: impl FnMut(&mut Self, usize) -> usize) -> Result<(Vec<u32>, Vec<u32>, Vec<usize>)> {
        let mut erased: usize = self
            .known
            .iter()
            .map(|&k| (self.full & !k).count_ones() as usize)
            .sum();
        let mut ops = Vec::new();
        while erased > 0 && ops.len() < max_iter {
            let mut recovered = 0;
            for m in 0..self.dirty.len() {
                if self.dirty[m] {
                    self.dirty[m] = false;
                    recovered += process(&mut self, m);
                }
            }
            ops.push(recovered);
            erased -= recovered;
            if recovered == 0 {
                break;
            }
        }
        self.verify()?;
        Ok((self.known, self.values, ops))
    }

    /// Every fully known scalar row must be satisfied.
    fn verify(&self) -> Result<()> {
        let graph = self.big.graph();
        for m in 0..graph.n_checks() {
            for t in 0..self.big.p() {
                let mut parity = 0;
                let mut complete = true;
                for (n, mask) in self.big.row(m, t) {
                    if mask & !self.known[n] != 0 {
                        complete = false;
                        break;
                    }
                    parity ^= (mask & self.values[n]).count_ones() & 1;
                }
                if complete && parity != 0 {
                    return Err(Error::Integrity { check: m, row: t });
                }
            }
        }
        Ok(())
    }
}

/// Hybrid decoder: for every edge `(n, m)` the check equation is multiplied
/// by `A^{-k_n}`, giving `x̄_n = Σ_{i≠n} A^{k_i - k_n} x̄_i`. Bit `t` of
/// `x̄_n` is recovered once row `t` of the right-hand side touches only
/// known bits. Label differences come from exponent arithmetic; no matrix
/// is inverted.
pub fn decode_hybrid(
    big: &BinaryImage<'_>,
    pattern: &ErasurePattern,
    max_iter: usize,
) -> Result<DecodeResult> {
    let field = big.field();
    let powers = field.powers();
    let order = field.order();
    let p = field.p();
    let state = PeelState::new(big, pattern)?;
    let (known, values, ops) = state.run(max_iter, |st, m| {
        let edges = st.big.graph().check_edges(m);
        let mut recovered = 0;
        for (ti, target) in edges.iter().enumerate() {
            let n = target.var as usize;
            let missing = st.full & !st.known[n];
            if missing == 0 {
                continue;
            }
            let mut new_bits = 0u32;
            let mut new_vals = 0u32;
            for t in (0..p).filter(|&t| (missing >> t) & 1 == 1) {
                let mut parity = 0u32;
                let mut solvable = true;
                for (i, other) in edges.iter().enumerate() {
                    if i == ti {
                        continue;
                    }
                    let diff = (other.label + order - target.label) % order;
                    let mask = powers[diff as usize].row(t);
                    let v = other.var as usize;
                    if mask & !st.known[v] != 0 {
                        solvable = false;
                        break;
                    }
                    parity ^= (mask & st.values[v]).count_ones() & 1;
                }
                if solvable {
                    new_bits |= 1 << t;
                    new_vals |= parity << t;
                }
            }
            if new_bits != 0 {
                recovered += new_bits.count_ones() as usize;
                st.recover(n, new_bits, new_vals);
            }
        }
        recovered
    })?;
    Ok(DecodeResult::from_run(
        pattern,
        ErasurePattern { p, known, values },
        ops,
    ))
}

/// Baseline without the inverse operation: a bit is recovered when it is the
/// only erased bit of a scalar row of `H̄`.
pub fn decode_no_inverse(
    big: &BinaryImage<'_>,
    pattern: &ErasurePattern,
    max_iter: usize,
) -> Result<DecodeResult> {
    let powers = big.field().powers();
    let p = big.p();
    let state = PeelState::new(big, pattern)?;
    let (known, values, ops) = state.run(max_iter, |st, m| {
        let edges = st.big.graph().check_edges(m);
        let mut recovered = 0;
        for t in 0..p {
            let mut unknown: Option<(usize, u32)> = None;
            let mut parity = 0u32;
            let mut solvable = true;
            for e in edges {
                let v = e.var as usize;
                let mask = powers[e.label as usize].row(t);
                let open = mask & !st.known[v];
                match open.count_ones() {
                    0 => {}
                    1 if unknown.is_none() => unknown = Some((v, open)),
                    _ => {
                        solvable = false;
                        break;
                    }
                }
                parity ^= (mask & st.values[v]).count_ones() & 1;
            }
            if let (true, Some((v, bit))) = (solvable, unknown) {
                recovered += 1;
                st.recover(v, bit, if parity == 1 { bit } else { 0 });
            }
        }
        recovered
    })?;
    Ok(DecodeResult::from_run(
        pattern,
        ErasurePattern { p, known, values },
        ops,
    ))
}

/// Peeling for GF(2) codes, where every label is the identity.
pub fn decode_binary(
    big: &BinaryImage<'_>,
    pattern: &ErasurePattern,
    max_iter: usize,
) -> Result<DecodeResult> {
    if big.p() != 1 {
        return Err(Error::Config(format!(
            "binary decoder needs a GF(2) code, got p = {}",
            big.p()
        )));
    }
    decode_hybrid(big, pattern, max_iter)
}

/// Reference decoder: Gaussian elimination over GF(2) restricted to the
/// erased bits. A bit is recovered iff the system fixes its value.
pub fn decode_ml(big: &BinaryImage<'_>, pattern: &ErasurePattern) -> Result<DecodeResult> {
    let graph = big.graph();
    let p = big.p();
    if pattern.n_symbols() != graph.n_vars() || pattern.p() != p {
        return Err(Error::LengthMismatch {
            expected: big.bit_count(),
            found: pattern.bit_count(),
        });
    }
    let full = full_mask(p);

    // Column index of every erased bit.
    let mut column = vec![usize::MAX; big.bit_count()];
    let mut unknowns = Vec::new();
    for n in 0..graph.n_vars() {
        for s in 0..p {
            if (pattern.known[n] >> s) & 1 == 0 {
                column[n * p as usize + s as usize] = unknowns.len();
                unknowns.push((n, s));
            }
        }
    }
    let u = unknowns.len();
    if u > ML_UNKNOWN_LIMIT {
        return Err(Error::SizeGuard {
            unknowns: u,
            limit: ML_UNKNOWN_LIMIT,
        });
    }

    let words = u.div_ceil(64);
    let mut basis = GaussBasis::new(words);
    for m in 0..graph.n_checks() {
        if graph
            .check_edges(m)
            .iter()
            .all(|e| pattern.known[e.var as usize] == full)
        {
            continue;
        }
        for t in 0..p {
            let mut row = vec![0u64; words];
            let mut rhs = 0u32;
            for (n, mask) in big.row(m, t) {
                rhs ^= (mask & pattern.values[n]).count_ones() & 1;
                let mut open = mask & !pattern.known[n];
                while open != 0 {
                    let s = open.trailing_zeros();
                    open &= open - 1;
                    let c = column[n * p as usize + s as usize];
                    row[c / 64] ^= 1 << (c % 64);
                }
            }
            if !basis.insert(row, rhs == 1) {
                return Err(Error::Integrity { check: m, row: t });
            }
        }
    }

    let mut result = pattern.clone();
    for (col, value) in basis.determined() {
        let (n, s) = unknowns[col];
        result.known[n] |= 1 << s;
        if value {
            result.values[n] |= 1 << s;
        }
    }
    let recovered = pattern.erased_bits() - result.erased_bits();
    Ok(DecodeResult::from_run(pattern, result, vec![recovered]))
}

/// Incrementally maintained reduced row echelon form over GF(2).
struct GaussBasis {
    words: usize,
    rows: Vec<(usize, Vec<u64>, bool)>,
}

impl GaussBasis {
    fn new(words: usize) -> Self {
        GaussBasis {
            words,
            rows: Vec::new(),
        }
    }

    /// Adds an equation; returns false if it contradicts the basis.
    fn insert(&mut self, mut row: Vec<u64>, mut rhs: bool) -> bool {
        for (pivot, prow, prhs) in &self.rows {
            if (row[pivot / 64] >> (pivot % 64)) & 1 == 1 {
                row.iter_mut().zip(prow).for_each(|(a, b)| *a ^= b);
                rhs ^= prhs;
            }
        }
        let Some(pivot) = (0..self.words)
            .find(|&w| row[w] != 0)
            .map(|w| w * 64 + row[w].trailing_zeros() as usize)
        else {
            return !rhs;
        };
        for (_, prow, prhs) in &mut self.rows {
            if (prow[pivot / 64] >> (pivot % 64)) & 1 == 1 {
                prow.iter_mut().zip(&row).for_each(|(a, b)| *a ^= b);
                *prhs ^= rhs;
            }
        }
        self.rows.push((pivot, row, rhs));
        true
    }

    /// Pivot columns whose rows contain no free column.
    fn determined(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.rows.iter().filter_map(|(pivot, row, rhs)| {
            let weight: u32 = row.iter().map(|w| w.count_ones()).sum();
            (weight == 1).then_some((*pivot, *rhs))
        })
    }
}
