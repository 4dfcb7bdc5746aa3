//! Transmission functions, quantizer families, the LLRQ rule and the
//! exponents that are defined by optimizing over quantizers.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hypothesis::{kl_divergence, Alphabet, Direction, DistributionPair};
use crate::math::{ln, xlogy_ratio};

/// Default bound on the number of maps `enumerate_quantizers` will produce.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// Relative slack under which a normalized sum counts as equal to the
/// threshold. Keeps exact evaluation and simulation in agreement when the
/// same sum is accumulated in different orders.
pub const TIE_TOLERANCE: f64 = 1e-11;

/// Divergences closer than this are treated as equal when picking a maximizer.
pub const TIE_EPSILON: f64 = 1e-12;

/// A deterministic map from input tuples to an output symbol.
///
/// Leaves have arity 0 and a single input alphabet (their observation);
/// relays of arity `d` take `d` message alphabets. The table is indexed in
/// mixed radix with the first input most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionFunction {
    arity: usize,
    inputs: Vec<Alphabet>,
    output: Alphabet,
    table: Vec<usize>,
}

impl TransmissionFunction {
    pub fn new(arity: usize, inputs: Vec<Alphabet>, output: Alphabet, table: Vec<usize>) -> Result<Self> {
        let expected_inputs = arity.max(1);
        if inputs.len() != expected_inputs {
            return Err(Error::InvalidTransmission(alloc::format!(
                "arity {arity} needs {expected_inputs} input alphabets, got {}",
                inputs.len()
            )));
        }
        let size = domain_size(&inputs)
            .ok_or_else(|| Error::InvalidTransmission("input domain overflows".to_string()))?;
        if table.len() != size {
            return Err(Error::InvalidTransmission(alloc::format!(
                "table has {} entries, domain has {size}",
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|&&y| y >= output.len()) {
            return Err(Error::InvalidTransmission(alloc::format!("output index {bad} out of range")));
        }
        Ok(TransmissionFunction { arity, inputs, output, table })
    }

    /// Builds the table by evaluating `f` on every input tuple (as indices).
    pub fn from_fn<F: FnMut(&[usize]) -> usize>(
        arity: usize,
        inputs: Vec<Alphabet>,
        output: Alphabet,
        mut f: F,
    ) -> Result<Self> {
        let size = domain_size(&inputs)
            .ok_or_else(|| Error::InvalidTransmission("input domain overflows".to_string()))?;
        let radices: Vec<usize> = inputs.iter().map(Alphabet::len).collect();
        let mut tuple = vec![0usize; radices.len()];
        let mut table = Vec::with_capacity(size);
        for i in 0..size {
            decode(i, &radices, &mut tuple);
            table.push(f(&tuple));
        }
        Self::new(arity, inputs, output, table)
    }

    pub fn identity(alphabet: Alphabet) -> Self {
        let table = (0..alphabet.len()).collect();
        TransmissionFunction { arity: 0, inputs: vec![alphabet.clone()], output: alphabet, table }
    }

    /// Leaf map that always emits output symbol `value`.
    pub fn constant(input: Alphabet, output: Alphabet, value: usize) -> Self {
        assert!(value < output.len(), "constant symbol out of range");
        let table = vec![value; input.len()];
        TransmissionFunction { arity: 0, inputs: vec![input], output, table }
    }

    /// Binary gate of arity `k` with the given truth function on bits.
    pub fn boolean_gate<F: Fn(&[usize]) -> bool>(k: usize, f: F) -> Self {
        let b = Alphabet::binary();
        Self::from_fn(k, vec![b.clone(); k], b, |x| usize::from(f(x))).expect("well-formed gate")
    }

    /// Outputs 0 iff every input is 0.
    pub fn or_gate(k: usize) -> Self {
        Self::boolean_gate(k, |x| x.contains(&1))
    }

    /// Outputs 1 iff every input is 1.
    pub fn and_gate(k: usize) -> Self {
        Self::boolean_gate(k, |x| x.iter().all(|&b| b == 1))
    }

    pub fn xor_gate(k: usize) -> Self {
        Self::boolean_gate(k, |x| x.iter().filter(|&&b| b == 1).count() % 2 == 1)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn inputs(&self) -> &[Alphabet] {
        &self.inputs
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn domain_size(&self) -> usize {
        self.table.len()
    }

    /// Output index for an input tuple given as symbol indices.
    pub fn eval(&self, tuple: &[usize]) -> usize {
        let mut idx = 0usize;
        for (x, a) in tuple.iter().zip(&self.inputs) {
            debug_assert!(*x < a.len());
            idx = idx * a.len() + x;
        }
        self.table[idx]
    }

    /// Decodes table position `index` into the input tuple.
    pub fn tuple_at(&self, index: usize) -> Vec<usize> {
        let radices: Vec<usize> = self.inputs.iter().map(Alphabet::len).collect();
        let mut t = vec![0; radices.len()];
        decode(index, &radices, &mut t);
        t
    }
}

fn domain_size(inputs: &[Alphabet]) -> Option<usize> {
    inputs.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
}

fn decode(mut index: usize, radices: &[usize], out: &mut [usize]) {
    for (slot, r) in out.iter_mut().zip(radices).rev() {
        *slot = index % r;
        index /= r;
    }
}

fn require_leaf_map(pair: &DistributionPair, tf: &TransmissionFunction) -> Result<()> {
    if tf.arity != 0 {
        return Err(Error::InvalidTransmission(alloc::format!(
            "leaf quantizer must have arity 0, got {}",
            tf.arity
        )));
    }
    if tf.inputs[0] != *pair.alphabet() {
        return Err(Error::InvalidTransmission(
            "quantizer input alphabet differs from the observation alphabet".to_string(),
        ));
    }
    Ok(())
}

/// Laws of `tf(X)` under both hypotheses over the full output alphabet.
pub fn pushforward(pair: &DistributionPair, tf: &TransmissionFunction) -> Result<(Vec<f64>, Vec<f64>)> {
    require_leaf_map(pair, tf)?;
    let mut q0 = vec![0.0; tf.output.len()];
    let mut q1 = vec![0.0; tf.output.len()];
    for (x, &y) in tf.table.iter().enumerate() {
        q0[y] += pair.p0()[x];
        q1[y] += pair.p1()[x];
    }
    Ok((q0, q1))
}

/// The pair `(P0^g, P1^g)`; output symbols that are never emitted are dropped.
pub fn induced_pair(pair: &DistributionPair, tf: &TransmissionFunction) -> Result<DistributionPair> {
    let (q0, q1) = pushforward(pair, tf)?;
    let mut symbols = Vec::new();
    let mut p0 = Vec::new();
    let mut p1 = Vec::new();
    for (i, (a, b)) in q0.iter().zip(&q1).enumerate() {
        if *a == 0.0 && *b == 0.0 {
            continue;
        }
        symbols.push(tf.output.symbol(i).to_string());
        p0.push(*a);
        p1.push(*b);
    }
    renormalize(&mut p0);
    renormalize(&mut p1);
    DistributionPair::new(Alphabet::new(symbols)?, p0, p1)
}

// Summing many masses can drift past the 1e-12 tolerance; the drift is
// rounding, not a modelling error, so fold it back.
fn renormalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    if s > 0.0 && s != 1.0 {
        p.iter_mut().for_each(|x| *x /= s);
    }
}

/// Returns `true` when the LLRQ with threshold `t` outputs 1 for the
/// normalized sum `sum / leaf_count`. Ties go to 0.
#[inline]
pub fn llrq_decides_one(sum: f64, leaf_count: f64, t: f64) -> bool {
    sum / leaf_count > t + TIE_TOLERANCE * t.abs().max(1.0)
}

/// 1-bit LLRQ: 0 if the normalized sum of incoming LLRs is at most `t`.
pub fn apply_llrq(t: f64, incoming_llrs: &[f64], subtree_leaf_count: usize) -> u8 {
    assert!(subtree_leaf_count > 0, "subtree must contain a leaf");
    let s: f64 = incoming_llrs.iter().sum();
    u8::from(llrq_decides_one(s, subtree_leaf_count as f64, t))
}

/// All total maps from the input domain to `output`, in lexicographic order of
/// their tables. With `canonicalize`, maps that differ only by a relabeling of
/// output symbols are reported once (first-use order of outputs).
pub fn enumerate_quantizers(
    arity: usize,
    inputs: &[Alphabet],
    output: &Alphabet,
    canonicalize: bool,
) -> Result<Vec<TransmissionFunction>> {
    enumerate_quantizers_capped(arity, inputs, output, canonicalize, ENUMERATION_CAP)
}

pub fn enumerate_quantizers_capped(
    arity: usize,
    inputs: &[Alphabet],
    output: &Alphabet,
    canonicalize: bool,
    cap: usize,
) -> Result<Vec<TransmissionFunction>> {
    let dom = domain_size(inputs).ok_or(Error::EnumerationTooLarge { size: f64::INFINITY, cap })?;
    let k = output.len();
    let count = libm::pow(k as f64, dom as f64);
    if count > cap as f64 {
        return Err(Error::EnumerationTooLarge { size: count, cap });
    }
    let count = count as usize;
    let radices = vec![k; dom];
    let mut table = vec![0usize; dom];
    let mut out = Vec::new();
    for i in 0..count {
        decode(i, &radices, &mut table);
        if canonicalize && !is_restricted_growth(&table) {
            continue;
        }
        out.push(TransmissionFunction::new(arity, inputs.to_vec(), output.clone(), table.clone())?);
    }
    Ok(out)
}

fn is_restricted_growth(table: &[usize]) -> bool {
    let mut next = 0usize;
    for &y in table {
        if y > next {
            return false;
        }
        if y == next {
            next += 1;
        }
    }
    true
}

/// Optimal exponent of the star configuration over a leaf family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelExponent {
    /// `-max D(P0^g || P1^g)`.
    pub g_p_star: f64,
    /// First maximizer in family order.
    pub index: usize,
}

pub fn parallel_exponent(pair: &DistributionPair, leaf_family: &[TransmissionFunction]) -> Result<ParallelExponent> {
    if leaf_family.is_empty() {
        return Err(Error::InvalidParams("leaf family is empty".to_string()));
    }
    let mut best = (0.0f64, 0usize);
    for (i, tf) in leaf_family.iter().enumerate() {
        let d = kl_divergence(&induced_pair(pair, tf)?, Direction::ZeroOne);
        if d > best.0 + TIE_EPSILON {
            best = (d, i);
        }
    }
    if best.0 <= 0.0 {
        return Err(Error::DegenerateFamily);
    }
    Ok(ParallelExponent { g_p_star: -best.0, index: best.1 })
}

/// Value of the fusion-loss infimum for one arity `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionLoss {
    pub k: usize,
    /// `inf (1/k) E0[ln dnu1/dnu0]` over gate and leaf choices.
    pub value: f64,
    /// Index of the minimizing gate in the relay family.
    pub gate_index: usize,
    /// Indices of the minimizing leaf quantizers.
    pub leaf_indices: Vec<usize>,
    /// Parallel exponent of the leaf family (0 when the family is degenerate).
    pub g_p_star: f64,
    /// `g_p_star < value`, i.e. fusing `k` messages strictly loses divergence.
    pub strict_loss: bool,
}

pub fn fusion_loss_constant(
    pair: &DistributionPair,
    leaf_family: &[TransmissionFunction],
    relay_family: &[TransmissionFunction],
    k: usize,
) -> Result<FusionLoss> {
    if k < 2 {
        return Err(Error::InvalidParams(alloc::format!("arity must exceed 1, got {k}")));
    }
    if leaf_family.is_empty() || relay_family.is_empty() {
        return Err(Error::InvalidParams("families must be non-empty".to_string()));
    }
    let combos = libm::pow(leaf_family.len() as f64, k as f64) * relay_family.len() as f64;
    if combos > ENUMERATION_CAP as f64 {
        return Err(Error::EnumerationTooLarge { size: combos, cap: ENUMERATION_CAP });
    }
    let laws: Vec<(Vec<f64>, Vec<f64>)> =
        leaf_family.iter().map(|tf| pushforward(pair, tf)).collect::<Result<_>>()?;
    for g in relay_family {
        if g.arity != k {
            return Err(Error::InvalidTransmission(alloc::format!(
                "relay map has arity {}, expected {k}",
                g.arity
            )));
        }
        for (a, leaf) in g.inputs.iter().zip(core::iter::repeat(leaf_family)) {
            if leaf.iter().any(|tf| tf.output != *a) {
                return Err(Error::InvalidTransmission(
                    "relay input alphabet differs from leaf output alphabet".to_string(),
                ));
            }
        }
    }
    let g_p_star = match parallel_exponent(pair, leaf_family) {
        Ok(p) => p.g_p_star,
        Err(Error::DegenerateFamily) => 0.0,
        Err(e) => return Err(e),
    };

    let n_leaf = leaf_family.len();
    let mut choice = vec![0usize; k];
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for (gi, gate) in relay_family.iter().enumerate() {
        let total = n_leaf.pow(k as u32);
        for c in 0..total {
            decode(c, &vec![n_leaf; k], &mut choice);
            let (nu0, nu1) = gate_law(gate, choice.iter().map(|&i| &laws[i]));
            let d: f64 = nu0.iter().zip(&nu1).map(|(a, b)| xlogy_ratio(*a, *b)).sum();
            let value = -d.max(0.0) / k as f64;
            if best.as_ref().map_or(true, |b| value < b.0 - TIE_EPSILON) {
                best = Some((value, gi, choice.clone()));
            }
        }
    }
    let (value, gate_index, leaf_indices) = best.expect("non-empty enumeration");
    Ok(FusionLoss { k, value, gate_index, leaf_indices, g_p_star, strict_loss: g_p_star < value - TIE_EPSILON })
}

/// Output law of `gate` when its inputs are independent with the given laws.
pub fn gate_law<'a, I>(gate: &TransmissionFunction, input_laws: I) -> (Vec<f64>, Vec<f64>)
where
    I: IntoIterator<Item = &'a (Vec<f64>, Vec<f64>)>,
{
    let laws: Vec<&(Vec<f64>, Vec<f64>)> = input_laws.into_iter().collect();
    let mut nu0 = vec![0.0; gate.output.len()];
    let mut nu1 = vec![0.0; gate.output.len()];
    for idx in 0..gate.table.len() {
        let tuple = gate.tuple_at(idx);
        let mut m0 = 1.0;
        let mut m1 = 1.0;
        for (x, law) in tuple.iter().zip(&laws) {
            m0 *= law.0[*x];
            m1 *= law.1[*x];
        }
        nu0[gate.table[idx]] += m0;
        nu1[gate.table[idx]] += m1;
    }
    (nu0, nu1)
}

/// Candidate transmission functions per arity. Arity 0 is the leaf family.
/// LLRQs are always available to relays and are not stored here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuantizerFamily {
    by_arity: BTreeMap<usize, Vec<TransmissionFunction>>,
}

impl QuantizerFamily {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every deterministic leaf map and every deterministic relay map up to
    /// `max_arity`.
    pub fn all_deterministic(observation: &Alphabet, message: &Alphabet, max_arity: usize) -> Result<Self> {
        let mut fam = Self::new();
        fam.insert(0, enumerate_quantizers(0, core::slice::from_ref(observation), message, false)?);
        for d in 1..=max_arity {
            fam.insert(d, enumerate_quantizers(d, &vec![message.clone(); d], message, false)?);
        }
        Ok(fam)
    }

    pub fn insert(&mut self, arity: usize, maps: Vec<TransmissionFunction>) {
        self.by_arity.insert(arity, maps);
    }

    pub fn leaf(&self) -> &[TransmissionFunction] {
        self.relay(0)
    }

    pub fn relay(&self, arity: usize) -> &[TransmissionFunction] {
        self.by_arity.get(&arity).map_or(&[], Vec::as_slice)
    }
}

/// `-D(P0^g || P1^g)` for a leaf map; convenience for reports.
pub fn per_leaf_exponent(pair: &DistributionPair, tf: &TransmissionFunction) -> Result<f64> {
    Ok(-kl_divergence(&induced_pair(pair, tf)?, Direction::ZeroOne))
}

/// Natural log of the likelihood ratio of each output symbol of a law pair.
pub fn law_llrs(q0: &[f64], q1: &[f64]) -> Vec<f64> {
    q0.iter().zip(q1).map(|(a, b)| if *a == 0.0 { 0.0 } else { ln(b / a) }).collect()
}
