//! Exact error probabilities by bottom-up convolution.
//!
//! Nodes whose subtrees are identical (same structure, rules and active leaf
//! counts) share one signature, so each distinct subtree is evaluated once.
//! `m` identical 2-point children are combined with a single binomial.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::law::{MessageLaw, SymbolLaw};
use super::{ErrorEstimate, Method};
use crate::channels::{llrq_decides_one, pushforward, TransmissionFunction};
use crate::error::{Error, Result};
use crate::math::{exp, exp_m1, ln_1m_exp, ln_add_exp, ln_sum_exp};
use crate::strategy::{RelayRule, Strategy};
use crate::topology::Tree;
use crate::DistributionPair;

/// Default bound on the atoms a single convolution may produce.
pub const STATE_SPACE_CAP: usize = 10_000_000;

#[derive(Debug, Clone)]
pub struct ExactOptions {
    pub cap: usize,
    /// Nodes flagged here send nothing; a relay all of whose predecessors are
    /// idle is idle too. LLRQs normalize by their active leaf count.
    pub idle: Option<Vec<bool>>,
    /// Skip the root sum law (only relay message laws are needed).
    pub skip_root: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { cap: STATE_SPACE_CAP, idle: None, skip_root: false }
    }
}

/// Log-probabilities of the two LLRQ error events at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTail {
    /// `ln P1(S(v)/l(v) <= t)`.
    pub ln_p1_low: f64,
    /// `ln P0(S(v)/l(v) > t)`.
    pub ln_p0_high: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SigKey {
    Leaf,
    Llrq { level: usize, leaves: usize, children: Vec<(u32, usize)> },
    Gate { level: usize, children: Vec<u32> },
}

#[derive(Debug, Clone)]
struct SigData {
    message: SymbolLaw,
    tail: Option<NodeTail>,
}

/// Everything the bottom-up pass computed.
#[derive(Debug, Clone)]
pub struct ExactEvaluation {
    sig_of: Vec<Option<u32>>,
    active_leaves: Vec<usize>,
    sigs: Vec<SigData>,
    root_law: Option<MessageLaw>,
    root_threshold: f64,
}

fn split_law(law: &MessageLaw, leaves: usize, t: f64) -> (SymbolLaw, NodeTail) {
    let atoms = law.atoms();
    let l = leaves as f64;
    let split = atoms.partition_point(|a| !llrq_decides_one(a.value, l, t));
    // Rounding can push the log of a full-mass sum slightly above 0.
    let part = |r: &[super::Atom], h1: bool| ln_sum_exp(r.iter().map(|a| if h1 { a.ln_p1 } else { a.ln_p0 })).min(0.0);
    let (lo0, lo1) = (part(&atoms[..split], false), part(&atoms[..split], true));
    let (hi0, hi1) = (part(&atoms[split..], false), part(&atoms[split..], true));
    (SymbolLaw { ln_p0: vec![lo0, hi0], ln_p1: vec![lo1, hi1] }, NodeTail { ln_p1_low: lo1, ln_p0_high: hi0 })
}

fn gate_symbol_law(gate: &TransmissionFunction, inputs: &[&SymbolLaw], cap: usize) -> Result<SymbolLaw> {
    if gate.domain_size() > cap {
        return Err(Error::StateSpaceTooLarge { atoms: gate.domain_size(), cap });
    }
    for (a, law) in gate.inputs().iter().zip(inputs) {
        if a.len() != law.len() {
            return Err(Error::InvalidTransmission("gate input alphabet does not match incoming messages".to_string()));
        }
    }
    let k = gate.output().len();
    let mut out = SymbolLaw { ln_p0: vec![f64::NEG_INFINITY; k], ln_p1: vec![f64::NEG_INFINITY; k] };
    for idx in 0..gate.domain_size() {
        let tuple = gate.tuple_at(idx);
        let (mut m0, mut m1) = (0.0, 0.0);
        for (x, law) in tuple.iter().zip(inputs) {
            m0 += law.ln_p0[*x];
            m1 += law.ln_p1[*x];
        }
        let y = gate.table()[idx];
        out.ln_p0[y] = ln_add_exp(out.ln_p0[y], m0);
        out.ln_p1[y] = ln_add_exp(out.ln_p1[y], m1);
    }
    Ok(out)
}

/// Runs the bottom-up pass. The tree must be h-uniform with `h` equal to the
/// strategy height.
pub fn evaluate_exact(
    tree: &Tree,
    strategy: &Strategy,
    pair: &DistributionPair,
    options: &ExactOptions,
) -> Result<ExactEvaluation> {
    if !tree.is_uniform() {
        return Err(Error::NotUniform);
    }
    let h = tree.height();
    if strategy.height() != h {
        return Err(Error::InvalidParams(alloc::format!(
            "strategy has height {}, tree has height {h}",
            strategy.height()
        )));
    }
    let n = tree.n();
    if let Some(idle) = &options.idle {
        if idle.len() != n {
            return Err(Error::InvalidParams("idle mask length differs from node count".to_string()));
        }
    }
    let (q0, q1) = pushforward(pair, &strategy.leaf)?;
    let leaf_law = SymbolLaw::from_probs(&q0, &q1);
    let rules: Vec<RelayRule> = (1..=h).map(|k| strategy.rule(k)).collect();

    let mut index: BTreeMap<SigKey, u32> = BTreeMap::new();
    let mut sigs: Vec<SigData> = Vec::new();
    let mut sig_of: Vec<Option<u32>> = vec![None; n];
    let mut active_leaves = vec![0usize; n];
    let mut root_law = None;

    for &v in tree.bfs_order().iter().rev() {
        let masked = options.idle.as_ref().is_some_and(|m| m[v]);
        if masked {
            continue;
        }
        if tree.is_leaf(v) {
            active_leaves[v] = 1;
            let id = *index.entry(SigKey::Leaf).or_insert_with(|| {
                sigs.push(SigData { message: leaf_law.clone(), tail: None });
                (sigs.len() - 1) as u32
            });
            sig_of[v] = Some(id);
            continue;
        }
        let kids: Vec<u32> = tree.children(v).iter().filter_map(|&c| sig_of[c]).collect();
        if kids.is_empty() {
            continue;
        }
        let leaves: usize = tree.children(v).iter().map(|&c| active_leaves[c]).sum();
        active_leaves[v] = leaves;
        let level = tree.level(v);
        let is_root = v == 0;
        let key = match &rules[level - 1] {
            RelayRule::Llrq { .. } => {
                let mut sorted = kids.clone();
                sorted.sort_unstable();
                let mut groups: Vec<(u32, usize)> = Vec::new();
                for s in sorted {
                    match groups.last_mut() {
                        Some((g, c)) if *g == s => *c += 1,
                        _ => groups.push((s, 1)),
                    }
                }
                SigKey::Llrq { level, leaves, children: groups }
            }
            RelayRule::Gate(g) => {
                if kids.len() != tree.children(v).len() || kids.len() != g.arity() {
                    return Err(Error::InvalidParams(alloc::format!(
                        "gate of arity {} at node {v} with {} active predecessors",
                        g.arity(),
                        kids.len()
                    )));
                }
                SigKey::Gate { level, children: kids.clone() }
            }
        };
        if let Some(&id) = index.get(&key) {
            sig_of[v] = Some(id);
            continue;
        }
        let data = match (&key, &rules[level - 1]) {
            (SigKey::Llrq { children, .. }, RelayRule::Llrq { threshold }) => {
                if is_root && options.skip_root {
                    SigData { message: SymbolLaw { ln_p0: vec![], ln_p1: vec![] }, tail: None }
                } else {
                    let mut sum = MessageLaw::zero();
                    for &(s, count) in children {
                        let part = sigs[s as usize].message.to_message_law().power(count, options.cap)?;
                        sum = sum.convolve(&part, options.cap)?;
                    }
                    let (message, tail) = split_law(&sum, leaves, *threshold);
                    if is_root {
                        root_law = Some(sum);
                    }
                    SigData { message, tail: Some(tail) }
                }
            }
            (SigKey::Gate { children, .. }, RelayRule::Gate(g)) => {
                let inputs: Vec<&SymbolLaw> = children.iter().map(|&s| &sigs[s as usize].message).collect();
                SigData { message: gate_symbol_law(g, &inputs, options.cap)?, tail: None }
            }
            _ => unreachable!("key built from the same rule"),
        };
        sigs.push(data);
        let id = (sigs.len() - 1) as u32;
        index.insert(key, id);
        sig_of[v] = Some(id);
    }
    if sig_of[0].is_none() {
        return Err(Error::EmptyAfterPrune);
    }
    Ok(ExactEvaluation { sig_of, active_leaves, sigs, root_law, root_threshold: strategy.root_threshold() })
}

impl ExactEvaluation {
    /// Law of `S(f)`, the sum of LLRs arriving at the root.
    pub fn root_law(&self) -> &MessageLaw {
        self.root_law.as_ref().expect("root law was not computed")
    }

    pub fn active_leaves(&self, v: usize) -> usize {
        self.active_leaves[v]
    }

    pub fn is_active(&self, v: usize) -> bool {
        self.sig_of[v].is_some()
    }

    /// Number of distinct subtrees that were evaluated.
    pub fn distinct_subtrees(&self) -> usize {
        self.sigs.len()
    }

    /// Shared-subtree id of an active node.
    pub fn signature(&self, v: usize) -> Option<u32> {
        self.sig_of[v]
    }

    /// Law of the message node `v` sends (for the root: its decision).
    pub fn message_law(&self, v: usize) -> Option<&SymbolLaw> {
        self.sig_of[v].map(|s| &self.sigs[s as usize].message)
    }

    /// Error events of an active LLRQ node at its own threshold.
    pub fn node_tail(&self, v: usize) -> Option<NodeTail> {
        self.sig_of[v].and_then(|s| self.sigs[s as usize].tail)
    }

    /// Root errors at the strategy's root threshold.
    pub fn errors(&self) -> ErrorEstimate {
        self.errors_at(self.root_threshold)
    }

    /// Root errors if the root used threshold `t` instead.
    pub fn errors_at(&self, t: f64) -> ErrorEstimate {
        let (_, tail) = split_law(self.root_law(), self.active_leaves[0], t);
        ErrorEstimate {
            type_i: exp(tail.ln_p0_high),
            type_ii: exp(tail.ln_p1_low),
            ln_type_i: tail.ln_p0_high,
            ln_type_ii: tail.ln_p1_low,
            method: Method::Exact,
            trials: 0,
            std_error_i: 0.0,
            std_error_ii: 0.0,
        }
    }
}

/// Root rule "declare H0 iff every one of `relays` independent identical
/// relays sends 0", evaluated in closed form so `relays` may be astronomically
/// large. `relay` is the 1-bit law each relay sends.
pub fn all_zero_fusion(relay: &SymbolLaw, relays: f64) -> ErrorEstimate {
    let ln_ii = relays * relay.ln_p1[0];
    let ln_keep0 = relays * relay.ln_p0[0];
    // 1 - exp(x) computed without cancellation.
    let type_i = -exp_m1(ln_keep0);
    ErrorEstimate {
        type_i,
        type_ii: exp(ln_ii),
        ln_type_i: ln_1m_exp(ln_keep0),
        ln_type_ii: ln_ii,
        method: Method::Exact,
        trials: 0,
        std_error_i: 0.0,
        std_error_ii: 0.0,
    }
}

pub fn exact_error_probs(tree: &Tree, strategy: &Strategy, pair: &DistributionPair) -> Result<ErrorEstimate> {
    Ok(evaluate_exact(tree, strategy, pair, &ExactOptions::default())?.errors())
}
