//! Monte Carlo estimation with per-trial counter streams.
//!
//! Every (hypothesis, trial) pair owns its own ChaCha stream derived from the
//! seed, and draws are consumed in a fixed node order, so a trial's outcome
//! does not depend on which thread runs it or in what order.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::exact::{evaluate_exact, ExactOptions};
use super::{ErrorEstimate, Method};
use crate::channels::{llrq_decides_one, TransmissionFunction};
use crate::error::Result;
use crate::hypothesis::Hypothesis;
use crate::math::{ln, sqrt};
use crate::strategy::{RelayRule, Strategy};
use crate::topology::Tree;
use crate::DistributionPair;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Llrq { threshold: f64, leaves: f64 },
    Gate(usize),
}

/// Precomputed propagation schedule for one (tree, strategy, pair).
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    /// Active nodes, predecessors before successors.
    order: Vec<usize>,
    ops: Vec<Op>,
    parent: Vec<usize>,
    /// `llr[v][y]`: LLR attached to symbol `y` sent by node `v`, shared
    /// across nodes with identical subtrees via `table_of`.
    tables: Vec<Vec<f64>>,
    table_of: Vec<u32>,
    children: Vec<Vec<usize>>,
    gates: Vec<TransmissionFunction>,
    leaf_map: Vec<usize>,
    cdf: [Vec<f64>; 2],
    n: usize,
    base: ChaCha8Rng,
}

/// Per-worker buffers reused across trials.
#[derive(Debug, Clone)]
pub struct TrialScratch {
    sum: Vec<f64>,
    sym: Vec<usize>,
    gate_input: Vec<usize>,
}

impl SimulationPlan {
    /// Relay LLR tables come from the exact message laws, so the relays
    /// behave exactly as in [`evaluate_exact`].
    pub fn new(tree: &Tree, strategy: &Strategy, pair: &DistributionPair, seed: u64) -> Result<Self> {
        let opts = ExactOptions { skip_root: true, ..Default::default() };
        let ev = evaluate_exact(tree, strategy, pair, &opts)?;
        let n = tree.n();
        let mut order = Vec::new();
        let mut ops = vec![Op::Leaf; n];
        let mut parent = vec![usize::MAX; n];
        let mut table_of = vec![0u32; n];
        let mut tables: Vec<Vec<f64>> = Vec::new();
        let mut table_ids: alloc::collections::BTreeMap<u32, u32> = alloc::collections::BTreeMap::new();
        let mut children = vec![Vec::new(); n];
        let mut gates = Vec::new();
        for &v in tree.bfs_order().iter().rev() {
            if !ev.is_active(v) {
                continue;
            }
            order.push(v);
            if let Some(p) = tree.parent(v) {
                parent[v] = p;
            }
            if v != 0 {
                let sig = ev.signature(v).unwrap();
                let id = *table_ids.entry(sig).or_insert_with(|| {
                    tables.push(ev.message_law(v).unwrap().llrs());
                    (tables.len() - 1) as u32
                });
                table_of[v] = id;
            }
            if tree.is_leaf(v) {
                continue;
            }
            let level = tree.level(v);
            ops[v] = match strategy.rule(level) {
                RelayRule::Llrq { threshold } => Op::Llrq { threshold, leaves: ev.active_leaves(v) as f64 },
                RelayRule::Gate(g) => {
                    children[v] = tree.children(v).to_vec();
                    gates.push(g);
                    Op::Gate(gates.len() - 1)
                }
            };
        }
        let cdf = |p: &[f64]| {
            let mut acc = 0.0;
            p.iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        Ok(SimulationPlan {
            order,
            ops,
            parent,
            tables,
            table_of,
            children,
            gates,
            leaf_map: strategy.leaf.table().to_vec(),
            cdf: [cdf(pair.p0()), cdf(pair.p1())],
            n,
            base: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn scratch(&self) -> TrialScratch {
        TrialScratch { sum: vec![0.0; self.n], sym: vec![0; self.n], gate_input: Vec::new() }
    }

    /// Runs one trial; returns `true` when the root decides H1.
    pub fn simulate_trial(&self, scratch: &mut TrialScratch, h: Hypothesis, trial: u64) -> bool {
        let mut rng = self.base.clone();
        rng.set_stream(trial.wrapping_mul(2).wrapping_add(h.index() as u64));
        rng.set_word_pos(0);
        let cdf = &self.cdf[h.index()];
        let last = cdf.len() - 1;
        for &v in &self.order {
            scratch.sum[v] = 0.0;
        }
        for &v in &self.order {
            let sym = match &self.ops[v] {
                Op::Leaf => {
                    let u: f64 = rng.random();
                    let x = cdf.partition_point(|&c| c <= u).min(last);
                    self.leaf_map[x]
                }
                Op::Llrq { threshold, leaves } => {
                    let one = llrq_decides_one(scratch.sum[v], *leaves, *threshold);
                    if v == 0 {
                        return one;
                    }
                    usize::from(one)
                }
                Op::Gate(g) => {
                    scratch.gate_input.clear();
                    scratch.gate_input.extend(self.children[v].iter().map(|&c| scratch.sym[c]));
                    self.gates[*g].eval(&scratch.gate_input)
                }
            };
            scratch.sym[v] = sym;
            scratch.sum[self.parent[v]] += self.tables[self.table_of[v] as usize][sym];
        }
        unreachable!("the root is always visited last")
    }

    /// Counts errors over `trials` consecutive trial indices from `first`.
    pub fn run(&self, first: u64, trials: u64) -> Tally {
        let mut s = self.scratch();
        let mut t = Tally::default();
        for i in first..first + trials {
            t.trials += 1;
            if self.simulate_trial(&mut s, Hypothesis::H0, i) {
                t.type_i += 1;
            }
            if !self.simulate_trial(&mut s, Hypothesis::H1, i) {
                t.type_ii += 1;
            }
        }
        t
    }
}

/// Error counts; addition merges results from disjoint trial ranges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub trials: u64,
    pub type_i: u64,
    pub type_ii: u64,
}

impl core::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally { trials: self.trials + o.trials, type_i: self.type_i + o.type_i, type_ii: self.type_ii + o.type_ii }
    }
}

impl Tally {
    pub fn estimate(&self) -> ErrorEstimate {
        let n = self.trials.max(1) as f64;
        let (pi, pii) = (self.type_i as f64 / n, self.type_ii as f64 / n);
        ErrorEstimate {
            type_i: pi,
            type_ii: pii,
            ln_type_i: ln(pi),
            ln_type_ii: ln(pii),
            method: Method::MonteCarlo,
            trials: self.trials,
            std_error_i: sqrt(pi * (1.0 - pi) / n),
            std_error_ii: sqrt(pii * (1.0 - pii) / n),
        }
    }
}

/// Sequential Monte Carlo over trials `0..trials`.
pub fn monte_carlo_error(
    tree: &Tree,
    strategy: &Strategy,
    pair: &DistributionPair,
    trials: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    if trials == 0 {
        return Err(crate::Error::InvalidParams("at least one trial is required".into()));
    }
    Ok(SimulationPlan::new(tree, strategy, pair, seed)?.run(0, trials).estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::ThresholdVector;
    use crate::strategy::build_relay_strategy;
    use crate::topology::TreeFamily;

    fn setup() -> (Tree, Strategy, DistributionPair) {
        let p = DistributionPair::bernoulli(0.25, 0.75).unwrap();
        let id = TransmissionFunction::identity(p.alphabet().clone());
        let t = TreeFamily::Parallel.generate(3).unwrap();
        let s = build_relay_strategy(&t, &p, &id, &ThresholdVector(vec![0.0])).unwrap();
        (t, s, p)
    }

    #[test]
    fn two_leaf_estimate() {
        let (t, s, p) = setup();
        let e = monte_carlo_error(&t, &s, &p, 200_000, 7).unwrap();
        assert!((e.type_i - 0.0625).abs() <= 4.0 * sqrt(0.0625 * 0.9375 / 200_000.0));
        assert!((e.type_ii - 0.4375).abs() <= 4.0 * sqrt(0.4375 * 0.5625 / 200_000.0));
    }

    #[test]
    fn determinism_and_single_trial() {
        let (t, s, p) = setup();
        assert_eq!(monte_carlo_error(&t, &s, &p, 1000, 3), monte_carlo_error(&t, &s, &p, 1000, 3));
        let one = monte_carlo_error(&t, &s, &p, 1, 11).unwrap();
        assert!(one.type_i == 0.0 || one.type_i == 1.0);
        let plan = SimulationPlan::new(&t, &s, &p, 5).unwrap();
        assert_eq!(plan.run(0, 600), plan.run(0, 250) + plan.run(250, 350));
    }
}
