//! Relay strategies: leaf quantizer, per-level relay rules and the fusion
//! threshold, plus the single-threshold recipe and Neyman-Pearson calibration.

use alloc::vec::Vec;

use crate::channels::{induced_pair, llrq_decides_one, parallel_exponent, TransmissionFunction};
use crate::error::{Error, Result};
use crate::evaluate::exact::{evaluate_exact, ExactOptions};
use crate::evaluate::law::MessageLaw;
use crate::hypothesis::{kl_divergence, Direction, DistributionPair};
use crate::math::exp;
use crate::rates::{RateTable, ThresholdVector};
use crate::topology::{uniformize, Tree};

/// What a relay at a given level does with its incoming messages.
#[derive(Debug, Clone, PartialEq)]
pub enum RelayRule {
    /// 1-bit LLRQ: 0 iff (sum of incoming LLRs) / l(v) <= threshold.
    Llrq { threshold: f64 },
    /// A fixed map of the incoming message tuple (children in id order).
    Gate(TransmissionFunction),
}

/// A relay strategy for an h-uniform tree. Leaves all use `leaf`; every
/// level-k relay (`1 <= k < h`) uses `relays[k - 1]`; the root is an LLRQ
/// declaring H1 on output 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub leaf: TransmissionFunction,
    pub relays: Vec<RelayRule>,
    pub fusion_threshold: f64,
    /// Replaces `fusion_threshold` when set, e.g. after calibration.
    pub root_override: Option<f64>,
}

impl Strategy {
    pub fn new(leaf: TransmissionFunction, relays: Vec<RelayRule>, fusion_threshold: f64) -> Self {
        Strategy { leaf, relays, fusion_threshold, root_override: None }
    }

    pub fn height(&self) -> usize {
        self.relays.len() + 1
    }

    pub fn root_threshold(&self) -> f64 {
        self.root_override.unwrap_or(self.fusion_threshold)
    }

    /// Rule at level `k` in `1..=h`; the root reports its LLRQ.
    pub fn rule(&self, k: usize) -> RelayRule {
        if k == self.height() {
            RelayRule::Llrq { threshold: self.root_threshold() }
        } else {
            self.relays[k - 1].clone()
        }
    }

    /// Per-level thresholds when every level is an LLRQ.
    pub fn thresholds(&self) -> Option<ThresholdVector> {
        let mut t = Vec::with_capacity(self.height());
        for r in &self.relays {
            match r {
                RelayRule::Llrq { threshold } => t.push(*threshold),
                RelayRule::Gate(_) => return None,
            }
        }
        t.push(self.root_threshold());
        Some(ThresholdVector(t))
    }

    /// No relay uses an own observation; always the case for this type.
    pub fn is_relay_strategy(&self) -> bool {
        true
    }

    pub fn with_root_threshold(mut self, t: f64) -> Self {
        self.root_override = Some(t);
        self
    }
}

/// Same leaf map everywhere and an LLRQ with threshold `t_k` at level `k`,
/// after checking feasibility of the thresholds.
pub fn build_relay_strategy(
    tree: &Tree,
    pair: &DistributionPair,
    gamma: &TransmissionFunction,
    thresholds: &ThresholdVector,
) -> Result<Strategy> {
    if !tree.is_uniform() {
        return Err(Error::NotUniform);
    }
    if thresholds.len() != tree.height() {
        return Err(Error::InvalidParams(alloc::format!(
            "{} thresholds for a tree of height {}",
            thresholds.len(),
            tree.height()
        )));
    }
    RateTable::new(pair, gamma, thresholds)?;
    let h = thresholds.len();
    let relays = (1..h).map(|k| RelayRule::Llrq { threshold: thresholds.level(k) }).collect();
    Ok(Strategy::new(gamma.clone(), relays, thresholds.level(h)))
}

/// Output of [`simple_strategy`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleStrategy {
    /// Uniformized tree the strategy runs on.
    pub tree: Tree,
    /// Old node id to id in `tree`.
    pub mapping: Vec<usize>,
    pub strategy: Strategy,
    pub gamma_index: usize,
    /// The common threshold `-D(P0^g||P1^g) + epsilon/2`.
    pub threshold: f64,
}

/// One leaf quantizer within `epsilon/2` of the best, and the common
/// threshold `-D(P0^g||P1^g) + epsilon/2` at every level of the uniformized
/// tree.
pub fn simple_strategy(
    tree: &Tree,
    pair: &DistributionPair,
    leaf_family: &[TransmissionFunction],
    epsilon: f64,
) -> Result<SimpleStrategy> {
    let best = parallel_exponent(pair, leaf_family)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams(alloc::format!("epsilon must be positive, got {epsilon}")));
    }
    if epsilon >= -best.g_p_star {
        return Err(Error::EpsilonTooLarge { epsilon, limit: -best.g_p_star });
    }
    let mut chosen = None;
    for (i, tf) in leaf_family.iter().enumerate() {
        let d = kl_divergence(&induced_pair(pair, tf)?, Direction::ZeroOne);
        if -d <= best.g_p_star + epsilon / 2.0 {
            chosen = Some((i, d));
            break;
        }
    }
    let (gamma_index, d) = chosen.expect("the maximizer always qualifies");
    let threshold = -d + epsilon / 2.0;
    let u = uniformize(tree);
    let thresholds = ThresholdVector::uniform(threshold, u.tree.height());
    let strategy = build_relay_strategy(&u.tree, pair, &leaf_family[gamma_index], &thresholds)?;
    Ok(SimpleStrategy { tree: u.tree, mapping: u.mapping, strategy, gamma_index, threshold })
}

/// Result of choosing the root threshold for a Type I constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub strategy: Strategy,
    pub threshold: f64,
    pub type_i: f64,
    pub type_ii: f64,
    pub ln_type_i: f64,
    pub ln_type_ii: f64,
}

/// Smallest achievable root threshold `t = s / l(f)`, `s` an atom of the root
/// sum, with exact Type I error at most `alpha`.
pub fn calibrate_root_law(law: &MessageLaw, leaves: usize, alpha: f64) -> Result<(f64, f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(alloc::format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let atoms = law.atoms();
    let l = leaves as f64;
    let ln_alpha = crate::math::ln(alpha);
    // Suffix log-sums of P0 and prefix log-sums of P1.
    let n = atoms.len();
    let mut suffix0 = alloc::vec![f64::NEG_INFINITY; n + 1];
    for i in (0..n).rev() {
        suffix0[i] = crate::math::ln_add_exp(suffix0[i + 1], atoms[i].ln_p0);
    }
    let mut prefix1 = alloc::vec![f64::NEG_INFINITY; n + 1];
    for i in 0..n {
        prefix1[i + 1] = crate::math::ln_add_exp(prefix1[i], atoms[i].ln_p1);
    }
    for a in atoms {
        let t = a.value / l;
        let split = atoms.partition_point(|b| !llrq_decides_one(b.value, l, t));
        if suffix0[split] <= ln_alpha {
            return Ok((t, suffix0[split].min(0.0), prefix1[split].min(0.0)));
        }
    }
    Err(Error::Unachievable { alpha })
}

/// Replaces the root threshold by the calibrated one, using the exact
/// evaluator for the root law.
pub fn np_calibrate_root(tree: &Tree, strategy: &Strategy, pair: &DistributionPair, alpha: f64) -> Result<Calibration> {
    let ev = evaluate_exact(tree, strategy, pair, &ExactOptions::default())?;
    let (t, ln_i, ln_ii) = calibrate_root_law(ev.root_law(), ev.active_leaves(0), alpha)?;
    Ok(Calibration {
        strategy: strategy.clone().with_root_threshold(t),
        threshold: t,
        type_i: exp(ln_i),
        type_ii: exp(ln_ii),
        ln_type_i: ln_i,
        ln_type_ii: ln_ii,
    })
}
