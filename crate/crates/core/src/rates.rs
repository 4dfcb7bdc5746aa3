//! Log-moment generating functions, Fenchel-Legendre transforms and the
//! per-level rate recursion for 1-bit relay trees.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::channels::{induced_pair, TransmissionFunction};
use crate::error::{Error, Result};
use crate::hypothesis::{kl_divergence, Direction, DistributionPair, Hypothesis};
use crate::math::ln_sum_exp;
use crate::topology::Tree;

/// Maximum ternary-search iterations.
pub const MAX_ITERATIONS: usize = 200;
/// Stop once the search bracket is narrower than this.
pub const LAMBDA_TOLERANCE: f64 = 1e-10;
/// Allowed disagreement between the closed-form recursion and the numeric
/// transform.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-8;

/// `ln E_j[(p1/p0)^lambda]`.
pub fn log_mgf(pair: &DistributionPair, j: Hypothesis, lambda: f64) -> f64 {
    let llr = pair.llr_values();
    ln_sum_exp(
        pair.probs(j)
            .iter()
            .zip(&llr)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| crate::math::ln(*p) + lambda * l),
    )
}

/// `sup_{lambda in [lo, hi]} (lambda t - f(lambda))` for convex `f`, with
/// the maximizing `lambda`.
pub fn fenchel_legendre<F: Fn(f64) -> f64>(f: F, t: f64, domain: (f64, f64)) -> (f64, f64) {
    let g = |x: f64| x * t - f(x);
    let (mut lo, mut hi) = domain;
    let mut best = (g(lo), lo);
    let g_hi = g(hi);
    if g_hi > best.0 {
        best = (g_hi, hi);
    }
    for _ in 0..MAX_ITERATIONS {
        if hi - lo < LAMBDA_TOLERANCE {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let (g1, g2) = (g(m1), g(m2));
        if g1 > best.0 {
            best = (g1, m1);
        }
        if g2 > best.0 {
            best = (g2, m2);
        }
        if g1 < g2 {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mid = 0.5 * (lo + hi);
    let gm = g(mid);
    if gm > best.0 {
        best = (gm, mid);
    }
    best
}

/// Search domain for hypothesis `j`: `[0, 1]` for H0 and `[-1, 0]` for H1.
pub fn lambda_domain(j: Hypothesis) -> (f64, f64) {
    match j {
        Hypothesis::H0 => (0.0, 1.0),
        Hypothesis::H1 => (-1.0, 0.0),
    }
}

/// Per-level thresholds `t_1..t_h`, in nats per leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector(pub Vec<f64>);

impl ThresholdVector {
    pub fn uniform(t: f64, h: usize) -> Self {
        ThresholdVector(alloc::vec![t; h])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Threshold of level `k` (1-based).
    pub fn level(&self, k: usize) -> f64 {
        self.0[k - 1]
    }
}

/// Open interval `(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lower < t && t < self.upper
    }
}

/// `(-D(P0^g||P1^g), D(P1^g||P0^g))`; empty when `g` is uninformative.
pub fn level_one_interval(pair: &DistributionPair, gamma: &TransmissionFunction) -> Result<Interval> {
    let q = induced_pair(pair, gamma)?;
    Ok(Interval { lower: -kl_divergence(&q, Direction::ZeroOne), upper: kl_divergence(&q, Direction::OneZero) })
}

/// Interval for the first threshold not covered by `partial`.
pub fn feasible_threshold_interval(
    pair: &DistributionPair,
    gamma: &TransmissionFunction,
    partial: Option<&RateTable>,
) -> Result<Interval> {
    match partial {
        None => level_one_interval(pair, gamma),
        Some(t) if t.height() == 0 => level_one_interval(pair, gamma),
        Some(t) => {
            let k = t.height();
            Ok(Interval { lower: -t.rate(Hypothesis::H1, k), upper: t.rate(Hypothesis::H0, k) })
        }
    }
}

/// `max{-r1 (j + lambda), r0 (j - 1 + lambda)}`: the envelope bounding the
/// normalized log-MGF of a level-k message.
pub fn envelope(r0: f64, r1: f64, j: Hypothesis, lambda: f64) -> f64 {
    let jf = j.index() as f64;
    (-r1 * (jf + lambda)).max(r0 * (jf - 1.0 + lambda))
}

/// Rates `Lambda*_{j,k}` for `k = 1..h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    gamma: TransmissionFunction,
    thresholds: ThresholdVector,
    rate0: Vec<f64>,
    rate1: Vec<f64>,
    /// Largest closed-form vs numeric disagreement over levels `k >= 2`.
    pub max_cross_check_deviation: f64,
}

impl RateTable {
    /// Computes level 1 numerically and higher levels by the closed-form
    /// recursion, cross-checking each against the numeric transform.
    /// Thresholds are validated level by level, never clamped.
    pub fn new(pair: &DistributionPair, gamma: &TransmissionFunction, thresholds: &ThresholdVector) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidParams("at least one threshold is required".to_string()));
        }
        let q = induced_pair(pair, gamma)?;
        let i1 = level_one_interval(pair, gamma)?;
        let t1 = thresholds.level(1);
        if !i1.contains(t1) {
            return Err(Error::InfeasibleThreshold { level: 1, value: t1, lower: i1.lower, upper: i1.upper });
        }
        let (r0, _) = fenchel_legendre(|l| log_mgf(&q, Hypothesis::H0, l), t1, lambda_domain(Hypothesis::H0));
        let (r1, _) = fenchel_legendre(|l| log_mgf(&q, Hypothesis::H1, l), t1, lambda_domain(Hypothesis::H1));
        let mut rate0 = alloc::vec![r0];
        let mut rate1 = alloc::vec![r1];
        let mut max_dev = 0.0f64;
        for k in 2..=thresholds.len() {
            let (a0, a1) = (rate0[k - 2], rate1[k - 2]);
            let tk = thresholds.level(k);
            if !(-a1 < tk && tk < a0) {
                return Err(Error::InfeasibleThreshold { level: k, value: tk, lower: -a1, upper: a0 });
            }
            let s = a0 + a1;
            let c1 = a1 * (a0 - tk) / s;
            let c0 = a0 * (a1 + tk) / s;
            let (n0, _) = fenchel_legendre(|l| envelope(a0, a1, Hypothesis::H0, l), tk, lambda_domain(Hypothesis::H0));
            let (n1, _) = fenchel_legendre(|l| envelope(a0, a1, Hypothesis::H1, l), tk, lambda_domain(Hypothesis::H1));
            let dev = (c0 - n0).abs().max((c1 - n1).abs());
            if !(dev <= CROSS_CHECK_TOLERANCE) {
                return Err(Error::TransformMismatch { level: k, deviation: dev });
            }
            max_dev = max_dev.max(dev);
            rate0.push(c0);
            rate1.push(c1);
        }
        Ok(RateTable {
            gamma: gamma.clone(),
            thresholds: thresholds.clone(),
            rate0,
            rate1,
            max_cross_check_deviation: max_dev,
        })
    }

    pub fn height(&self) -> usize {
        self.rate0.len()
    }

    /// `Lambda*_{j,k}` for `k` in `1..=height`.
    pub fn rate(&self, j: Hypothesis, k: usize) -> f64 {
        match j {
            Hypothesis::H0 => self.rate0[k - 1],
            Hypothesis::H1 => self.rate1[k - 1],
        }
    }

    pub fn gamma(&self) -> &TransmissionFunction {
        &self.gamma
    }

    pub fn thresholds(&self) -> &ThresholdVector {
        &self.thresholds
    }
}

/// Which error event a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `(1/l) ln P1(S/l <= t_k)` at a node.
    TypeIINode,
    /// `(1/l) ln P0(S/l > t_k)` at a node.
    TypeINode,
    /// Root Type II bound using the leaf floor `N`.
    TypeIIRoot,
    TypeIRoot,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::TypeIINode => "type_ii_node",
            BoundKind::TypeINode => "type_i_node",
            BoundKind::TypeIIRoot => "type_ii_root",
            BoundKind::TypeIRoot => "type_i_root",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub node: usize,
    pub level: usize,
    pub leaves: usize,
    pub preds: usize,
    pub kind: BoundKind,
    pub value: f64,
    /// The bound is negative, so it says something about the probability.
    pub informative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    /// Whether every B node met the floor so the root bounds were emitted.
    pub root_bounds_emitted: bool,
}

/// Per-node Chernoff bounds and, when every member of B has at least
/// `leaf_floor` leaves, the root bounds `-Lambda*_{j,h} + h/N`.
pub fn chernoff_bound_report(tree: &Tree, table: &RateTable, leaf_floor: usize) -> Result<BoundReport> {
    if !tree.is_uniform() {
        return Err(Error::NotUniform);
    }
    let h = tree.height();
    if table.height() != h {
        return Err(Error::InvalidParams(alloc::format!(
            "rate table has {} levels, tree has height {h}",
            table.height()
        )));
    }
    let mut rows = Vec::new();
    for &v in tree.bfs_order() {
        let k = tree.level(v);
        if k == 0 {
            continue;
        }
        let (l, p) = (tree.leaf_count(v), tree.pred_count(v));
        let slack = p as f64 / l as f64 - 1.0;
        for (kind, j) in [(BoundKind::TypeIINode, Hypothesis::H1), (BoundKind::TypeINode, Hypothesis::H0)] {
            let value = -table.rate(j, k) + slack;
            rows.push(BoundRow { node: v, level: k, leaves: l, preds: p, kind, value, informative: value < 0.0 });
        }
    }
    let root_bounds_emitted = leaf_floor > 0 && tree.set_b().iter().all(|&v| tree.leaf_count(v) >= leaf_floor);
    if root_bounds_emitted {
        let slack = h as f64 / leaf_floor as f64;
        for (kind, j) in [(BoundKind::TypeIIRoot, Hypothesis::H1), (BoundKind::TypeIRoot, Hypothesis::H0)] {
            let value = -table.rate(j, h) + slack;
            rows.push(BoundRow {
                node: 0,
                level: h,
                leaves: tree.num_leaves(),
                preds: tree.pred_count(0),
                kind,
                value,
                informative: value < 0.0,
            });
        }
    }
    Ok(BoundReport { rows, root_bounds_emitted })
}
