use alloc::string::ToString;

use super::exact::{evaluate_exact, ExactOptions};
use crate::error::{Error, Result};
use crate::hypothesis::validate_assumptions;
use crate::math::exp;
use crate::strategy::Strategy;
use crate::topology::Tree;
use crate::DistributionPair;

/// Concentration of the normalized root sum under H0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevCheck {
    /// `E0[S(f)] / l(f)`.
    pub lambda_n: f64,
    /// `P0(|S(f)/l(f) - lambda_n| > eta)`, exact.
    pub lhs: f64,
    /// `a (1 + N) / (eta^2 l(f))`.
    pub rhs: f64,
    pub holds: bool,
}

/// Height-2 trees whose level-1 nodes all have at most `cutoff` leaves.
pub fn chebyshev_variance_check(
    tree: &Tree,
    strategy: &Strategy,
    pair: &DistributionPair,
    cutoff: usize,
    eta: f64,
) -> Result<ChebyshevCheck> {
    if tree.height() != 2 || !tree.is_uniform() {
        return Err(Error::InvalidParams("the check applies to 2-uniform trees".to_string()));
    }
    if tree.set_b().iter().any(|&v| tree.leaf_count(v) > cutoff) {
        return Err(Error::InvalidParams(alloc::format!("some level-1 node has more than {cutoff} leaves")));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParams("eta must be positive".to_string()));
    }
    let ev = evaluate_exact(tree, strategy, pair, &ExactOptions::default())?;
    let law = ev.root_law();
    let l = ev.active_leaves(0) as f64;
    let lambda_n = law.mean(false) / l;
    let lhs: f64 = law
        .atoms()
        .iter()
        .filter(|a| (a.value / l - lambda_n).abs() > eta)
        .map(|a| exp(a.ln_p0))
        .sum();
    let a = validate_assumptions(pair, core::slice::from_ref(&strategy.leaf)).bound_constant;
    let rhs = a * (1.0 + cutoff as f64) / (eta * eta * l);
    Ok(ChebyshevCheck { lambda_n, lhs, rhs, holds: lhs <= rhs })
}
