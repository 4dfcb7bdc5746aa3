//! Calibrated Type II errors along a size grid and the least-squares slope of
//! `ln beta` against the leaf count (or node count).

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::channels::TransmissionFunction;
use crate::error::{Error, Result};
use crate::rates::ThresholdVector;
use crate::strategy::{build_relay_strategy, np_calibrate_root, simple_strategy, RelayRule, Strategy};
use crate::topology::{uniformize, Tree, TreeFamily};
use crate::DistributionPair;

/// How to build the strategy at each grid point. The root threshold is
/// always replaced by calibration.
#[derive(Debug, Clone, PartialEq)]
pub enum Recipe {
    /// Single threshold `-D + epsilon/2` at every level.
    Simple { leaf_family: Vec<TransmissionFunction>, epsilon: f64 },
    /// Fixed leaf map and per-level thresholds.
    Relay { gamma: TransmissionFunction, thresholds: ThresholdVector },
    /// Height-2 trees whose level-1 relays apply `gate`.
    Gate { gamma: TransmissionFunction, gate: TransmissionFunction },
}

impl Recipe {
    /// Strategy on the uniformized tree, which is returned alongside.
    pub fn build(&self, tree: &Tree, pair: &DistributionPair) -> Result<(Tree, Strategy)> {
        match self {
            Recipe::Simple { leaf_family, epsilon } => {
                let s = simple_strategy(tree, pair, leaf_family, *epsilon)?;
                Ok((s.tree, s.strategy))
            }
            Recipe::Relay { gamma, thresholds } => {
                let u = uniformize(tree).tree;
                let s = build_relay_strategy(&u, pair, gamma, thresholds)?;
                Ok((u, s))
            }
            Recipe::Gate { gamma, gate } => {
                let u = uniformize(tree).tree;
                if u.height() != 2 {
                    return Err(Error::InvalidParams("gate recipe needs a height-2 tree".to_string()));
                }
                Ok((u, Strategy::new(gamma.clone(), alloc::vec![RelayRule::Gate(gate.clone())], 0.0)))
            }
        }
    }
}

/// Which size the exponent is normalized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regressor {
    /// Leaf count `l(f)`, the relay-strategy normalization.
    Leaves,
    /// Node count `n`.
    Nodes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitPoint {
    /// Family size parameter.
    pub size: usize,
    /// Node count of the original (not uniformized) tree.
    pub n: usize,
    pub leaves: usize,
    pub alpha: f64,
    pub threshold: f64,
    pub type_i: f64,
    pub type_ii: f64,
    pub ln_type_ii: f64,
    /// `ln(type_ii) / x` with `x` the regressor.
    pub normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| { let r = y - intercept - slope * x; r * r }).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit { slope, intercept, r2 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub points: Vec<FitPoint>,
    pub fit: LinearFit,
    pub regressor: Regressor,
}

/// Calibrates the root to `alpha` and evaluates the Type II error exactly.
pub fn evaluate_point(
    tree: &Tree,
    size: usize,
    recipe: &Recipe,
    pair: &DistributionPair,
    alpha: f64,
    regressor: Regressor,
) -> Result<FitPoint> {
    let (u, strategy) = recipe.build(tree, pair)?;
    let c = np_calibrate_root(&u, &strategy, pair, alpha)?;
    let x = match regressor {
        Regressor::Leaves => tree.num_leaves(),
        Regressor::Nodes => tree.n(),
    } as f64;
    Ok(FitPoint {
        size,
        n: tree.n(),
        leaves: tree.num_leaves(),
        alpha,
        threshold: c.threshold,
        type_i: c.type_i,
        type_ii: c.type_ii,
        ln_type_ii: c.ln_type_ii,
        normalized: c.ln_type_ii / x,
    })
}

/// Fits `ln beta` against the regressor over already evaluated points.
pub fn fit_points(points: Vec<FitPoint>, regressor: Regressor) -> Result<ExponentFit> {
    if points.len() < 2 {
        return Err(Error::InvalidParams("a fit needs at least two grid points".to_string()));
    }
    let xs: Vec<f64> = points
        .iter()
        .map(|p| match regressor {
            Regressor::Leaves => p.leaves as f64,
            Regressor::Nodes => p.n as f64,
        })
        .collect();
    let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
    if hi < 8.0 * lo {
        return Err(Error::InvalidParams(alloc::format!(
            "grid spans {lo}..{hi}; at least a factor of 8 is required"
        )));
    }
    let ys: Vec<f64> = points.iter().map(|p| p.ln_type_ii).collect();
    Ok(ExponentFit { fit: least_squares(&xs, &ys), points, regressor })
}

pub fn empirical_exponent(
    family: &TreeFamily,
    recipe: &Recipe,
    pair: &DistributionPair,
    sizes: &[usize],
    alpha: f64,
    regressor: Regressor,
) -> Result<ExponentFit> {
    let points = sizes
        .iter()
        .map(|&m| evaluate_point(&family.generate(m)?, m, recipe, pair, alpha, regressor))
        .collect::<Result<Vec<_>>>()?;
    fit_points(points, regressor)
}
