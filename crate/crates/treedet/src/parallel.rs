//! Thread pool sized by `TREEDET_THREADS`, parallel Monte Carlo and grid
//! evaluation.

use rayon::prelude::*;

use treedet_core::evaluate::{evaluate_point, fit_points, ErrorEstimate, ExponentFit, Recipe, Regressor, SimulationPlan, Tally};
use treedet_core::strategy::Strategy;
use treedet_core::topology::{Tree, TreeFamily};
use treedet_core::DistributionPair;

use crate::error::{CliError, Result};

pub const THREADS_VAR: &str = "TREEDET_THREADS";

/// Trials per Monte Carlo work item.
const CHUNK: u64 = 4096;

pub fn pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Same counts as the sequential estimator for any thread count, since every
/// trial owns its random stream.
pub fn monte_carlo(tree: &Tree, strategy: &Strategy, pair: &DistributionPair, trials: u64, seed: u64) -> Result<ErrorEstimate> {
    if trials == 0 {
        return Err(CliError::Config("at least one trial is required".into()));
    }
    let plan = SimulationPlan::new(tree, strategy, pair, seed)?;
    let chunks = trials.div_ceil(CHUNK);
    let tally = pool()?.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let first = c * CHUNK;
                plan.run(first, CHUNK.min(trials - first))
            })
            .reduce(Tally::default, |a, b| a + b)
    });
    Ok(tally.estimate())
}

/// Grid points evaluated concurrently, reported in grid order.
pub fn fit_family(
    family: &TreeFamily,
    recipe: &Recipe,
    pair: &DistributionPair,
    sizes: &[usize],
    alpha: f64,
    regressor: Regressor,
) -> Result<ExponentFit> {
    let points = pool()?.install(|| {
        sizes
            .par_iter()
            .map(|&m| evaluate_point(&family.generate(m)?, m, recipe, pair, alpha, regressor))
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;
    Ok(fit_points(points, regressor)?)
}
