//! Experiment configuration for `treedet fit`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use treedet_core::channels::parallel_exponent;
use treedet_core::evaluate::{Recipe, Regressor};
use treedet_core::rates::ThresholdVector;
use treedet_core::topology::TreeFamily;
use treedet_core::DistributionPair;

use crate::error::{CliError, Result};
use crate::formats::{read_json, FamilySpec, LeafFamilySpec, PairRef, TfRef};

/// `{"recipe": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", content = "params", rename_all = "snake_case")]
pub enum RecipeSpec {
    Simple {
        epsilon: f64,
        #[serde(default)]
        leaf_family: LeafFamilySpec,
    },
    Relay {
        gamma: TfRef,
        thresholds: Vec<f64>,
    },
    Gate {
        #[serde(default = "identity")]
        gamma: TfRef,
        gate: TfRef,
    },
}

fn identity() -> TfRef {
    TfRef::Name("identity".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorSpec {
    #[default]
    Leaves,
    Nodes,
}

fn default_alpha() -> f64 {
    0.25
}

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pair: PairRef,
    pub family: FamilySpec,
    pub strategy: RecipeSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub n_grid: Vec<usize>,
    /// Cutoffs `N` for the `q_N` curves.
    #[serde(default)]
    pub cutoffs: Vec<usize>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub regressor: RegressorSpec,
}

/// A config with every reference loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub pair: DistributionPair,
    pub family: TreeFamily,
    pub recipe: Recipe,
    pub alpha: f64,
    pub grid: Vec<usize>,
    pub cutoffs: Vec<usize>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub regressor: Regressor,
    /// Parallel exponent of the leaf family in use.
    pub target: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("n_grid must be non-empty and strictly increasing".into()));
        }
        if self.cutoffs.contains(&0) {
            return Err(CliError::Config("cutoffs must be positive".into()));
        }
        Ok(())
    }

    /// Loads every referenced file; relative paths resolve against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Experiment> {
        self.validate()?;
        let pair = self.pair.load(base)?;
        let obs = pair.alphabet().clone();
        let (recipe, leaf_family) = match &self.strategy {
            RecipeSpec::Simple { epsilon, leaf_family } => {
                let fam = leaf_family.load(base, &obs)?;
                (Recipe::Simple { leaf_family: fam.clone(), epsilon: *epsilon }, fam)
            }
            RecipeSpec::Relay { gamma, thresholds } => {
                let g = gamma.load(base, &obs)?;
                (Recipe::Relay { gamma: g.clone(), thresholds: ThresholdVector(thresholds.clone()) }, vec![g])
            }
            RecipeSpec::Gate { gamma, gate } => {
                let g = gamma.load(base, &obs)?;
                (Recipe::Gate { gamma: g.clone(), gate: gate.load(base, &obs)? }, vec![g])
            }
        };
        let target = parallel_exponent(&pair, &leaf_family)?.g_p_star;
        Ok(Experiment {
            family: self.family.load(base)?,
            pair,
            recipe,
            alpha: self.alpha,
            grid: self.n_grid.clone(),
            cutoffs: self.cutoffs.clone(),
            output_dir: crate::formats::resolve(base, &self.output_dir),
            seed: self.seed,
            regressor: match self.regressor {
                RegressorSpec::Leaves => Regressor::Leaves,
                RegressorSpec::Nodes => Regressor::Nodes,
            },
            target,
        })
    }

    pub fn load(path: &Path) -> Result<Experiment> {
        let cfg: ExperimentConfig = read_json(path)?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")))
    }
}
