//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use treedet_core::channels::{enumerate_quantizers, fusion_loss_constant, parallel_exponent};
use treedet_core::evaluate::{evaluate_exact, ExactOptions};
use treedet_core::hypothesis::validate_assumptions;
use treedet_core::rates::{chernoff_bound_report, RateTable, ThresholdVector};
use treedet_core::strategy::simple_strategy;
use treedet_core::topology::{analyze_tree, estimate_z, uniformize, Tree};
use treedet_core::Hypothesis;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::examples;
use crate::formats::{read_json, write_json, FamilySpec, LeafFamilySpec, PairFile, StrategyFile, TfFile, TfRef, TreeFile};
use crate::output::{num, FitSummary, OutputDir};
use crate::parallel;

/// File formats, printed after usage errors.
pub const SCHEMA: &str = r#"File formats (JSON):
  pair      {"alphabet": [0, 1], "p0": [0.75, 0.25], "p1": [0.25, 0.75]}
  tree      {"n": 4, "root": 0, "parents": [null, 0, 1, 1]}
  map       {"arity": 2, "inputs": [[0,1],[0,1]], "output": [0,1], "map": {"0,0": 0, "0,1": 1, "1,0": 1, "1,1": 1}}
            or one of "identity", "or", "and", "xor", "forward", or a path
  strategy  {"gamma": <map>, "thresholds": [t_1, ..., t_h], "root_threshold": t}
  family    {"kind": "parallel" | "chain_plus_leaves" | "two_relay" | "wide_uniform" | "increasing_leaves" | "explicit",
             "params": {...}}
  config    {"pair": <pair or path>, "family": <family>, "strategy": {"recipe": "simple" | "relay" | "gate", "params": {...}},
             "alpha": 0.25, "n_grid": [...], "cutoffs": [2, 5, 10], "output_dir": "out", "seed": 0, "regressor": "leaves"}
Exit codes: 0 ok, 1 invalid input, 2 infeasible request, 3 failed reproduction verdict."#;

#[derive(Debug, Parser)]
#[command(name = "treedet", version, about = "Detection error exponents and relay strategies on sensor trees")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Omit the timestamp line from CSV files.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parallel exponent and fusion-loss constant.
    Exponent {
        #[arg(long)]
        pair: PathBuf,
        /// `all-binary`, `identity`, or a JSON list of maps.
        #[arg(long, default_value = "all-binary")]
        family: String,
        /// Relay arity for the fusion-loss constant.
        #[arg(long, default_value_t = 2)]
        arity: usize,
    },
    /// Rate table and, given a tree, per-node error bounds.
    Rates {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long, default_value = "identity")]
        gamma: String,
        /// Comma-separated `t_1,...,t_h`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        thresholds: Vec<f64>,
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Leaf-count floor for the root bounds; defaults to the smallest
        /// level-1 subtree.
        #[arg(long)]
        leaf_floor: Option<usize>,
    },
    /// Tree statistics, or `q_N` and leaf-fraction curves of a family.
    Analyze {
        #[arg(long, conflicts_with = "family")]
        tree: Option<PathBuf>,
        /// Short form such as `increasing_leaves` or `wide_uniform:2:linear`.
        #[arg(long, requires = "sizes")]
        family: Option<String>,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
        cutoffs: Vec<usize>,
    },
    /// Equalizes leaf depths by inserting relay chains.
    Uniformize {
        #[arg(long)]
        tree: PathBuf,
        /// Output tree file; defaults to `uniform_tree.json` in `--out`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Error probabilities of a strategy, exact and/or by Monte Carlo.
    Simulate {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long, conflicts_with = "family")]
        tree: Option<PathBuf>,
        #[arg(long, requires = "size")]
        family: Option<String>,
        #[arg(long)]
        size: Option<usize>,
        /// Strategy file; without it the simple strategy is used.
        #[arg(long)]
        strategy: Option<PathBuf>,
        #[arg(long, default_value_t = examples::EPSILON)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Empirical exponent over the size grid of a config file.
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reruns one of the worked examples and checks its verdicts.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        example: u8,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Mc,
    Both,
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            eprintln!("\n{SCHEMA}");
            return 1;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable summary"));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_pair(path: &Path) -> Result<treedet_core::DistributionPair> {
    read_json::<PairFile>(path)?.to_pair()
}

fn load_tree(path: &Path) -> Result<Tree> {
    read_json::<TreeFile>(path)?.to_tree()
}

fn base_of(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

pub fn execute(cli: &Cli) -> Result<Value> {
    let out = || OutputDir::create(&cli.common.out, !cli.common.no_timestamp);
    match &cli.command {
        Command::Exponent { pair, family, arity } => {
            let p = load_pair(pair)?;
            let spec = if family.trim_start().starts_with('[') {
                serde_json::from_str::<LeafFamilySpec>(family)
                    .map_err(|e| CliError::Config(format!("--family: {e}")))?
            } else {
                LeafFamilySpec::Name(family.clone())
            };
            let leaves = spec.load(base_of(pair), p.alphabet())?;
            let validation = validate_assumptions(&p, &leaves);
            let pe = parallel_exponent(&p, &leaves)?;
            let msg = leaves[pe.index].output().clone();
            let gates = enumerate_quantizers(*arity, &vec![msg.clone(); *arity], &msg, false)?;
            let loss = fusion_loss_constant(&p, &leaves, &gates, *arity)?;
            let summary = json!({
                "g_p_star": pe.g_p_star,
                "best_leaf_map": TfFile::from_tf(&leaves[pe.index]),
                "validation": {
                    "equivalent": validation.equivalent,
                    "informative_quantizer": validation.informative_quantizer,
                    "second_moment": validation.second_moment,
                    "bound_constant": validation.bound_constant,
                },
                "fusion_loss": {
                    "arity": loss.k,
                    "value": loss.value,
                    "gate": TfFile::from_tf(&gates[loss.gate_index]),
                    "leaf_maps": loss.leaf_indices,
                    "strict_loss": loss.strict_loss,
                },
            });
            out()?.json("exponent.json", &summary)?;
            Ok(summary)
        }
        Command::Rates { pair, gamma, thresholds, tree, leaf_floor } => {
            let p = load_pair(pair)?;
            let g = TfRef::Name(gamma.clone()).load(base_of(pair), p.alphabet())?;
            let table = RateTable::new(&p, &g, &ThresholdVector(thresholds.clone()))?;
            let levels: Vec<Value> = (1..=table.height())
                .map(|k| {
                    json!({
                        "level": k,
                        "threshold": table.thresholds().level(k),
                        "rate_h0": table.rate(Hypothesis::H0, k),
                        "rate_h1": table.rate(Hypothesis::H1, k),
                    })
                })
                .collect();
            let dir = out()?;
            let mut summary = json!({
                "levels": levels,
                "max_cross_check_deviation": table.max_cross_check_deviation,
            });
            if let Some(tp) = tree {
                let t = load_tree(tp)?;
                let floor = match leaf_floor {
                    Some(f) => *f,
                    None => t.set_b().iter().map(|&v| t.leaf_count(v)).min().unwrap_or(1),
                };
                let report = chernoff_bound_report(&t, &table, floor)?;
                dir.bound_report("bounds.csv", &report)?;
                summary["bounds"] = json!({
                    "rows": report.rows.len(),
                    "root_bounds_emitted": report.root_bounds_emitted,
                    "leaf_floor": floor,
                });
            }
            dir.json("rates.json", &summary)?;
            Ok(summary)
        }
        Command::Analyze { tree, family, sizes, cutoffs } => {
            let dir = out()?;
            let summary = match (tree, family) {
                (Some(tp), _) => {
                    let t = load_tree(tp)?;
                    let stats: Vec<Value> = cutoffs
                        .iter()
                        .map(|&c| {
                            let s = analyze_tree(&t, c);
                            json!({
                                "cutoff": c,
                                "q": s.q,
                                "small_count": s.small.len(),
                                "small_count_bound_holds": s.small_count_bound_holds,
                            })
                        })
                        .collect();
                    json!({
                        "n": t.n(),
                        "height": t.height(),
                        "leaves": t.num_leaves(),
                        "uniform": t.is_uniform(),
                        "a_count": t.set_a().len(),
                        "b_count": t.set_b().len(),
                        "leaf_fraction": t.num_leaves() as f64 / t.n() as f64,
                        "cutoffs": stats,
                    })
                }
                (None, Some(f)) => {
                    let fam = FamilySpec::parse_short(f)?.load(Path::new("."))?;
                    let z = estimate_z(&fam, sizes, cutoffs)?;
                    let mut rows = Vec::new();
                    for (c, q) in &z.q_curves {
                        for ((m, v), lf) in z.sizes.iter().zip(q).zip(&z.leaf_fractions) {
                            rows.push(vec![m.to_string(), c.to_string(), num(*v), num(*lf)]);
                        }
                    }
                    dir.csv("q_curves.csv", &["m", "N", "q", "leaf_fraction"], rows)?;
                    json!({
                        "z": z.z,
                        "inequalities_hold": z.inequalities_hold,
                        "z_near_one": z.z_near_one,
                        "q_near_zero": z.q_near_zero,
                        "consistent": z.consistent,
                    })
                }
                (None, None) => return Err(CliError::Config("analyze needs --tree or --family".into())),
            };
            dir.json("analysis.json", &summary)?;
            Ok(summary)
        }
        Command::Uniformize { tree, output } => {
            let t = load_tree(tree)?;
            let u = uniformize(&t);
            let target = match output {
                Some(p) => p.clone(),
                None => out()?.path("uniform_tree.json"),
            };
            write_json(&target, &TreeFile::from_tree(&u.tree))?;
            Ok(json!({
                "output": target.display().to_string(),
                "n_in": t.n(),
                "n_out": u.tree.n(),
                "height": u.tree.height(),
                "leaves": u.tree.num_leaves(),
                "uniform": u.tree.is_uniform(),
            }))
        }
        Command::Simulate { pair, tree, family, size, strategy, epsilon, method, trials, seed } => {
            let p = load_pair(pair)?;
            let t = match (tree, family, size) {
                (Some(tp), _, _) => load_tree(tp)?,
                (None, Some(f), Some(m)) => FamilySpec::parse_short(f)?.load(Path::new("."))?.generate(*m)?,
                _ => return Err(CliError::Config("simulate needs --tree or --family with --size".into())),
            };
            let (t, s) = match strategy {
                Some(sp) => {
                    let u = uniformize(&t).tree;
                    let s = read_json::<StrategyFile>(sp)?.build(&u, &p, base_of(sp))?;
                    (u, s)
                }
                None => {
                    let leaves = examples::all_binary_leaves(&p)?;
                    let s = simple_strategy(&t, &p, &leaves, *epsilon)?;
                    (s.tree, s.strategy)
                }
            };
            let mut summary = json!({
                "n": t.n(),
                "leaves": t.num_leaves(),
                "height": t.height(),
                "root_threshold": s.root_threshold(),
            });
            if matches!(method, Method::Exact | Method::Both) {
                let ev = evaluate_exact(&t, &s, &p, &ExactOptions::default())?;
                let e = ev.errors();
                summary["exact"] = json!({
                    "type_I": e.type_i,
                    "type_II": e.type_ii,
                    "ln_type_I": finite(e.ln_type_i),
                    "ln_type_II": finite(e.ln_type_ii),
                    "distinct_subtrees": ev.distinct_subtrees(),
                });
            }
            if matches!(method, Method::Mc | Method::Both) {
                let e = parallel::monte_carlo(&t, &s, &p, *trials, *seed)?;
                summary["monte_carlo"] = json!({
                    "type_I": e.type_i,
                    "type_II": e.type_ii,
                    "std_error_I": e.std_error_i,
                    "std_error_II": e.std_error_ii,
                    "trials": e.trials,
                    "seed": seed,
                });
            }
            out()?.json("simulate.json", &summary)?;
            Ok(summary)
        }
        Command::Fit { config } => {
            let e = ExperimentConfig::load(config)?;
            let dir = if cli.common.out == Path::new(".") {
                OutputDir::create(&e.output_dir, !cli.common.no_timestamp)?
            } else {
                out()?
            };
            let fit = parallel::fit_family(&e.family, &e.recipe, &e.pair, &e.grid, e.alpha, e.regressor)?;
            dir.exponent_fit("fit.csv", &fit)?;
            let summary = FitSummary::new(&fit, e.target, examples::SLOPE_TOLERANCE);
            let mut value = serde_json::to_value(&summary).expect("serializable summary");
            if !e.cutoffs.is_empty() {
                let z = estimate_z(&e.family, &e.grid, &e.cutoffs)?;
                let mut rows = Vec::new();
                for (c, q) in &z.q_curves {
                    for (m, v) in z.sizes.iter().zip(q) {
                        rows.push(vec![m.to_string(), c.to_string(), num(*v)]);
                    }
                }
                dir.csv("q_curves.csv", &["m", "N", "q"], rows)?;
                value["z"] = json!(z.z);
            }
            dir.json("fit.json", &value)?;
            Ok(value)
        }
        Command::Reproduce { example } => {
            let bundle = examples::reproduce(*example, &out()?)?;
            if bundle.passed() {
                Ok(serde_json::to_value(&bundle).expect("serializable bundle"))
            } else {
                println!("{}", serde_json::to_string_pretty(&bundle).expect("serializable bundle"));
                Err(CliError::Verdict(bundle.failures()))
            }
        }
    }
}

/// JSON has no infinities; `ln 0` is reported as null.
fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
