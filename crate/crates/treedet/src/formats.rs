//! JSON file formats: distribution pairs, trees, transmission functions,
//! strategies and tree families.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use treedet_core::channels::{enumerate_quantizers, TransmissionFunction};
use treedet_core::rates::ThresholdVector;
use treedet_core::strategy::{build_relay_strategy, Strategy};
use treedet_core::topology::{SizeRule, Tree, TreeFamily};
use treedet_core::{Alphabet, DistributionPair};

use crate::error::{CliError, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Relative paths inside a config resolve against the config's directory.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Symbols may be written as strings or integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Symbol {
    Int(i64),
    Text(String),
}

impl Symbol {
    fn text(&self) -> String {
        match self {
            Symbol::Int(i) => i.to_string(),
            Symbol::Text(s) => s.clone(),
        }
    }

    fn from_text(s: &str) -> Self {
        match s.parse::<i64>() {
            Ok(i) if i.to_string() == s => Symbol::Int(i),
            _ => Symbol::Text(s.to_string()),
        }
    }
}

fn alphabet(symbols: &[Symbol]) -> Result<Alphabet> {
    Ok(Alphabet::new(symbols.iter().map(Symbol::text))?)
}

fn symbols(a: &Alphabet) -> Vec<Symbol> {
    a.symbols().iter().map(|s| Symbol::from_text(s)).collect()
}

/// `{"alphabet": [...], "p0": [...], "p1": [...]}`, probabilities in
/// alphabet order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub alphabet: Vec<Symbol>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

impl PairFile {
    pub fn to_pair(&self) -> Result<DistributionPair> {
        Ok(DistributionPair::new(alphabet(&self.alphabet)?, self.p0.clone(), self.p1.clone())?)
    }

    pub fn from_pair(pair: &DistributionPair) -> Self {
        PairFile { alphabet: symbols(pair.alphabet()), p0: pair.p0().to_vec(), p1: pair.p1().to_vec() }
    }
}

/// Inline pair or path to a pair file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairRef {
    Inline(PairFile),
    Path(PathBuf),
}

impl PairRef {
    pub fn load(&self, base: &Path) -> Result<DistributionPair> {
        match self {
            PairRef::Inline(p) => p.to_pair(),
            PairRef::Path(p) => read_json::<PairFile>(&resolve(base, p))?.to_pair(),
        }
    }
}

/// `{"n": int, "root": 0, "parents": [null, p1, p2, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub n: usize,
    pub root: usize,
    pub parents: Vec<Option<usize>>,
}

impl TreeFile {
    pub fn to_tree(&self) -> Result<Tree> {
        if self.parents.len() != self.n {
            return Err(CliError::Config(format!("tree declares n = {} but lists {} parents", self.n, self.parents.len())));
        }
        if self.root != 0 {
            return Err(CliError::Config(format!("the root must be node 0, got {}", self.root)));
        }
        Ok(Tree::from_parents(self.parents.clone())?)
    }

    pub fn from_tree(tree: &Tree) -> Self {
        TreeFile { n: tree.n(), root: tree.root(), parents: tree.parents().to_vec() }
    }
}

/// `{"arity": d, "inputs": [[...], ...], "output": [...], "map": {"a,b": y}}`.
/// Leaf maps have arity 0 and a single input alphabet (the observations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfFile {
    pub arity: usize,
    pub inputs: Vec<Vec<Symbol>>,
    pub output: Vec<Symbol>,
    pub map: BTreeMap<String, Symbol>,
}

impl TfFile {
    pub fn to_tf(&self) -> Result<TransmissionFunction> {
        let inputs = self.inputs.iter().map(|a| alphabet(a)).collect::<Result<Vec<_>>>()?;
        let output = alphabet(&self.output)?;
        let mut problem = None;
        let tf = TransmissionFunction::from_fn(self.arity, inputs.clone(), output.clone(), |tuple| {
            let key = tuple.iter().zip(&inputs).map(|(&i, a)| a.symbol(i)).collect::<Vec<_>>().join(",");
            match self.map.get(&key).map(|s| output.index_of(&s.text())) {
                Some(Ok(y)) => y,
                Some(Err(_)) => {
                    problem.get_or_insert(format!("map entry {key:?} is not an output symbol"));
                    0
                }
                None => {
                    problem.get_or_insert(format!("map has no entry for {key:?}"));
                    0
                }
            }
        })?;
        if let Some(p) = problem {
            return Err(CliError::Config(p));
        }
        if self.map.len() != tf.domain_size() {
            return Err(CliError::Config(format!(
                "map has {} entries but the input domain has {}",
                self.map.len(),
                tf.domain_size()
            )));
        }
        Ok(tf)
    }

    pub fn from_tf(tf: &TransmissionFunction) -> Self {
        let map = (0..tf.domain_size())
            .map(|i| {
                let key = tf.tuple_at(i).iter().zip(tf.inputs()).map(|(&s, a)| a.symbol(s)).collect::<Vec<_>>().join(",");
                (key, Symbol::from_text(tf.output().symbol(tf.table()[i])))
            })
            .collect();
        TfFile { arity: tf.arity(), inputs: tf.inputs().iter().map(symbols).collect(), output: symbols(tf.output()), map }
    }
}

/// A transmission function by name, by file path, or inline. Names:
/// `identity` (leaf map on the observation alphabet) and the binary
/// 2-input gates `or`, `and`, `xor`, `forward`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TfRef {
    Inline(TfFile),
    Name(String),
}

impl TfRef {
    pub fn load(&self, base: &Path, observations: &Alphabet) -> Result<TransmissionFunction> {
        match self {
            TfRef::Inline(f) => f.to_tf(),
            TfRef::Name(n) => match named_gate(n) {
                Some(g) => Ok(g),
                None if n == "identity" => Ok(TransmissionFunction::identity(observations.clone())),
                None => read_json::<TfFile>(&resolve(base, Path::new(n)))?.to_tf(),
            },
        }
    }
}

/// Binary gates of arity 2; `forward` passes the first input through.
pub fn named_gate(name: &str) -> Option<TransmissionFunction> {
    match name {
        "or" => Some(TransmissionFunction::or_gate(2)),
        "and" => Some(TransmissionFunction::and_gate(2)),
        "xor" => Some(TransmissionFunction::xor_gate(2)),
        "forward" => Some(TransmissionFunction::boolean_gate(2, |x| x[0] == 1)),
        _ => None,
    }
}

/// A leaf family: `all-binary` (every map from observations to `{0,1}`),
/// `identity`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LeafFamilySpec {
    Name(String),
    List(Vec<TfRef>),
}

impl Default for LeafFamilySpec {
    fn default() -> Self {
        LeafFamilySpec::Name("all-binary".into())
    }
}

impl LeafFamilySpec {
    pub fn load(&self, base: &Path, observations: &Alphabet) -> Result<Vec<TransmissionFunction>> {
        match self {
            LeafFamilySpec::Name(n) if n == "all-binary" => Ok(enumerate_quantizers(
                0,
                std::slice::from_ref(observations),
                &Alphabet::binary(),
                false,
            )?),
            LeafFamilySpec::Name(n) if n == "identity" => Ok(vec![TransmissionFunction::identity(observations.clone())]),
            LeafFamilySpec::Name(n) => Err(CliError::Config(format!("unknown leaf family {n:?}"))),
            LeafFamilySpec::List(l) => l.iter().map(|r| r.load(base, observations)).collect(),
        }
    }
}

/// `{"gamma": <tf>, "thresholds": [t_1, ..., t_h], "root_threshold": t}`.
/// Without `root_threshold` the root uses `t_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyFile {
    pub gamma: TfRef,
    pub thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_threshold: Option<f64>,
}

impl StrategyFile {
    pub fn build(&self, tree: &Tree, pair: &DistributionPair, base: &Path) -> Result<Strategy> {
        let gamma = self.gamma.load(base, pair.alphabet())?;
        let s = build_relay_strategy(tree, pair, &gamma, &ThresholdVector(self.thresholds.clone()))?;
        Ok(match self.root_threshold {
            Some(t) => s.with_root_threshold(t),
            None => s,
        })
    }
}

/// A fixed count or `"linear"` / `"square"` in the size parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeSpec {
    Fixed(usize),
    Rule(String),
}

impl SizeSpec {
    fn to_rule(&self) -> Result<SizeRule> {
        match self {
            SizeSpec::Fixed(k) => Ok(SizeRule::Fixed(*k)),
            SizeSpec::Rule(r) if r == "linear" => Ok(SizeRule::Linear),
            SizeSpec::Rule(r) if r == "square" => Ok(SizeRule::Square),
            SizeSpec::Rule(r) => Err(CliError::Config(format!("unknown size rule {r:?}"))),
        }
    }
}

/// `{"kind": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FamilySpec {
    Parallel,
    ChainPlusLeaves { height: usize },
    TwoRelay,
    WideUniform { leaves: SizeSpec, relays: SizeSpec },
    IncreasingLeaves,
    Explicit { tree: PathBuf },
}

impl FamilySpec {
    pub fn load(&self, base: &Path) -> Result<TreeFamily> {
        Ok(match self {
            FamilySpec::Parallel => TreeFamily::Parallel,
            FamilySpec::ChainPlusLeaves { height } => TreeFamily::ChainPlusLeaves { height: *height },
            FamilySpec::TwoRelay => TreeFamily::TwoRelay,
            FamilySpec::WideUniform { leaves, relays } => {
                TreeFamily::WideUniform { leaves: leaves.to_rule()?, relays: relays.to_rule()? }
            }
            FamilySpec::IncreasingLeaves => TreeFamily::IncreasingLeaves,
            FamilySpec::Explicit { tree } => {
                TreeFamily::Explicit(read_json::<TreeFile>(&resolve(base, tree))?.to_tree()?)
            }
        })
    }

    /// Parses the short command-line form, e.g. `two_relay` or
    /// `wide_uniform:20:square`.
    pub fn parse_short(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let size = |p: &str| match p.parse::<usize>() {
            Ok(k) => SizeSpec::Fixed(k),
            Err(_) => SizeSpec::Rule(p.to_string()),
        };
        Ok(match parts.as_slice() {
            ["parallel"] => FamilySpec::Parallel,
            ["two_relay"] => FamilySpec::TwoRelay,
            ["increasing_leaves"] => FamilySpec::IncreasingLeaves,
            ["chain_plus_leaves", h] => FamilySpec::ChainPlusLeaves {
                height: h.parse().map_err(|_| CliError::Config(format!("bad height {h:?}")))?,
            },
            ["wide_uniform", l, r] => FamilySpec::WideUniform { leaves: size(l), relays: size(r) },
            _ => return Err(CliError::Config(format!("unknown family {s:?}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_round_trip() {
        let text = r#"{"alphabet": [0, 1], "p0": [0.75, 0.25], "p1": [0.25, 0.75]}"#;
        let f: PairFile = serde_json::from_str(text).unwrap();
        let p = f.to_pair().unwrap();
        assert_eq!(p.alphabet().symbols(), ["0", "1"]);
        assert_eq!(PairFile::from_pair(&p), f);
    }

    #[test]
    fn tf_round_trip() {
        let or = TransmissionFunction::or_gate(2);
        let f = TfFile::from_tf(&or);
        assert_eq!(f.map["0,0"], Symbol::Int(0));
        assert_eq!(f.map["1,0"], Symbol::Int(1));
        let text = serde_json::to_string(&f).unwrap();
        let back: TfFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_tf().unwrap(), or);
    }

    #[test]
    fn tf_missing_entry() {
        let mut f = TfFile::from_tf(&TransmissionFunction::and_gate(2));
        f.map.remove("1,1");
        assert!(matches!(f.to_tf(), Err(CliError::Config(_))));
    }

    #[test]
    fn family_forms() {
        let f: FamilySpec =
            serde_json::from_str(r#"{"kind": "wide_uniform", "params": {"leaves": 20, "relays": "square"}}"#).unwrap();
        assert_eq!(f, FamilySpec::parse_short("wide_uniform:20:square").unwrap());
        let t: FamilySpec = serde_json::from_str(r#"{"kind": "two_relay"}"#).unwrap();
        assert_eq!(t.load(Path::new(".")).unwrap(), TreeFamily::TwoRelay);
        assert!(FamilySpec::parse_short("nope").is_err());
    }

    #[test]
    fn tree_checks() {
        let ok = TreeFile { n: 3, root: 0, parents: vec![None, Some(0), Some(0)] };
        assert_eq!(TreeFile::from_tree(&ok.to_tree().unwrap()), ok);
        let bad = TreeFile { n: 4, ..ok };
        assert!(bad.to_tree().is_err());
    }
}
