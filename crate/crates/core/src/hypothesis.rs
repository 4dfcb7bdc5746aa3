//! Hypothesis pairs over finite alphabets, divergences and assumption checks.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::channels::{induced_pair, TransmissionFunction};
use crate::error::{Error, Result};
use crate::math::{ln, xlogy_ratio};

/// Tolerance on the total mass of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Ordered finite list of distinct symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(symbols: I) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet is empty".to_string()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::InvalidAlphabet(alloc::format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// `{"0", "1"}`.
    pub fn binary() -> Self {
        Alphabet { symbols: alloc::vec!["0".to_string(), "1".to_string()] }
    }

    /// `{"0", ..., "k-1"}`.
    pub fn numbered(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::UnknownSymbol { symbol: symbol.to_string() })
    }
}

/// Which argument order to use in `D(P || Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `D(P0 || P1)`.
    ZeroOne,
    /// `D(P1 || P0)`.
    OneZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }
}

/// Two mutually absolutely continuous distributions on a common alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionPair {
    alphabet: Alphabet,
    p0: Vec<f64>,
    p1: Vec<f64>,
}

fn check_distribution(name: &str, alphabet: &Alphabet, p: &[f64]) -> Result<()> {
    if p.len() != alphabet.len() {
        return Err(Error::InvalidDistribution(alloc::format!(
            "{name} has {} entries for {} symbols",
            p.len(),
            alphabet.len()
        )));
    }
    if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidDistribution(alloc::format!("{name} has entry {x} outside [0, 1]")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(alloc::format!("{name} sums to {total}")));
    }
    Ok(())
}

impl DistributionPair {
    /// Validates normalization and equivalence; nothing is repaired.
    pub fn new(alphabet: Alphabet, p0: Vec<f64>, p1: Vec<f64>) -> Result<Self> {
        check_distribution("p0", &alphabet, &p0)?;
        check_distribution("p1", &alphabet, &p1)?;
        for (i, (a, b)) in p0.iter().zip(&p1).enumerate() {
            if (*a > 0.0) != (*b > 0.0) {
                return Err(Error::EquivalenceViolation { symbol: alphabet.symbol(i).to_string() });
            }
        }
        Ok(DistributionPair { alphabet, p0, p1 })
    }

    /// Bernoulli pair on `{"0","1"}` with `P_j(1) = q_j`.
    pub fn bernoulli(q0: f64, q1: f64) -> Result<Self> {
        Self::new(Alphabet::binary(), alloc::vec![1.0 - q0, q0], alloc::vec![1.0 - q1, q1])
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn probs(&self, h: Hypothesis) -> &[f64] {
        match h {
            Hypothesis::H0 => &self.p0,
            Hypothesis::H1 => &self.p1,
        }
    }

    /// Per-symbol `ln(p1/p0)`; zero for symbols with no mass under either.
    pub fn llr_values(&self) -> Vec<f64> {
        self.p0
            .iter()
            .zip(&self.p1)
            .map(|(a, b)| if *a == 0.0 { 0.0 } else { ln(b / a) })
            .collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.p0 == self.p1
    }
}

pub fn kl_divergence(pair: &DistributionPair, direction: Direction) -> f64 {
    let (p, q) = match direction {
        Direction::ZeroOne => (&pair.p0, &pair.p1),
        Direction::OneZero => (&pair.p1, &pair.p0),
    };
    let d: f64 = p.iter().zip(q).map(|(a, b)| xlogy_ratio(*a, *b)).sum();
    d.max(0.0)
}

pub fn log_likelihood_ratio(pair: &DistributionPair, symbol: &str) -> Result<f64> {
    let i = pair.alphabet.index_of(symbol)?;
    Ok(pair.llr_values()[i])
}

/// `E_j[ln^2(p1/p0)]`.
pub fn second_moment(pair: &DistributionPair, h: Hypothesis) -> f64 {
    pair.probs(h).iter().zip(pair.llr_values()).map(|(p, l)| p * l * l).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub equivalent: bool,
    /// Some leaf quantizer gives `-D(P0^g||P1^g) < 0 < D(P1^g||P0^g)`.
    pub informative_quantizer: bool,
    /// Index of the first such quantizer in the family.
    pub informative_index: Option<usize>,
    /// `E0[ln^2(p1/p0)]` of the raw observation.
    pub second_moment: f64,
    /// `second_moment + 2`, the constant of the Chebyshev bound.
    pub bound_constant: f64,
}

/// Report-only; a pair that was constructed is always equivalent.
pub fn validate_assumptions(
    pair: &DistributionPair,
    leaf_family: &[TransmissionFunction],
) -> ValidationReport {
    let informative_index = leaf_family.iter().position(|tf| match induced_pair(pair, tf) {
        Ok(q) => kl_divergence(&q, Direction::ZeroOne) > 0.0 && kl_divergence(&q, Direction::OneZero) > 0.0,
        Err(_) => false,
    });
    let m2 = second_moment(pair, Hypothesis::H0);
    ValidationReport {
        equivalent: true,
        informative_quantizer: informative_index.is_some(),
        informative_index,
        second_moment: m2,
        bound_constant: m2 + 2.0,
    }
}
