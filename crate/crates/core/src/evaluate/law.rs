use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_add_exp, ln_choose};

/// Atoms whose values differ by at most this (relative to `max(1, |v|)`) are
/// merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// One possible value of an LLR sum with its log-masses under H0 and H1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub ln_p0: f64,
    pub ln_p1: f64,
}

/// Law of a sum of log-likelihood ratios, atoms sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageLaw {
    atoms: Vec<Atom>,
}

impl MessageLaw {
    /// Sorts and merges nearly equal values.
    pub fn from_atoms(mut atoms: Vec<Atom>) -> Self {
        atoms.retain(|a| a.ln_p0 > f64::NEG_INFINITY || a.ln_p1 > f64::NEG_INFINITY);
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match out.last_mut() {
                Some(last) if a.value - last.value <= MERGE_TOLERANCE * last.value.abs().max(1.0) => {
                    last.ln_p0 = ln_add_exp(last.ln_p0, a.ln_p0);
                    last.ln_p1 = ln_add_exp(last.ln_p1, a.ln_p1);
                }
                _ => out.push(a),
            }
        }
        MessageLaw { atoms: out }
    }

    /// Law of the constant 0, the unit of convolution.
    pub fn zero() -> Self {
        MessageLaw { atoms: alloc::vec![Atom { value: 0.0, ln_p0: 0.0, ln_p1: 0.0 }] }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Log of the total mass under H0 and H1.
    pub fn ln_totals(&self) -> (f64, f64) {
        self.atoms
            .iter()
            .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b), x| (ln_add_exp(a, x.ln_p0), ln_add_exp(b, x.ln_p1)))
    }

    /// `E_j[value]`.
    pub fn mean(&self, h1: bool) -> f64 {
        self.atoms.iter().map(|a| exp(if h1 { a.ln_p1 } else { a.ln_p0 }) * a.value).sum()
    }

    /// Largest `|ln_p1 - ln_p0 - value| / max(1, |value|)` over atoms with
    /// positive mass. Zero up to rounding when each atom's value is its LLR.
    pub fn change_of_measure_deviation(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.ln_p0.is_finite() && a.ln_p1.is_finite())
            .map(|a| (a.ln_p1 - a.ln_p0 - a.value).abs() / a.value.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Law of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &MessageLaw, cap: usize) -> Result<Self> {
        let size = self.atoms.len().saturating_mul(other.atoms.len());
        if size > cap {
            return Err(Error::StateSpaceTooLarge { atoms: size, cap });
        }
        let mut out = Vec::with_capacity(size);
        for a in &self.atoms {
            for b in &other.atoms {
                out.push(Atom { value: a.value + b.value, ln_p0: a.ln_p0 + b.ln_p0, ln_p1: a.ln_p1 + b.ln_p1 });
            }
        }
        Ok(Self::from_atoms(out))
    }

    /// Law of the sum of `k` independent copies.
    pub fn power(&self, k: usize, cap: usize) -> Result<Self> {
        match (self.atoms.len(), k) {
            (_, 0) => Ok(Self::zero()),
            (_, 1) => Ok(self.clone()),
            (1, _) => {
                let a = self.atoms[0];
                let kf = k as f64;
                Ok(MessageLaw { atoms: alloc::vec![Atom { value: kf * a.value, ln_p0: kf * a.ln_p0, ln_p1: kf * a.ln_p1 }] })
            }
            (2, _) => self.binomial_power(k, cap),
            _ => {
                let mut result = Self::zero();
                let mut base = self.clone();
                let mut e = k;
                loop {
                    if e & 1 == 1 {
                        result = result.convolve(&base, cap)?;
                    }
                    e >>= 1;
                    if e == 0 {
                        break;
                    }
                    base = base.convolve(&base, cap)?;
                }
                Ok(result)
            }
        }
    }

    fn binomial_power(&self, k: usize, cap: usize) -> Result<Self> {
        if k + 1 > cap {
            return Err(Error::StateSpaceTooLarge { atoms: k + 1, cap });
        }
        let (lo, hi) = (self.atoms[0], self.atoms[1]);
        let kk = k as u64;
        let atoms = (0..=k)
            .map(|i| {
                let (i_f, r_f) = (i as f64, (k - i) as f64);
                let c = ln_choose(kk, i as u64);
                Atom {
                    value: i_f * hi.value + r_f * lo.value,
                    ln_p0: c + i_f * hi.ln_p0 + r_f * lo.ln_p0,
                    ln_p1: c + i_f * hi.ln_p1 + r_f * lo.ln_p1,
                }
            })
            .collect();
        Ok(Self::from_atoms(atoms))
    }
}

/// Law of a message symbol: log-masses per output symbol index.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolLaw {
    pub ln_p0: Vec<f64>,
    pub ln_p1: Vec<f64>,
}

impl SymbolLaw {
    pub fn from_probs(q0: &[f64], q1: &[f64]) -> Self {
        SymbolLaw { ln_p0: q0.iter().map(|x| ln(*x)).collect(), ln_p1: q1.iter().map(|x| ln(*x)).collect() }
    }

    pub fn len(&self) -> usize {
        self.ln_p0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_p0.is_empty()
    }

    /// `ln(P1(y) / P0(y))`; 0 for symbols that are never sent.
    pub fn llr(&self, y: usize) -> f64 {
        if self.ln_p0[y] == f64::NEG_INFINITY {
            0.0
        } else {
            self.ln_p1[y] - self.ln_p0[y]
        }
    }

    pub fn llrs(&self) -> Vec<f64> {
        (0..self.len()).map(|y| self.llr(y)).collect()
    }

    /// Law of the LLR carried by the message.
    pub fn to_message_law(&self) -> MessageLaw {
        MessageLaw::from_atoms(
            (0..self.len())
                .map(|y| Atom { value: self.llr(y), ln_p0: self.ln_p0[y], ln_p1: self.ln_p1[y] })
                .collect(),
        )
    }
}
