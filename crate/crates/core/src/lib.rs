//! Decentralized binary hypothesis testing over bounded-height fusion trees.
//!
//! Leaves observe i.i.d. symbols from one of two equivalent discrete
//! distributions, quantize them, and every other node fuses the messages it
//! receives into a 1-bit log-likelihood ratio quantizer (LLRQ) output. The
//! crate provides:
//!
//! * [`hypothesis`]: distribution pairs, divergences and assumption checks,
//! * [`channels`]: transmission functions, quantizer enumeration, the
//!   parallel-configuration exponent and the fusion-loss constant,
//! * [`topology`]: trees, leaf statistics, uniformization, pruning and the
//!   tree families used in experiments,
//! * [`rates`]: log-MGFs, numeric Fenchel-Legendre transforms, the level
//!   recursion for relay rate functions and Chernoff bound reports,
//! * [`strategy`]: relay strategies, the near-optimal single-threshold recipe
//!   and Neyman-Pearson calibration of the fusion threshold,
//! * [`evaluate`]: exact error probabilities by convolution of message laws,
//!   counter-based Monte Carlo, exponent fitting and the variance check.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod channels;
pub mod error;
pub mod evaluate;
pub mod hypothesis;
mod math;
pub mod rates;
pub mod strategy;
pub mod topology;

pub use error::{Error, Result};
pub use hypothesis::{Alphabet, DistributionPair, Hypothesis};
