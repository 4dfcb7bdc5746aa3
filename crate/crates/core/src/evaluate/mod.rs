//! Error probabilities of relay strategies: exact evaluation by convolution of
//! message laws, Monte Carlo simulation, exponent fitting and the Chebyshev
//! concentration check.

pub mod chebyshev;
pub mod exact;
pub mod fit;
pub mod law;
pub mod montecarlo;

pub use chebyshev::{chebyshev_variance_check, ChebyshevCheck};
pub use exact::{all_zero_fusion, evaluate_exact, exact_error_probs, ExactEvaluation, ExactOptions, NodeTail, STATE_SPACE_CAP};
pub use fit::{empirical_exponent, evaluate_point, fit_points, least_squares, ExponentFit, FitPoint, LinearFit, Recipe, Regressor};
pub use law::{Atom, MessageLaw, SymbolLaw};
pub use montecarlo::{monte_carlo_error, SimulationPlan, Tally, TrialScratch};

/// How an [`ErrorEstimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// Type I error `P0(decide 1)` and Type II error `P1(decide 0)` at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    pub type_i: f64,
    pub type_ii: f64,
    /// Natural logs, kept separately because exact values underflow.
    pub ln_type_i: f64,
    pub ln_type_ii: f64,
    pub method: Method,
    /// Zero for exact results.
    pub trials: u64,
    pub std_error_i: f64,
    pub std_error_ii: f64,
}
