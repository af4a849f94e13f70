//! Numerical laboratory for complete-convergence series of the Baum–Katz type.
//!
//! The crate builds the pieces needed to probe, at desk scale, when the
//! weighted series `Σ n^{p/r−2} P(M_n > ε n^{1/r})` converges:
//!
//! * [`envelope`] — slowly varying correction functions on the dyadic grid
//!   and the regularization/smoothing constructions that turn a summable
//!   sequence into well-behaved concave/convex envelopes.
//! * [`params`] — dependence regimes, parameter validation, and the critical
//!   exponent `q(r, p)` per regime.
//! * [`process`] — exact, seedable samplers for the baseline and
//!   counterexample block processes, with closed-form moments.
//! * [`exact`] — finite-`n` distribution oracle for the block-structured
//!   discrete processes.
//! * [`montecarlo`] — reproducible tail-probability estimation with Wilson
//!   score intervals.
//! * [`bounds`] — Doob/Markov/Shao maximal-inequality evaluators.
//! * [`series`] — ledger assembly, divergence certificates, and finite-horizon
//!   rate diagnostics.

pub mod bounds;
pub mod envelope;
pub mod error;
pub mod exact;
pub mod montecarlo;
pub mod params;
pub mod process;
pub mod series;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
