//! Slowly varying correction functions and the constructive envelope toolkit.
//!
//! Everything here lives on the dyadic grid `2^1, …, 2^N`: summability of
//! `Σ 1/f(2^n)` is the exact boundary between the positive convergence
//! theorems and the counterexamples, and the constructions below turn a
//! summable input into progressively better-behaved envelopes (slowly varying
//! ratios, a C² interpolation, concave/convex power envelopes, a piecewise
//! linear convex majorant).

mod convex;
mod dyadic;
mod power;
mod regularize;
mod smooth;

pub use convex::{convex_linear_envelope, sqrt_compose, ConvexPowerFn, PiecewiseConvexEnvelope, SqrtCompose};
pub use dyadic::{dyadic_sum_test, eval_log_tower, log_plus, CorrectionFn, DyadicFunction, Interpolation, SumForm};
pub use power::{decreasing_after, power_concave, power_convex, Curvature, PowerEnvelope};
pub use regularize::{
    ratio_smooth, regularize_sequence, regularize_with, select_schedule, RatioSmooth,
    RegularizationSchedule, ScheduleRule, SummableSeqSpec, TailBound,
};
pub use smooth::{
    finite_difference_check, growth_bound_check, smooth_c2_envelope, FdReport, GrowthReport,
    SmoothEnvelope,
};
