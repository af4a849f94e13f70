//! Closed-form maximal inequalities and empirical violation checks.

use serde::Serialize;

use crate::montecarlo::TailEstimate;
use crate::process::ProcessSpec;
use crate::{Error, Result};

/// Inputs to the negative-association maximal inequality.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShaoInputs {
    pub x: f64,
    pub a: f64,
    pub alpha: f64,
    /// `B_n = Σ E(X_i²)`.
    pub b_n: f64,
    /// `P(max_{i<=n} |X_i| > a)`.
    pub p_max: f64,
}

impl ShaoInputs {
    pub fn new(x: f64, a: f64, alpha: f64, b_n: f64, p_max: f64) -> Result<Self> {
        if !(x > 0.0 && a > 0.0 && b_n > 0.0) {
            return Err(Error::invalid("x, a, B_n must be positive"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha={alpha} must lie in (0,1)")));
        }
        if !(0.0..=1.0).contains(&p_max) {
            return Err(Error::invalid(format!("p_max={p_max} must lie in [0,1]")));
        }
        Ok(ShaoInputs {
            x,
            a,
            alpha,
            b_n,
            p_max,
        })
    }
}

/// The exponential factor of the bound, isolated so its monotonicity in `x`
/// can be checked on a grid.
pub fn shao_exponential_factor(inp: &ShaoInputs) -> f64 {
    let ax = inp.a * inp.x;
    (-(inp.x * inp.x * inp.alpha) / (2.0 * (ax + inp.b_n))
        * (1.0 + (2.0 / 3.0) * (1.0 + ax / inp.b_n).ln()))
    .exp()
}

/// `P(M_n >= x) <= 2 p_max + (2/(1−α))·exp(−x²α/(2(ax+B_n))·(1 + (2/3)·ln(1 + ax/B_n)))`
/// for centered negatively associated sequences. Natural log.
pub fn shao_bound(inp: &ShaoInputs) -> f64 {
    2.0 * inp.p_max + 2.0 / (1.0 - inp.alpha) * shao_exponential_factor(inp)
}

/// `P(M_n >= t) <= E|S_n|^p / t^p` for martingale differences, `p >= 1`.
pub fn doob_bound(moment_p: f64, t: f64, p: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t must be positive"));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid("p must be >= 1"));
    }
    if !(moment_p >= 0.0) {
        return Err(Error::invalid("moment must be non-negative"));
    }
    Ok(moment_p / t.powf(p))
}

/// `P(g(|S_n|) > g(t)) <= E g(|S_n|) / g(t)` for increasing `g`.
pub fn markov_bound(g_moment: f64, g_at_t: f64) -> Result<f64> {
    if !(g_at_t > 0.0) {
        return Err(Error::invalid("g(t) must be positive"));
    }
    if !(g_moment >= 0.0) {
        return Err(Error::invalid("moment must be non-negative"));
    }
    Ok(g_moment / g_at_t)
}

/// Exact `P(max_{i<=n} |X_i| > a) = 1 − Π (1 − P(|X_i| > a))` for processes
/// with independent coordinates.
pub fn exact_p_max(spec: &ProcessSpec, n: u64, a: f64) -> Result<f64> {
    if !spec.has_independent_coordinates() {
        return Err(Error::unsupported(
            "exact p_max needs independent coordinates (shared block coins couple indices)",
        ));
    }
    if n == 0 || n > spec.horizon() {
        return Err(Error::HorizonExceeded {
            n,
            max: spec.horizon(),
        });
    }
    let mut log_none = 0.0f64; // ln Π (1 − P(|X_i| > a))
    match spec {
        ProcessSpec::Iid(s) => {
            let p_exceed: f64 = s
                .atoms
                .iter()
                .zip(&s.probs)
                .filter(|(atom, _)| atom.abs() > a)
                .map(|(_, p)| p)
                .sum();
            if p_exceed >= 1.0 {
                return Ok(1.0);
            }
            log_none = n as f64 * (-p_exceed).ln_1p();
        }
        ProcessSpec::Blocks(s) => {
            for row in &s.blocks {
                if row.first_n > n {
                    break;
                }
                if row.prob == 0.0 || row.value <= a {
                    continue;
                }
                let count = (row.last_n.min(n) - row.first_n + 1) as f64;
                let p_exceed = 2.0 * row.prob;
                if p_exceed >= 1.0 {
                    return Ok(1.0);
                }
                log_none += count * (-p_exceed).ln_1p();
            }
        }
    }
    Ok(-log_none.exp_m1())
}

/// Margin report comparing a closed-form bound against an estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ViolationReport {
    pub bound: f64,
    /// `bound − ci_low`; negative means a statistically significant breach.
    pub margin: f64,
    pub violated: bool,
}

pub fn empirical_violation(bound: f64, est: &TailEstimate) -> ViolationReport {
    ViolationReport {
        bound,
        margin: bound - est.ci_low,
        violated: bound < est.ci_low,
    }
}
