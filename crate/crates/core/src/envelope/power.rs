//! Concave/convex power envelopes `x^p f(x)` located by threshold scans.
//!
//! The asymptotic facts (`f'/f = o(1/x)`, `f''/f = o(1/x²)`) only guarantee
//! existence of the thresholds; here they are located by sampling a geometric
//! grid with 64 points per octave and demanding that the defining inequality
//! hold at every remaining sample through the horizon.

use serde::Serialize;

use crate::envelope::smooth::SmoothEnvelope;
use crate::{Error, Result};

pub const SAMPLES_PER_OCTAVE: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Curvature {
    Concave,
    Convex,
}

/// `x^p f(x)` above a threshold, affine below it, positive at zero.
#[derive(Debug, Clone)]
pub struct PowerEnvelope {
    pub exponent: f64,
    pub threshold: f64,
    pub affine_slope: f64,
    pub value_at_threshold: f64,
    pub curvature: Curvature,
    base: SmoothEnvelope,
}

impl PowerEnvelope {
    pub fn base(&self) -> &SmoothEnvelope {
        &self.base
    }

    pub fn domain_max(&self) -> f64 {
        self.base.domain_max()
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value_at_threshold - self.affine_slope * self.threshold
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::OutOfDomain {
                x,
                max: self.domain_max(),
            });
        }
        if x < self.threshold {
            Ok(self.value_at_threshold - self.affine_slope * (self.threshold - x))
        } else {
            Ok(self.power_value(x)?.0)
        }
    }

    /// `(f_p, f_p', f_p'')` of the raw power function `x^p f(x)`, valid for
    /// `x >= 2`.
    pub fn power_value(&self, x: f64) -> Result<(f64, f64, f64)> {
        power_derivatives(&self.base, self.exponent, x)
    }
}

fn power_derivatives(env: &SmoothEnvelope, p: f64, x: f64) -> Result<(f64, f64, f64)> {
    let (v, d1, d2) = env.value_d1_d2(x)?;
    let xp = x.powf(p);
    let fp = xp * v;
    let fp1 = xp * (p * v / x + d1);
    let fp2 = xp * (p * (p - 1.0) * v / (x * x) + 2.0 * p * d1 / x + d2);
    Ok((fp, fp1, fp2))
}

fn check_power_range(env: &SmoothEnvelope, p: f64) -> Result<()> {
    let top = env.domain_max().powf(p.max(1.0)) * env.value(env.domain_max())?;
    if !top.is_finite() {
        return Err(Error::invalid(format!(
            "x^{p}·f(x) overflows at the horizon 2^{}",
            env.horizon()
        )));
    }
    Ok(())
}

/// The scan grid `2^{1 + j/64}` over `[2, 2^N]`.
fn grid(n_max: u32) -> Vec<f64> {
    let count = SAMPLES_PER_OCTAVE * (n_max - 1);
    (0..=count)
        .map(|j| (1.0 + j as f64 / SAMPLES_PER_OCTAVE as f64).exp2())
        .collect()
}

/// First dyadic point `2^c` such that `cond` holds at every grid sample
/// `>= 2^c`; errors with the largest violating sample otherwise. The
/// candidate must leave at least one full certified octave above it, so a
/// vacuous match at the domain edge does not count.
fn first_persistent_dyadic(
    samples: &[f64],
    cond: &mut dyn FnMut(f64) -> Result<bool>,
    what: &str,
) -> Result<f64> {
    let mut ok = vec![false; samples.len()];
    let mut suffix = true;
    let mut largest_violation = None;
    for (i, &x) in samples.iter().enumerate().rev() {
        if suffix && !cond(x)? {
            suffix = false;
            largest_violation = Some(x);
        }
        ok[i] = suffix;
    }
    let octaves = (samples.len() - 1) / SAMPLES_PER_OCTAVE as usize;
    for c in 1..=octaves {
        let i = (c - 1) * SAMPLES_PER_OCTAVE as usize;
        if ok[i] {
            return Ok(samples[i]);
        }
    }
    Err(Error::ScanFailed(format!(
        "{what} never persists within the horizon; largest violating sample {:?}",
        largest_violation
    )))
}

/// Concave increasing envelope of `x^p f(x)` for `p ∈ (0, 1)`.
///
/// The threshold is `N_p = max{K_p, L_p}` where `K_p` certifies `f_p'' < 0`
/// and `L_p` certifies `0 < f_p'` with `f_p'/f_p < 1/x`; below `N_p` the
/// envelope follows the tangent at `N_p`, which leaves it positive at zero.
pub fn power_concave(f: &SmoothEnvelope, p: f64) -> Result<PowerEnvelope> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p={p} must lie in (0, 1)")));
    }
    check_power_range(f, p)?;
    let samples = grid(f.horizon());
    let k_p = first_persistent_dyadic(
        &samples,
        &mut |x| Ok(power_derivatives(f, p, x)?.2 < 0.0),
        "concavity of x^p f(x)",
    )?;
    let l_p = first_persistent_dyadic(
        &samples,
        &mut |x| {
            let (fp, fp1, _) = power_derivatives(f, p, x)?;
            Ok(fp1 > 0.0 && fp1 / fp < 1.0 / x)
        },
        "derivative ratio of x^p f(x)",
    )?;
    let threshold = k_p.max(l_p);
    let (fp, fp1, _) = power_derivatives(f, p, threshold)?;
    let env = PowerEnvelope {
        exponent: p,
        threshold,
        affine_slope: fp1,
        value_at_threshold: fp,
        curvature: Curvature::Concave,
        base: f.clone(),
    };
    debug_assert!(env.value_at_zero() > 0.0);
    Ok(env)
}

/// Convex increasing envelope of `x^q f(x)` for `q > 1`, affine on
/// `[0, N_q]` with slope `ε_q = min{f_q'(N_q), f_q(N_q)/N_q}/2`.
pub fn power_convex(f: &SmoothEnvelope, q: f64) -> Result<PowerEnvelope> {
    if !(q > 1.0) {
        return Err(Error::invalid(format!("q={q} must exceed 1")));
    }
    check_power_range(f, q)?;
    let samples = grid(f.horizon());
    let threshold = first_persistent_dyadic(
        &samples,
        &mut |x| {
            let (_, fq1, fq2) = power_derivatives(f, q, x)?;
            Ok(fq2 > 0.0 && fq1 > 0.0)
        },
        "convexity of x^q f(x)",
    )?;
    let (fq, fq1, _) = power_derivatives(f, q, threshold)?;
    let eps_q = 0.5 * fq1.min(fq / threshold);
    debug_assert!(eps_q > 0.0 && eps_q < fq1);
    Ok(PowerEnvelope {
        exponent: q,
        threshold,
        affine_slope: eps_q,
        value_at_threshold: fq,
        curvature: Curvature::Convex,
        base: f.clone(),
    })
}

/// Smallest grid sample after which `x^{−c} f(x)` is strictly decreasing
/// through the horizon (certified by `x f'(x) < c f(x)` at every remaining
/// sample).
pub fn decreasing_after(f: &SmoothEnvelope, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("c={c} must be positive")));
    }
    let samples = grid(f.horizon());
    let mut suffix_from = None;
    for (i, &x) in samples.iter().enumerate().rev() {
        let (v, d1, _) = f.value_d1_d2(x)?;
        if x * d1 < c * v {
            suffix_from = Some(i);
        } else {
            break;
        }
    }
    match suffix_from {
        // demand at least one full comparison interval above the return point
        Some(i) if i + 1 < samples.len() => Ok(samples[i]),
        _ => Err(Error::ScanFailed(format!(
            "x^{{-{c}}}·f never becomes decreasing within the horizon"
        ))),
    }
}
