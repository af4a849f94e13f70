//! Piecewise linear convex majorants and the square-root composition.
//!
//! The recursion `b_{n+2} = max{a_{n+2}, (3/2)b_{n+1} − (1/2)b_n}` on
//! `a_n = g(2^n)` yields `b` non-decreasing with `b_n/a_n <= 2` and slopes
//! `d_n = 2b_{n+1} − b_n` non-decreasing, which makes `h(x) = x·f(x)`
//! piecewise linear, increasing and convex.

use crate::envelope::dyadic::{DyadicFunction, Interpolation};
use crate::envelope::power::{power_convex, PowerEnvelope};
use crate::envelope::smooth::smooth_c2_envelope;
use crate::{Error, Result};

/// `f` with `f(2^n) = b_n` interpolated so that `h(x) = x f(x)` is piecewise
/// linear and convex.
#[derive(Debug, Clone)]
pub struct PiecewiseConvexEnvelope {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl PiecewiseConvexEnvelope {
    pub fn horizon(&self) -> u32 {
        self.b.len() as u32
    }

    pub fn domain_max(&self) -> f64 {
        (self.horizon() as f64).exp2()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Input values `a_n = g(2^n)`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Slope of `h` on the n-th piece: `d_0 = b_1` on `[0, 2]`,
    /// `d_n = 2b_{n+1} − b_n` on `[2^n, 2^{n+1}]`.
    pub fn slope(&self, n: u32) -> f64 {
        if n == 0 {
            self.b[0]
        } else {
            2.0 * self.b[n as usize] - self.b[(n - 1) as usize]
        }
    }

    pub fn max_ratio_to_input(&self) -> f64 {
        self.b
            .iter()
            .zip(&self.a)
            .map(|(b, a)| b / a)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn octave(&self, x: f64) -> Result<Option<(u32, f64)>> {
        if !(x >= 0.0) || x > self.domain_max() {
            return Err(Error::OutOfDomain {
                x,
                max: self.domain_max(),
            });
        }
        if x < 2.0 {
            return Ok(None);
        }
        let mut n = x.log2().floor() as u32;
        if (n as f64).exp2() > x {
            n -= 1;
        } else if ((n + 1) as f64).exp2() <= x {
            n += 1;
        }
        let n = n.min(self.horizon() - 1);
        Ok(Some((n, x - (n as f64).exp2())))
    }

    /// `f(x)`: hyperbolic blend between consecutive `b` values.
    pub fn value(&self, x: f64) -> Result<f64> {
        match self.octave(x)? {
            None => Ok(self.b[0]),
            Some((n, u)) => {
                let b0 = self.b[(n - 1) as usize];
                let b1 = self.b[n as usize];
                Ok(b0 + 2.0 * (b1 - b0) * u / (u + (n as f64).exp2()))
            }
        }
    }

    /// `h(x) = x·f(x)` through the exact linear piece form.
    pub fn h_value(&self, x: f64) -> Result<f64> {
        match self.octave(x)? {
            None => Ok(self.b[0] * x),
            Some((n, u)) => {
                let base = (n as f64).exp2();
                Ok(self.b[(n - 1) as usize] * base + self.slope(n) * u)
            }
        }
    }
}

/// Runs the max-recursion on the dyadic values of `g`.
pub fn convex_linear_envelope(g: &DyadicFunction) -> Result<PiecewiseConvexEnvelope> {
    let a = g.values().to_vec();
    if a.len() < 2 {
        return Err(Error::invalid("need at least two dyadic values"));
    }
    let mut b = Vec::with_capacity(a.len());
    b.push(a[0]);
    b.push(a[1]);
    for n in 2..a.len() {
        b.push(a[n].max(1.5 * b[n - 1] - 0.5 * b[n - 2]));
    }
    Ok(PiecewiseConvexEnvelope { b, a })
}

/// Convex increasing function equal to `x^q f(√x)` above a threshold: either
/// a smooth power envelope (q > 1) or the piecewise linear `h` (q = 1).
#[derive(Debug, Clone)]
pub enum ConvexPowerFn {
    Smooth(PowerEnvelope),
    PiecewiseLinear(PiecewiseConvexEnvelope),
}

impl ConvexPowerFn {
    pub fn value(&self, x: f64) -> Result<f64> {
        match self {
            ConvexPowerFn::Smooth(env) => env.value(x),
            ConvexPowerFn::PiecewiseLinear(env) => env.h_value(x),
        }
    }

    /// Above this point the function equals `x^q f(√x)`.
    pub fn threshold(&self) -> f64 {
        match self {
            ConvexPowerFn::Smooth(env) => env.threshold,
            ConvexPowerFn::PiecewiseLinear(_) => 2.0,
        }
    }
}

/// Result of [`sqrt_compose`].
#[derive(Debug, Clone)]
pub struct SqrtCompose {
    /// `f(x) = f*(x²)` restricted to the dyadic grid of the input horizon.
    pub f: DyadicFunction,
    /// Convex increasing `f_q` with `f_q(x) = x^q f(√x)` for `x >= n_q`.
    pub fq: ConvexPowerFn,
    pub n_q: f64,
}

/// Builds `f_q(x) = x^q f(√x)` convex by working on `g*(x) = g(√x)`: the
/// `q = 1` case uses the piecewise linear convex `h`, the `q > 1` case the
/// smooth power envelope. The returned `f` satisfies `f(2^n) = f*(4^n)`, so
/// `Σ 1/f(2^n) <= Σ 1/f*(2^n)` termwise.
pub fn sqrt_compose(g: &DyadicFunction, q: f64) -> Result<SqrtCompose> {
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("q={q} must be >= 1")));
    }
    let n = g.horizon();
    if n < 2 {
        return Err(Error::invalid("need at least two dyadic values"));
    }
    // g*(2^j) = g(2^{j/2}) for j = 1..2N
    let star_values: Vec<f64> = (1..=2 * n)
        .map(|j| g.eval((j as f64 / 2.0).exp2()))
        .collect::<Result<_>>()?;
    let g_star = DyadicFunction::with_below_2(star_values, g.below_2(), Interpolation::StepRight)?;

    let (fq, star_at): (ConvexPowerFn, Box<dyn Fn(u32) -> f64>) = if q == 1.0 {
        let env = convex_linear_envelope(&g_star)?;
        let b = env.b().to_vec();
        (
            ConvexPowerFn::PiecewiseLinear(env),
            Box::new(move |j: u32| b[(j - 1) as usize]),
        )
    } else {
        let sm = smooth_c2_envelope(&g_star)?;
        let values = g_star.values().to_vec();
        (
            ConvexPowerFn::Smooth(power_convex(&sm, q)?),
            Box::new(move |j: u32| values[(j - 1) as usize]),
        )
    };

    let f_values: Vec<f64> = (1..=n).map(|i| star_at(2 * i)).collect();
    let below_2 = g.below_2().min(f_values[0]);
    let f = DyadicFunction::with_below_2(f_values, below_2, Interpolation::StepRight)?;
    let n_q = fq.threshold();
    Ok(SqrtCompose { f, fq, n_q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_a(a: Vec<f64>) -> PiecewiseConvexEnvelope {
        convex_linear_envelope(&DyadicFunction::from_values(a).unwrap()).unwrap()
    }

    #[test]
    fn constant_input_is_fixed_point() {
        let env = from_a(vec![1.0; 12]);
        assert!(env.b().iter().all(|&b| b == 1.0));
        for n in 0..12 {
            assert_eq!(env.slope(n), 1.0);
        }
        // h(x) = x
        for i in 0..100 {
            let x = i as f64 * 40.0;
            assert_eq!(env.h_value(x).unwrap(), x);
        }
    }

    #[test]
    fn hand_executed_recursion() {
        // a = (1, 1, 4, 5): b_3 = max{4, 1.5·1 − 0.5·1} = 4,
        // b_4 = max{5, 1.5·4 − 0.5·1} = 5.5
        let env = from_a(vec![1.0, 1.0, 4.0, 5.0]);
        assert_eq!(env.b(), &[1.0, 1.0, 4.0, 5.5]);
    }

    #[test]
    fn ratio_to_input_at_most_two() {
        let env = from_a(vec![1.0, 1.0, 4.0, 5.0, 5.0, 5.0, 6.0, 20.0]);
        assert!(env.max_ratio_to_input() <= 2.0 + 1e-12);
    }

    #[test]
    fn slopes_non_decreasing_and_h_continuous() {
        let g = DyadicFunction::log_tower(1, 1.0, 60).unwrap();
        let env = convex_linear_envelope(&g).unwrap();
        for n in 1..60 {
            assert!(env.slope(n) >= env.slope(n - 1) - 1e-15, "slope dip at {n}");
        }
        for n in 1..=59u32 {
            let x = (n as f64).exp2();
            let left = env.h_value(x * (1.0 - 1e-13)).unwrap();
            let right = env.h_value(x).unwrap();
            assert!((left - right).abs() <= 1e-12 * right.abs().max(1.0));
        }
    }

    #[test]
    fn f_value_blend_matches_h_over_x() {
        let env = from_a(vec![1.0, 2.0, 3.5, 7.0, 7.0]);
        for i in 1..200 {
            let x = 2.0 + i as f64 * (30.0 - 2.0) / 200.0;
            let f = env.value(x).unwrap();
            let h = env.h_value(x).unwrap();
            assert!((h - x * f).abs() <= 1e-12 * h.abs());
        }
    }

    proptest! {
        // For any admissible (positive, non-decreasing) input, the recursion
        // keeps b_n/a_n <= 2 and the slopes monotone.
        #[test]
        fn recursion_invariants(increments in prop::collection::vec(0.0f64..3.0, 4..40)) {
            let mut a = vec![0.5f64];
            for inc in &increments {
                let last = *a.last().unwrap();
                a.push(last + inc);
            }
            let env = from_a(a);
            prop_assert!(env.max_ratio_to_input() <= 2.0 + 1e-9);
            for w in env.b().windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            for n in 1..env.horizon() {
                prop_assert!(env.slope(n) >= env.slope(n - 1) - 1e-9);
            }
        }
    }

    #[test]
    fn sqrt_compose_unit_base() {
        let g = DyadicFunction::from_values(vec![1.0; 10]).unwrap();
        let out = sqrt_compose(&g, 1.0).unwrap();
        assert!(out.f.values().iter().all(|&v| v == 1.0));
        assert_eq!(out.n_q, 2.0);
        // h is affine below 2 and equals x above
        assert_eq!(out.fq.value(1.0).unwrap(), 1.0);
        assert_eq!(out.fq.value(64.0).unwrap(), 64.0);
    }

    #[test]
    fn sqrt_compose_log_base_identity_above_threshold() {
        let g = DyadicFunction::log_tower(1, 0.0, 30).unwrap();
        let out = sqrt_compose(&g, 2.0).unwrap();
        // at x = 4^i >= N_q the defining identity holds exactly on the grid
        let mut checked = 0;
        for i in 1..=30u32 {
            let x = (2.0 * i as f64).exp2();
            if x < out.n_q {
                continue;
            }
            let lhs = out.fq.value(x).unwrap();
            let rhs = x.powi(2) * out.f.value_at_dyadic(i).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs(), "identity fails at 4^{i}");
            checked += 1;
        }
        assert!(checked > 5);
    }

    #[test]
    fn sqrt_compose_convex_on_grid() {
        let g = DyadicFunction::log_tower(1, 0.0, 30).unwrap();
        let out = sqrt_compose(&g, 2.0).unwrap();
        let top = match &out.fq {
            ConvexPowerFn::Smooth(env) => env.domain_max(),
            ConvexPowerFn::PiecewiseLinear(env) => env.domain_max(),
        };
        let mut x = out.n_q;
        let step = 2f64.powf(1.0 / 32.0);
        while x * step * step <= top {
            let (a, b, c) = (
                out.fq.value(x).unwrap(),
                out.fq.value(x * step).unwrap(),
                out.fq.value(x * step * step).unwrap(),
            );
            let second = (c - b) / (x * step * (step - 1.0)) - (b - a) / (x * (step - 1.0));
            assert!(second >= -1e-11 * b.abs().max(1.0), "convexity violated at {x}");
            x *= step;
        }
    }

    #[test]
    fn sqrt_compose_termwise_domination() {
        let g = DyadicFunction::log_tower(1, 1.0, 24).unwrap();
        let out = sqrt_compose(&g, 3.0).unwrap();
        // f(2^n) = f*(4^n) >= f*(2^n), so the reciprocal sums dominate termwise
        let star: Vec<f64> = (1..=48)
            .map(|j| g.eval((j as f64 / 2.0).exp2()).unwrap())
            .collect();
        for i in 1..=24u32 {
            let f_i = out.f.value_at_dyadic(i).unwrap();
            assert!(1.0 / f_i <= 1.0 / star[(i - 1) as usize] + 1e-15);
        }
    }
}
