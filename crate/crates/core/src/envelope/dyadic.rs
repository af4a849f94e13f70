//! Log-tower functions and non-decreasing functions on the dyadic grid.

use serde::Serialize;

use crate::{Error, Result};

/// `log⁺(x) = max{1, ln x}` with `log⁺(0) = 1`. Natural logarithm.
pub fn log_plus(x: f64) -> f64 {
    assert!(x >= 0.0 && !x.is_nan(), "log_plus needs x >= 0, got {x}");
    if x == 0.0 {
        1.0
    } else {
        x.ln().max(1.0)
    }
}

/// Evaluates `f_m(x)·(log⁺_m x)^eps` where `f_m(x) = Π_{k=1}^m log⁺_k(x)`
/// and `log⁺_k` is the k-th iterate of `log⁺`.
///
/// With `eps = 0` the series `Σ 1/f_m(2^n)` diverges; any `eps > 0` tips it
/// into convergence, which is what makes these the boundary markers for the
/// whole toolkit. Result is always `≥ 1`.
pub fn eval_log_tower(m: u32, eps: f64, x: f64) -> f64 {
    assert!(m >= 1, "tower height m must be >= 1");
    assert!(eps >= 0.0, "eps must be non-negative");
    let mut iterate = x;
    let mut product = 1.0;
    for _ in 0..m {
        iterate = log_plus(iterate);
        product *= iterate;
    }
    if eps == 0.0 {
        product
    } else {
        product * iterate.powf(eps)
    }
}

/// Interpolation rule between dyadic points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Interpolation {
    /// Right-continuous step: constant on `[2^n, 2^{n+1})`.
    StepRight,
    /// Evaluate the log-tower formula directly (the dyadic values are samples
    /// of it).
    LogTower { m: u32, eps: f64 },
}

/// A non-decreasing positive function represented by its values at `2^n`,
/// `n = 1..N`, plus a constant value on `[0, 2)`.
///
/// Evaluation outside `[0, 2^N]` is an error, never an extrapolation.
#[derive(Debug, Clone, Serialize)]
pub struct DyadicFunction {
    values: Vec<f64>,
    below_2: f64,
    interpolation: Interpolation,
}

impl DyadicFunction {
    /// Builds from explicit dyadic values with step interpolation; the value
    /// on `[0, 2)` defaults to the value at 2.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let below_2 = *values
            .first()
            .ok_or_else(|| Error::invalid("dyadic value list is empty"))?;
        Self::with_below_2(values, below_2, Interpolation::StepRight)
    }

    pub fn with_below_2(values: Vec<f64>, below_2: f64, interpolation: Interpolation) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("dyadic value list is empty"));
        }
        if !(below_2 > 0.0) || below_2 > values[0] {
            return Err(Error::invalid(format!(
                "value on [0,2) must satisfy 0 < v <= f(2), got {below_2}"
            )));
        }
        for (i, w) in values.windows(2).enumerate() {
            if !(w[0] > 0.0) {
                return Err(Error::invalid(format!("f(2^{}) = {} is not positive", i + 1, w[0])));
            }
            if w[1] < w[0] {
                return Err(Error::invalid(format!(
                    "dyadic values must be non-decreasing: f(2^{}) = {} > f(2^{}) = {}",
                    i + 1,
                    w[0],
                    i + 2,
                    w[1]
                )));
            }
        }
        if !(*values.last().unwrap() > 0.0) || !values.last().unwrap().is_finite() {
            return Err(Error::invalid("dyadic values must be positive and finite"));
        }
        Ok(DyadicFunction {
            values,
            below_2,
            interpolation,
        })
    }

    /// Samples the log-tower `f_{m,eps}` at `2^1..2^N`.
    pub fn log_tower(m: u32, eps: f64, horizon_n: u32) -> Result<Self> {
        if horizon_n == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        let values = (1..=horizon_n)
            .map(|n| eval_log_tower(m, eps, (n as f64).exp2()))
            .collect();
        Self::with_below_2(values, 1.0, Interpolation::LogTower { m, eps })
    }

    /// Number of dyadic points `N`; the domain is `[0, 2^N]`.
    pub fn horizon(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn domain_max(&self) -> f64 {
        (self.horizon() as f64).exp2()
    }

    /// Value at the dyadic point `2^n` (1-indexed, `n <= N`).
    pub fn value_at_dyadic(&self, n: u32) -> Result<f64> {
        if n == 0 || n > self.horizon() {
            return Err(Error::HorizonExceeded {
                n: n as u64,
                max: self.horizon() as u64,
            });
        }
        Ok(self.values[(n - 1) as usize])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn below_2(&self) -> f64 {
        self.below_2
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Octave index `n >= 1` with `2^n <= x < 2^{n+1}` (or `n = N` at the
    /// right endpoint). Caller guarantees `2 <= x <= 2^N`.
    pub(crate) fn octave_of(&self, x: f64) -> u32 {
        let mut n = x.log2().floor() as i64;
        // log2+floor can be off by one at representation boundaries
        while (n as f64).exp2() > x {
            n -= 1;
        }
        while ((n + 1) as f64).exp2() <= x {
            n += 1;
        }
        (n as u32).min(self.horizon())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) || x > self.domain_max() {
            return Err(Error::OutOfDomain {
                x,
                max: self.domain_max(),
            });
        }
        if x < 2.0 {
            return Ok(self.below_2);
        }
        match self.interpolation {
            Interpolation::StepRight => {
                let n = self.octave_of(x);
                Ok(self.values[(n - 1) as usize])
            }
            Interpolation::LogTower { m, eps } => Ok(eval_log_tower(m, eps, x)),
        }
    }
}

/// A correction function: either a log tower (total on `[0, ∞)`) or a
/// finite-horizon dyadic table.
#[derive(Debug, Clone, Serialize)]
pub enum CorrectionFn {
    LogTower { m: u32, eps: f64 },
    Dyadic(DyadicFunction),
}

impl CorrectionFn {
    pub fn log_tower(m: u32, eps: f64) -> Self {
        CorrectionFn::LogTower { m, eps }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            CorrectionFn::LogTower { m, eps } => Ok(eval_log_tower(*m, *eps, x)),
            CorrectionFn::Dyadic(f) => f.eval(x),
        }
    }
}

/// The four equiconvergent index transforms of the dyadic sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SumForm {
    /// `Σ 1/f(2^{cn})`
    Dyadic,
    /// `Σ 1/f(ε·2^{cn})`
    DyadicScaled,
    /// `Σ 1/(n·f(n^c))`
    Polynomial,
    /// `Σ 1/(n·f(ε·n^c))`
    PolynomialScaled,
}

/// Partial sums of the selected form truncated at `n_terms`.
///
/// The four forms converge or diverge together, so comparing their partial
/// sums is a cheap sanity check on an `f` implementation.
pub fn dyadic_sum_test(
    f: &CorrectionFn,
    form: SumForm,
    c: f64,
    eps: f64,
    n_terms: u32,
) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("c={c} must be positive")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps={eps} must be positive")));
    }
    let mut sums = Vec::with_capacity(n_terms as usize);
    let mut acc = 0.0;
    for n in 1..=n_terms {
        let nf = n as f64;
        let term = match form {
            SumForm::Dyadic => 1.0 / f.eval((c * nf).exp2())?,
            SumForm::DyadicScaled => 1.0 / f.eval(eps * (c * nf).exp2())?,
            SumForm::Polynomial => 1.0 / (nf * f.eval(nf.powf(c))?),
            SumForm::PolynomialScaled => 1.0 / (nf * f.eval(eps * nf.powf(c))?),
        };
        acc += term;
        sums.push(acc);
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_tower_base_cases() {
        assert_eq!(eval_log_tower(1, 0.0, 1.0), 1.0);
        assert_eq!(eval_log_tower(1, 0.0, 0.0), 1.0);
        let expect = 32f64.ln();
        assert!((eval_log_tower(1, 0.0, 32.0) - expect).abs() < 1e-15);
        let expect = 16f64.ln() * 16f64.ln();
        assert!((eval_log_tower(1, 1.0, 16.0) - expect).abs() / expect < 1e-15);
    }

    #[test]
    fn log_tower_at_least_one() {
        for m in 1..4 {
            for i in 0..200 {
                let x = i as f64 * 0.37;
                assert!(eval_log_tower(m, 0.5, x) >= 1.0);
            }
        }
    }

    #[test]
    fn tower_of_height_two_iterates() {
        // f_2(x) = log+(x) * log+(log+(x))
        let x = 1e6f64;
        let l1 = x.ln();
        let expect = l1 * l1.ln();
        assert!((eval_log_tower(2, 0.0, x) - expect).abs() / expect < 1e-15);
    }

    #[test]
    fn dyadic_sum_log_tower_prefix() {
        // f_1(2) = 1 (ln 2 < 1), f_1(4) = ln 4
        let f = CorrectionFn::log_tower(1, 0.0);
        let sums = dyadic_sum_test(&f, SumForm::Dyadic, 1.0, 1.0, 2).unwrap();
        assert!((sums[0] - 1.0).abs() < 1e-15);
        assert!((sums[1] - (1.0 + 1.0 / 4f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn dyadic_sum_constant_function() {
        let f = CorrectionFn::Dyadic(DyadicFunction::from_values(vec![1.0; 8]).unwrap());
        let sums = dyadic_sum_test(&f, SumForm::Dyadic, 1.0, 1.0, 3).unwrap();
        assert_eq!(sums, vec![1.0, 2.0, 3.0]);
    }

    // Σ_{n=1}^N 1/f_{1,1}(2^n) = 1 + Σ_{n>=2} 1/(n ln 2)^2, bounded by
    // 1 + (π²/6 − 1)/ln²2, with tail from N at most 1/(ln²2 (N−1)).
    #[test]
    fn convergent_tower_sum_integral_oracle() {
        let f = CorrectionFn::log_tower(1, 1.0);
        let n_big = 4000;
        let sums = dyadic_sum_test(&f, SumForm::Dyadic, 1.0, 1.0, n_big).unwrap();
        let ln2 = std::f64::consts::LN_2;
        let bound = 1.0 + (std::f64::consts::PI.powi(2) / 6.0 - 1.0) / (ln2 * ln2);
        let last = *sums.last().unwrap();
        assert!(last <= bound, "partial sum {last} exceeds bound {bound}");
        // tail comparison at a midpoint
        let mid = 1000usize;
        let tail = last - sums[mid - 1];
        let tail_bound = 1.0 / (ln2 * ln2 * (mid as f64));
        assert!(tail <= tail_bound, "tail {tail} exceeds integral bound {tail_bound}");
    }

    #[test]
    fn partial_sums_non_decreasing() {
        let f = CorrectionFn::log_tower(2, 0.5);
        for form in [
            SumForm::Dyadic,
            SumForm::DyadicScaled,
            SumForm::Polynomial,
            SumForm::PolynomialScaled,
        ] {
            let sums = dyadic_sum_test(&f, form, 0.7, 0.3, 50).unwrap();
            for w in sums.windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn dyadic_eval_and_domain() {
        let f = DyadicFunction::from_values(vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
        assert_eq!(f.eval(1.9).unwrap(), 1.0);
        assert_eq!(f.eval(2.0).unwrap(), 1.0);
        assert_eq!(f.eval(3.9).unwrap(), 1.0);
        assert_eq!(f.eval(4.0).unwrap(), 2.0);
        assert_eq!(f.eval(7.9).unwrap(), 2.0);
        assert_eq!(f.eval(8.0).unwrap(), 4.0);
        assert!(f.eval(8.0001).is_err());
        assert!(f.eval(-1.0).is_err());
    }

    #[test]
    fn dyadic_validation() {
        assert!(DyadicFunction::from_values(vec![]).is_err());
        assert!(DyadicFunction::from_values(vec![2.0, 1.0]).is_err());
        assert!(DyadicFunction::from_values(vec![0.0, 1.0]).is_err());
        assert!(DyadicFunction::with_below_2(vec![1.0, 2.0], 1.5, Interpolation::StepRight).is_err());
    }

    #[test]
    fn log_tower_dyadic_matches_formula_between_points() {
        let f = DyadicFunction::log_tower(1, 0.0, 10).unwrap();
        assert!((f.eval(100.0).unwrap() - 100f64.ln()).abs() < 1e-15);
        assert_eq!(f.eval(1024.0).unwrap(), 1024f64.ln());
        assert!(f.eval(1025.0).is_err());
    }
}
