//! C² interpolation of a dyadic function via raised-cosine derivative bumps.
//!
//! Within the octave `[2^n, 2^{n+1}]` the derivative is the bump
//! `r_n(u) = q_n (1 − cos(2^{1−n} π u))` with `q_n = 2^{−n}(f(2^{n+1}) − f(2^n))`,
//! so the interpolant hits the next dyadic value exactly, has vanishing first
//! derivative at every dyadic point, and a continuous second derivative. The
//! closed forms below are the antiderivative and derivative of `r_n`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::envelope::dyadic::DyadicFunction;
use crate::{Error, Result};

/// C² non-decreasing interpolant of a dyadic value table.
#[derive(Debug, Clone)]
pub struct SmoothEnvelope {
    values: Vec<f64>,
    q: Vec<f64>,
}

impl SmoothEnvelope {
    pub fn horizon(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn domain_max(&self) -> f64 {
        (self.horizon() as f64).exp2()
    }

    pub fn value_at_dyadic(&self, n: u32) -> Result<f64> {
        if n == 0 || n > self.horizon() {
            return Err(Error::HorizonExceeded {
                n: n as u64,
                max: self.horizon() as u64,
            });
        }
        Ok(self.values[(n - 1) as usize])
    }

    /// `q_n`, 1-indexed, defined for `n <= N−1`.
    pub fn q(&self, n: u32) -> f64 {
        self.q[(n - 1) as usize]
    }

    /// Consecutive dyadic ratio minus one for octave `n`, the scale that
    /// bounds the envelope's relative growth.
    pub fn ratio_minus_one(&self, n: u32) -> f64 {
        let f0 = self.values[(n - 1) as usize];
        let f1 = self.values[n as usize];
        f1 / f0 - 1.0
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

    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.value_d1_d2(x)?.0)
    }

    pub fn deriv1(&self, x: f64) -> Result<f64> {
        Ok(self.value_d1_d2(x)?.1)
    }

    pub fn deriv2(&self, x: f64) -> Result<f64> {
        Ok(self.value_d1_d2(x)?.2)
    }

    /// `(value, deriv1, deriv2)` sharing one octave lookup. Dyadic points,
    /// including the right domain endpoint, read the table exactly.
    pub fn value_d1_d2(&self, x: f64) -> Result<(f64, f64, f64)> {
        match self.octave(x)? {
            None => Ok((self.values[0], 0.0, 0.0)),
            Some((n, u)) => {
                let f0 = self.values[(n - 1) as usize];
                if u == 0.0 {
                    return Ok((f0, 0.0, 0.0));
                }
                if u == (n as f64).exp2() {
                    return Ok((self.values[n as usize], 0.0, 0.0));
                }
                let q = self.q(n);
                let omega = (1.0 - n as f64).exp2() * std::f64::consts::PI;
                let (s, c) = (omega * u).sin_cos();
                Ok((f0 + q * (u - s / omega), q * (1.0 - c), q * omega * s))
            }
        }
    }
}

/// Builds the C² envelope through the dyadic values of `g`. The constant
/// piece on `[0, 2]` equals `g(2)`.
pub fn smooth_c2_envelope(g: &DyadicFunction) -> Result<SmoothEnvelope> {
    let values = g.values().to_vec();
    if values.len() < 2 {
        return Err(Error::invalid("need at least two dyadic points to interpolate"));
    }
    let q = values
        .windows(2)
        .enumerate()
        .map(|(i, w)| ((w[1] - w[0]) as f64) * (-(i as f64) - 1.0).exp2())
        .collect::<Vec<_>>();
    debug_assert!(q.iter().all(|&x| x >= 0.0));
    Ok(SmoothEnvelope { values, q })
}

/// Worst deviations between the derivative evaluators and centered finite
/// differences at seeded random interior points, measured relative to the
/// octave's oscillation scale.
#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub max_rel_d1: f64,
    pub max_rel_d2: f64,
    pub points: usize,
}

pub fn finite_difference_check(env: &SmoothEnvelope, points: usize, seed: u64) -> Result<FdReport> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_max = env.horizon();
    if n_max < 2 {
        return Err(Error::invalid("envelope has no interior octave"));
    }
    let mut report = FdReport {
        max_rel_d1: 0.0,
        max_rel_d2: 0.0,
        points,
    };
    for _ in 0..points {
        // log-uniform over the octaves, clear of the outer boundaries
        let e = rng.random_range(1.02..(n_max as f64) - 0.02);
        let x = e.exp2();
        let n = env.octave(x)?.map(|(n, _)| n).unwrap_or(1);
        let h = (n as f64).exp2() * 1e-4;
        let q = env.q(n);
        let omega = (1.0 - n as f64).exp2() * std::f64::consts::PI;

        let d1 = env.deriv1(x)?;
        let fd1 = (env.value(x + h)? - env.value(x - h)?) / (2.0 * h);
        let scale1 = d1.abs().max(2.0 * q);
        if scale1 > 0.0 {
            report.max_rel_d1 = report.max_rel_d1.max((fd1 - d1).abs() / scale1);
        } else {
            assert_eq!(fd1, 0.0, "flat octave must have zero finite difference");
        }

        let d2 = env.deriv2(x)?;
        let fd2 = (env.deriv1(x + h)? - env.deriv1(x - h)?) / (2.0 * h);
        let scale2 = d2.abs().max(q * omega);
        if scale2 > 0.0 {
            report.max_rel_d2 = report.max_rel_d2.max((fd2 - d2).abs() / scale2);
        }
    }
    Ok(report)
}

/// Worst margins of the finite growth bounds
/// `x f'(x)/f(x) <= 4(ratio−1)` and `x² |f''(x)|/f(x) <= 8π(ratio−1)`
/// over an even sampling of every octave. Negative margins mean the bounds
/// hold strictly.
#[derive(Debug, Clone, Copy)]
pub struct GrowthReport {
    pub max_d1_margin: f64,
    pub max_d2_margin: f64,
}

impl GrowthReport {
    pub fn ok(&self) -> bool {
        self.max_d1_margin <= 1e-12 && self.max_d2_margin <= 1e-12
    }
}

pub fn growth_bound_check(env: &SmoothEnvelope, samples_per_octave: u32) -> Result<GrowthReport> {
    let mut report = GrowthReport {
        max_d1_margin: f64::NEG_INFINITY,
        max_d2_margin: f64::NEG_INFINITY,
    };
    for n in 1..env.horizon() {
        let base = (n as f64).exp2();
        let rm1 = env.ratio_minus_one(n);
        for j in 0..=samples_per_octave {
            let x = base + base * j as f64 / samples_per_octave as f64;
            let (v, d1, d2) = env.value_d1_d2(x)?;
            let lhs1 = x * d1 / v;
            let lhs2 = x * x * d2.abs() / v;
            report.max_d1_margin = report.max_d1_margin.max(lhs1 - 4.0 * rm1);
            report.max_d2_margin = report
                .max_d2_margin
                .max(lhs2 - 8.0 * std::f64::consts::PI * rm1);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::dyadic::DyadicFunction;

    fn two_point() -> SmoothEnvelope {
        let g = DyadicFunction::from_values(vec![1.0, 2.0]).unwrap();
        smooth_c2_envelope(&g).unwrap()
    }

    #[test]
    fn bump_height_is_halved_increment() {
        // q_1 = 2^{-1}(f(4) − f(2))
        assert_eq!(two_point().q(1), 0.5);
    }

    #[test]
    fn closed_form_midpoint() {
        // at x = 3, u = 1, sin(π·1) = 0, so value = 1 + 0.5·1 = 1.5
        let env = two_point();
        assert!((env.value(3.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_vanishes_at_dyadic_points() {
        let g = DyadicFunction::log_tower(1, 1.0, 20).unwrap();
        let env = smooth_c2_envelope(&g).unwrap();
        for n in 1..=19u32 {
            assert_eq!(env.deriv1((n as f64).exp2()).unwrap(), 0.0);
        }
    }

    #[test]
    fn hits_dyadic_values_exactly() {
        let g = DyadicFunction::log_tower(2, 0.5, 24).unwrap();
        let env = smooth_c2_envelope(&g).unwrap();
        for n in 1..=24u32 {
            let x = (n as f64).exp2();
            assert_eq!(env.value(x).unwrap(), g.value_at_dyadic(n).unwrap());
        }
    }

    #[test]
    fn constant_function_is_flat() {
        let g = DyadicFunction::from_values(vec![3.0; 10]).unwrap();
        let env = smooth_c2_envelope(&g).unwrap();
        for i in 0..50 {
            let x = 2.0 + i as f64 * 20.0;
            assert_eq!(env.value(x).unwrap(), 3.0);
            assert_eq!(env.deriv1(x).unwrap(), 0.0);
            assert_eq!(env.deriv2(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn non_decreasing_on_dense_grid() {
        let g = DyadicFunction::log_tower(1, 0.0, 16).unwrap();
        let env = smooth_c2_envelope(&g).unwrap();
        let mut prev = 0.0;
        for j in 0..2000 {
            let x = (1.0 + 14.9 * j as f64 / 2000.0).exp2();
            let v = env.value(x).unwrap();
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn finite_differences_match_evaluators() {
        let g = DyadicFunction::log_tower(1, 1.0, 30).unwrap();
        let env = smooth_c2_envelope(&g).unwrap();
        let report = finite_difference_check(&env, 1000, 0xFD5EED).unwrap();
        assert!(report.max_rel_d1 < 1e-5, "d1 deviation {}", report.max_rel_d1);
        assert!(report.max_rel_d2 < 1e-5, "d2 deviation {}", report.max_rel_d2);
    }

    #[test]
    fn growth_bounds_hold() {
        let g = DyadicFunction::log_tower(1, 1.0, 30).unwrap();
        let env = smooth_c2_envelope(&g).unwrap();
        let report = growth_bound_check(&env, 257).unwrap();
        assert!(report.ok(), "{report:?}");
    }

    #[test]
    fn domain_errors() {
        let env = two_point();
        assert!(env.value(4.0 + 1e-9).is_err());
        assert!(env.value(-0.1).is_err());
        assert!(env.value(4.0).is_ok());
    }
}
