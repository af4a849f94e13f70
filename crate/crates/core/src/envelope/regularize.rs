//! Regularization of summable sequences and ratio smoothing.
//!
//! Given a positive non-increasing summable sequence `{a_n}`, the recursion
//! `b_n = max{a_n, c_k b_{n−1}}` over a block schedule produces a dominating
//! non-increasing sequence whose consecutive ratios are pinned into
//! `[c_k, 1]` on block `k`, while the total sum stays below `3` provided the
//! schedule satisfies, for every `k`,
//!
//! ```text
//! tail(n_k) < 2^{−k}(1 − c_{k+1})   and   c_k^{n_{k+1}−n_k} <= 2^{−k}(1 − c_{k+1}).
//! ```
//!
//! Finite data cannot certify summability, so inputs carry an explicit
//! analytic tail majorant.

use std::fmt;
use std::sync::Arc;

use crate::envelope::dyadic::{eval_log_tower, DyadicFunction, Interpolation};
use crate::{Error, Result};

/// Analytic upper bound on `Σ_{n>=m} a_n`.
#[derive(Clone)]
pub enum TailBound {
    /// `a_n = first·ratio^{n−1}` with `ratio ∈ (0,1)`.
    Geometric { first: f64, ratio: f64 },
    /// `a_n = 1/(n·ln²(n+1))`; integral majorant `1/ln(m−1)` for `m >= 3`.
    InvNLogSq,
    /// `a_n = 1/f_{1,eps}(2^n)`; integral majorant
    /// `(m−1)^{−eps}/(eps·(ln 2)^{1+eps})` for `m >= 2`.
    LogTowerReciprocal { eps: f64 },
    /// User-supplied majorant. Must be non-increasing in `m`.
    Custom(Arc<dyn Fn(u64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TailBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailBound::Geometric { first, ratio } => {
                write!(f, "Geometric {{ first: {first}, ratio: {ratio} }}")
            }
            TailBound::InvNLogSq => write!(f, "InvNLogSq"),
            TailBound::LogTowerReciprocal { eps } => {
                write!(f, "LogTowerReciprocal {{ eps: {eps} }}")
            }
            TailBound::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl TailBound {
    pub fn bound(&self, m: u64) -> f64 {
        debug_assert!(m >= 1);
        match self {
            TailBound::Geometric { first, ratio } => {
                first * ratio.powi((m - 1) as i32) / (1.0 - ratio)
            }
            TailBound::InvNLogSq => {
                if m >= 3 {
                    1.0 / ((m - 1) as f64).ln()
                } else {
                    // prepend the explicit small terms
                    let a = |n: f64| 1.0 / (n * (n + 1.0).ln().powi(2));
                    let mut s = 1.0 / 2f64.ln(); // tail from 3
                    for n in (m..3).rev() {
                        s += a(n as f64);
                    }
                    s
                }
            }
            TailBound::LogTowerReciprocal { eps } => {
                let ln2 = std::f64::consts::LN_2;
                if m >= 2 {
                    ((m - 1) as f64).powf(-eps) / (eps * ln2.powf(1.0 + eps))
                } else {
                    1.0 + 1.0 / (eps * ln2.powf(1.0 + eps))
                }
            }
            TailBound::Custom(f) => f(m),
        }
    }
}

/// A positive non-increasing sequence `a_1..a_N` together with a tail majorant.
#[derive(Debug, Clone)]
pub struct SummableSeqSpec {
    terms: Vec<f64>,
    tail: TailBound,
}

impl SummableSeqSpec {
    pub fn new(terms: Vec<f64>, tail: TailBound) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("sequence is empty"));
        }
        for (i, w) in terms.windows(2).enumerate() {
            if !(w[0] > 0.0 && w[1] > 0.0) {
                return Err(Error::invalid(format!("a_{} must be positive", i + 1)));
            }
            if w[1] > w[0] {
                return Err(Error::invalid(format!(
                    "sequence must be non-increasing: a_{} = {} < a_{} = {}",
                    i + 1,
                    w[0],
                    i + 2,
                    w[1]
                )));
            }
        }
        let spec = SummableSeqSpec { terms, tail };
        for m in 1..=spec.horizon() {
            let t = spec.tail_bound(m);
            let a = spec.term(m);
            if t < a {
                return Err(Error::invalid(format!(
                    "tail bound {t} at m={m} is below the term a_m={a}"
                )));
            }
        }
        Ok(spec)
    }

    pub fn geometric(first: f64, ratio: f64, n: u64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid(format!("ratio={ratio} must lie in (0,1)")));
        }
        let terms = (0..n).map(|i| first * ratio.powi(i as i32)).collect();
        Self::new(terms, TailBound::Geometric { first, ratio })
    }

    /// `a_n = 1/(n ln²(n+1))`.
    pub fn inv_n_log_sq(n: u64) -> Result<Self> {
        let terms = (1..=n)
            .map(|i| {
                let x = i as f64;
                1.0 / (x * (x + 1.0).ln().powi(2))
            })
            .collect();
        Self::new(terms, TailBound::InvNLogSq)
    }

    /// `a_n = 1/f_{1,eps}(2^n)`, convergent for any `eps > 0`.
    pub fn log_tower_reciprocal(eps: f64, n: u64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::invalid("eps must be positive for a summable tower"));
        }
        let terms = (1..=n)
            .map(|i| 1.0 / eval_log_tower(1, eps, (i as f64).exp2()))
            .collect();
        Self::new(terms, TailBound::LogTowerReciprocal { eps })
    }

    pub fn horizon(&self) -> u64 {
        self.terms.len() as u64
    }

    /// `a_n`, 1-indexed.
    pub fn term(&self, n: u64) -> f64 {
        self.terms[(n - 1) as usize]
    }

    pub fn terms(&self) -> &[f64] {
        &self.terms
    }

    pub fn tail_bound(&self, m: u64) -> f64 {
        self.tail.bound(m)
    }
}

/// Block boundaries for the regularization recursion. Block `k` is
/// `(n_k, n_{k+1}]` and uses the ratio floor `c_k = 1 − 1/(k+1)`; the final
/// stored block extends through the data horizon.
#[derive(Debug, Clone)]
pub struct RegularizationSchedule {
    n_breaks: Vec<u64>,
}

impl RegularizationSchedule {
    pub fn from_breaks(n_breaks: Vec<u64>) -> Result<Self> {
        if n_breaks.is_empty() {
            return Err(Error::invalid("schedule needs at least one break"));
        }
        if n_breaks[0] == 0 {
            return Err(Error::invalid("breaks are 1-indexed positions"));
        }
        for w in n_breaks.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid("breaks must be strictly increasing"));
            }
        }
        Ok(RegularizationSchedule { n_breaks })
    }

    /// `c_k = 1 − 1/(k+1)`, strictly increasing to 1, each in (0,1).
    pub fn c(k: u32) -> f64 {
        1.0 - 1.0 / (k as f64 + 1.0)
    }

    pub fn n_breaks(&self) -> &[u64] {
        &self.n_breaks
    }

    pub fn n1(&self) -> u64 {
        self.n_breaks[0]
    }

    /// Block index of `n`, or `None` for the prefix `n <= n_1`.
    pub fn block_of(&self, n: u64) -> Option<u32> {
        if n <= self.n_breaks[0] {
            return None;
        }
        match self.n_breaks.binary_search(&n) {
            // n == n_{k+1} belongs to block k (blocks are left-open)
            Ok(idx) => Some(idx as u32),
            Err(idx) => Some((idx as u32).min(self.n_breaks.len() as u32 - 1).max(1)),
        }
    }

    /// Checks the two schedule inequalities against a sequence's tail bound,
    /// for every stored break within the data horizon.
    pub fn validate(&self, a: &SummableSeqSpec) -> Result<()> {
        for (i, &nk) in self.n_breaks.iter().enumerate() {
            let k = (i + 1) as u32;
            let target = 0.5f64.powi(k as i32) * (1.0 - Self::c(k + 1));
            if nk <= a.horizon() {
                let tail = a.tail_bound(nk);
                if !(tail < target) {
                    return Err(Error::invalid(format!(
                        "schedule break n_{k}={nk} has tail bound {tail} >= {target}"
                    )));
                }
            }
            if let Some(&next) = self.n_breaks.get(i + 1) {
                let gap = (next - nk) as f64;
                if !(Self::c(k).powf(gap) <= target) {
                    return Err(Error::invalid(format!(
                        "schedule gap n_{}−n_{k} = {gap} too small for c_{k}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Schedule selection rule.
#[derive(Debug, Clone)]
pub enum ScheduleRule {
    /// Smallest breaks satisfying both schedule inequalities.
    Greedy,
    /// Explicit breaks, taken as given. Feasibility is NOT checked, so the
    /// summed-tail guarantee does not apply; useful for exercising the
    /// recursion itself.
    Forced(Vec<u64>),
}

/// Smallest `m` in `[lo, cap]` with `tail(m) < target`, assuming the tail
/// bound is non-increasing.
fn smallest_tail_below(a: &SummableSeqSpec, lo: u64, target: f64, cap: u64) -> Option<u64> {
    if lo > cap {
        return None;
    }
    if a.tail_bound(lo) < target {
        return Some(lo);
    }
    if !(a.tail_bound(cap) < target) {
        return None;
    }
    // invariant: tail(below) >= target, tail(above) < target
    let (mut below, mut above) = (lo, cap);
    while above - below > 1 {
        let mid = below + (above - below) / 2;
        if a.tail_bound(mid) < target {
            above = mid;
        } else {
            below = mid;
        }
    }
    Some(above)
}

/// Picks block boundaries per the rule. Greedy selection fails with an
/// infeasibility error when even the first break cannot be placed within the
/// horizon.
pub fn select_schedule(a: &SummableSeqSpec, rule: &ScheduleRule) -> Result<RegularizationSchedule> {
    match rule {
        ScheduleRule::Forced(breaks) => RegularizationSchedule::from_breaks(breaks.clone()),
        ScheduleRule::Greedy => {
            let horizon = a.horizon();
            let target = |k: u32| 0.5f64.powi(k as i32) * (1.0 - RegularizationSchedule::c(k + 1));
            let n1 = smallest_tail_below(a, 1, target(1), horizon).ok_or_else(|| {
                Error::infeasible(format!(
                    "tail bound never drops below {} within horizon {horizon}",
                    target(1)
                ))
            })?;
            let mut breaks = vec![n1];
            let mut k = 1u32;
            while *breaks.last().unwrap() < horizon {
                let prev = *breaks.last().unwrap();
                let c_k = RegularizationSchedule::c(k);
                let gap = (target(k).ln() / c_k.ln()).ceil().max(1.0) as u64;
                let Some(by_tail) = smallest_tail_below(a, prev + 1, target(k + 1), horizon) else {
                    break; // final block extends through the horizon
                };
                let next = by_tail.max(prev + gap);
                if next > horizon {
                    break;
                }
                breaks.push(next);
                k += 1;
            }
            RegularizationSchedule::from_breaks(breaks)
        }
    }
}

/// Runs the recursion `b_n = a_n` for `n <= n_1`, then
/// `b_n = max{a_n, c_k b_{n−1}}` on block `k`.
pub fn regularize_with(a: &SummableSeqSpec, schedule: &RegularizationSchedule) -> Vec<f64> {
    let n = a.horizon();
    let mut b = Vec::with_capacity(n as usize);
    for i in 1..=n {
        let a_i = a.term(i);
        let b_i = match schedule.block_of(i) {
            None => a_i,
            Some(k) => a_i.max(RegularizationSchedule::c(k) * b[(i - 2) as usize]),
        };
        b.push(b_i);
    }
    b
}

/// Full operation: select a schedule, validate it (greedy only), run the
/// recursion.
pub fn regularize_sequence(
    a: &SummableSeqSpec,
    rule: &ScheduleRule,
) -> Result<(Vec<f64>, RegularizationSchedule)> {
    let schedule = select_schedule(a, rule)?;
    if matches!(rule, ScheduleRule::Greedy) {
        schedule.validate(a)?;
    }
    Ok((regularize_with(a, &schedule), schedule))
}

/// Output of [`ratio_smooth`]: the regularized function together with the
/// schedule that certifies its blockwise ratio bounds.
#[derive(Debug, Clone)]
pub struct RatioSmooth {
    pub f: DyadicFunction,
    pub schedule: RegularizationSchedule,
    pub b: Vec<f64>,
}

/// Replaces `g` by `f` with `f(2^n) = 1/b_n <= g(2^n)` where `{b_n}` is the
/// regularization of `a_n = 1/g(2^n)`. Consecutive dyadic ratios of `f` are
/// pinned into `[1, 1/c_k]` on block `k`, and `Σ 1/f(2^n)` inherits the
/// regularized sum bound.
pub fn ratio_smooth(g: &DyadicFunction, tail: TailBound) -> Result<RatioSmooth> {
    let terms: Vec<f64> = g.values().iter().map(|v| 1.0 / v).collect();
    let a = SummableSeqSpec::new(terms, tail)?;
    let (b, schedule) = regularize_sequence(&a, &ScheduleRule::Greedy)?;
    let values: Vec<f64> = b.iter().map(|x| 1.0 / x).collect();
    let below_2 = values[0].min(g.below_2());
    let f = DyadicFunction::with_below_2(values, below_2, Interpolation::StepRight)?;
    Ok(RatioSmooth { f, schedule, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_schedule_keeps_geometric_half() {
        // a_n = 2^{-n}: the max never beats a_n because a_n = (1/2) a_{n-1}.
        let a = SummableSeqSpec::geometric(0.5, 0.5, 20).unwrap();
        let (b, _) = regularize_sequence(&a, &ScheduleRule::Forced(vec![2])).unwrap();
        for (i, &bi) in b.iter().enumerate() {
            let expect = 0.5f64.powi(i as i32 + 1);
            assert!((bi - expect).abs() < 1e-15, "b_{} = {bi} != {expect}", i + 1);
        }
    }

    #[test]
    fn slow_geometric_is_fixed_point() {
        // ratio 0.9 >= every c_k in play, so the max always picks a_n.
        let a = SummableSeqSpec::geometric(1.0, 0.9, 40).unwrap();
        let (b, schedule) = regularize_sequence(&a, &ScheduleRule::Greedy).unwrap();
        assert!(schedule.n1() <= 40);
        for (i, &bi) in b.iter().enumerate() {
            assert_eq!(bi, a.term(i as u64 + 1));
        }
    }

    fn check_postconditions(a: &SummableSeqSpec, b: &[f64], schedule: &RegularizationSchedule) {
        let n = a.horizon();
        for i in 1..=n {
            assert!(b[(i - 1) as usize] >= a.term(i), "b_{i} < a_{i}");
        }
        for w in b.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-15), "b not non-increasing");
        }
        for i in 2..=n {
            if let Some(k) = schedule.block_of(i) {
                let ratio = b[(i - 1) as usize] / b[(i - 2) as usize];
                assert!(
                    ratio >= RegularizationSchedule::c(k) - 1e-15,
                    "ratio {ratio} below c_{k} at n={i}"
                );
                assert!(ratio <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn inv_n_log_sq_satisfies_lemma_bounds() {
        let n = 100_000;
        let a = SummableSeqSpec::inv_n_log_sq(n).unwrap();
        let (b, schedule) = regularize_sequence(&a, &ScheduleRule::Greedy).unwrap();
        check_postconditions(&a, &b, &schedule);
        let n1 = schedule.n1();
        let sum: f64 = b[(n1 - 1) as usize..].iter().sum();
        assert!(sum <= 3.0 + 1e-9, "regularized tail sum {sum} exceeds 3");
    }

    #[test]
    fn infeasible_when_tail_bound_never_small() {
        // A legal but useless majorant: constant 10.
        let terms: Vec<f64> = (1..=50).map(|n| 1.0 / n as f64).collect();
        let a = SummableSeqSpec::new(terms, TailBound::Custom(Arc::new(|_| 10.0))).unwrap();
        match regularize_sequence(&a, &ScheduleRule::Greedy) {
            Err(Error::Infeasible(_)) => {}
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn sequence_spec_validation() {
        assert!(SummableSeqSpec::new(vec![], TailBound::InvNLogSq).is_err());
        assert!(SummableSeqSpec::new(vec![1.0, 2.0], TailBound::Custom(Arc::new(|_| 10.0))).is_err());
        assert!(SummableSeqSpec::new(vec![1.0, -0.5], TailBound::Custom(Arc::new(|_| 10.0))).is_err());
        // tail bound below a term is rejected
        assert!(SummableSeqSpec::new(vec![1.0, 0.5], TailBound::Custom(Arc::new(|_| 0.1))).is_err());
    }

    #[test]
    fn ratio_smooth_dominated_by_input() {
        let g = DyadicFunction::from_values((1..=30).map(|n| (n as f64).exp2()).collect::<Vec<_>>())
            .unwrap();
        let rs = ratio_smooth(&g, TailBound::Geometric { first: 0.5, ratio: 0.5 }).unwrap();
        for n in 1..=30 {
            assert!(rs.f.value_at_dyadic(n).unwrap() <= g.value_at_dyadic(n).unwrap() + 1e-12);
        }
    }

    #[test]
    fn ratio_smooth_blockwise_ratio_window() {
        let g = DyadicFunction::log_tower(1, 1.0, 200).unwrap();
        let rs = ratio_smooth(&g, TailBound::LogTowerReciprocal { eps: 1.0 }).unwrap();
        for n in 1..200u32 {
            let ratio = rs.f.value_at_dyadic(n + 1).unwrap() / rs.f.value_at_dyadic(n).unwrap();
            assert!(ratio >= 1.0 - 1e-15, "f must stay non-decreasing");
            if let Some(k) = rs.schedule.block_of(n as u64 + 1) {
                let cap = 1.0 / RegularizationSchedule::c(k);
                assert!(ratio <= cap + 1e-12, "ratio {ratio} above 1/c_{k} = {cap} at n={n}");
            }
        }
    }

    #[test]
    fn ratio_smooth_identity_when_input_already_slow() {
        // g(2^n) = n^2: a_n = 1/n^2 shrinks slower than every c_k, so f = g.
        let g = DyadicFunction::from_values((1..=40).map(|n| (n as f64) * (n as f64)).collect::<Vec<_>>())
            .unwrap();
        let tail = TailBound::Custom(Arc::new(|m| {
            if m > 1 {
                1.0 / (m as f64 - 1.0)
            } else {
                2.0
            }
        }));
        let rs = ratio_smooth(&g, tail).unwrap();
        for n in 1..=40 {
            let fv = rs.f.value_at_dyadic(n).unwrap();
            let gv = g.value_at_dyadic(n).unwrap();
            assert!((fv - gv).abs() <= 1e-12 * gv, "f(2^{n}) = {fv} != g = {gv}");
        }
    }

    #[test]
    fn greedy_schedule_matches_hand_computation_for_inv_n_log_sq() {
        let a = SummableSeqSpec::inv_n_log_sq(100_000).unwrap();
        let schedule = select_schedule(&a, &ScheduleRule::Greedy).unwrap();
        // tail(m) = 1/ln(m−1) < 1/6 first at m = 405
        assert_eq!(schedule.n1(), 405);
        // the next break would sit near e^16 ≈ 8.9e6, beyond the horizon
        assert_eq!(schedule.n_breaks().len(), 1);
    }
}
