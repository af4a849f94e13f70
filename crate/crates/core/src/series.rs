//! Weighted tail-series ledgers, divergence certificates, and finite-horizon
//! rate diagnostics.
//!
//! A ledger is the partial-sum table of `Σ n^{p/r−2}·P(·)` with interval
//! propagation. Divergence certificates instantiate the proofs' displayed
//! per-block lower bounds: summed over an active block, the tail series
//! dominates a constant times `1/f(block atom)`, so the certificate partial
//! sums grow without bound exactly when `Σ 1/f(2^n)` does.

use serde::Serialize;

use crate::envelope::CorrectionFn;
use crate::exact::binomial_ge;
use crate::montecarlo::{estimate_tail, RandomStream, Statistic, TailEstimate};
use crate::params::ExponentParams;
use crate::process::{CounterVariant, PathSampler, ProcessSpec};
use crate::{Error, Result};
use rayon::prelude::*;

/// One assembled series row.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerRow {
    pub n: u64,
    pub weight: f64,
    pub tail: TailEstimate,
    pub increment: f64,
    pub cum_sum: f64,
    pub cum_low: f64,
    pub cum_high: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesLedger {
    pub rows: Vec<LedgerRow>,
}

impl SeriesLedger {
    pub fn last_cum_sum(&self) -> f64 {
        self.rows.last().map(|r| r.cum_sum).unwrap_or(0.0)
    }

    fn from_weighted(tails: Vec<TailEstimate>, weight_of: impl Fn(u64) -> f64) -> Result<Self> {
        for w in tails.windows(2) {
            if w[1].n <= w[0].n {
                return Err(Error::invalid("tail rows must be sorted by strictly increasing n"));
            }
        }
        let mut rows = Vec::with_capacity(tails.len());
        let (mut cum, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
        for tail in tails {
            let weight = weight_of(tail.n);
            let increment = weight * tail.p_hat;
            cum += increment;
            lo += weight * tail.ci_low;
            hi += weight * tail.ci_high;
            rows.push(LedgerRow {
                n: tail.n,
                weight,
                increment,
                cum_sum: cum,
                cum_low: lo,
                cum_high: hi,
                tail,
            });
        }
        Ok(SeriesLedger { rows })
    }
}

/// Assembles tail estimates into the weighted ledger `Σ n^{p/r−2}·P(·)`.
pub fn assemble(params: &ExponentParams, tails: Vec<TailEstimate>) -> Result<SeriesLedger> {
    SeriesLedger::from_weighted(tails, |n| params.series_weight(n))
}

/// One analytic per-block lower-bound term.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateTerm {
    pub k: u32,
    pub term: f64,
    pub partial_sum: f64,
}

/// Analytic lower-bound terms for the counterexample series, one per block
/// `k0 < k <= k_max`, following the proofs' displayed chains:
///
/// * independent: `c·2^{−2p/r−3} / f(4^{k/r})`
/// * arbitrary:   `2^{−2p/r−1} / f(4^{1+k(1/r−1)})`
/// * MDS:         `w_k·2^{−2p/r−1} / f(4^{k(1/r−1/2)})` with `w_k` the exact
///   binomial walk bound replacing the CLT constant (the block minimum is
///   attained at the first parity pair).
pub fn divergence_certificate(spec: &ProcessSpec, k_max: u32) -> Result<Vec<CertificateTerm>> {
    let s = spec
        .as_blocks()
        .ok_or_else(|| Error::invalid("divergence certificates need a counterexample spec"))?;
    if k_max <= s.k0 {
        return Err(Error::invalid(format!(
            "k_max={k_max} does not reach past k0={}",
            s.k0
        )));
    }
    let (r, p) = (s.params.r, s.params.p);
    let weight_log2 = -2.0 * p / r;
    let mut terms = Vec::with_capacity((k_max - s.k0) as usize);
    let mut partial = 0.0f64;
    for k in (s.k0 + 1)..=k_max {
        let kf = k as f64;
        let (factor, atom_log2) = match s.variant {
            CounterVariant::Independent => (
                s.c_const.expect("independent spec carries c") * (weight_log2 - 3.0).exp2(),
                2.0 * kf / r,
            ),
            CounterVariant::Arbitrary => (
                (weight_log2 - 1.0).exp2(),
                2.0 * (1.0 + kf * (1.0 / r - 1.0)),
            ),
            CounterVariant::Mds => {
                if k >= 32 {
                    return Err(Error::unsupported(
                        "MDS certificate blocks past k=31 exceed the exact binomial range",
                    ));
                }
                let m0 = (1u64 << (2 * (k - 1))) + 1;
                let thr = 1i64 << k;
                let w = binomial_ge(m0, thr)?.min(binomial_ge(m0 + 1, thr)?);
                (w * (weight_log2 - 1.0).exp2(), 2.0 * kf * (1.0 / r - 0.5))
            }
        };
        let term = factor / eval_at_log2(&s.f, atom_log2)?;
        partial += term;
        terms.push(CertificateTerm {
            k,
            term,
            partial_sum: partial,
        });
    }
    Ok(terms)
}

/// Evaluates `f(2^l2x)` without forming the (possibly overflowing) argument.
fn eval_at_log2(f: &CorrectionFn, l2x: f64) -> Result<f64> {
    match f {
        CorrectionFn::LogTower { m, eps } => {
            // first iterate: log+(2^l2x) = max(1, l2x·ln 2)
            let mut iterate = (l2x * std::f64::consts::LN_2).max(1.0);
            let mut product = iterate;
            for _ in 1..*m {
                iterate = iterate.ln().max(1.0);
                product *= iterate;
            }
            Ok(product * iterate.powf(*eps))
        }
        CorrectionFn::Dyadic(d) => d.eval(l2x.exp2()),
    }
}

/// Divergence-trend label for a ledger: the partial sums passed `target` and
/// the recent increments decay slower than `n^{−1−delta}` (least squares on
/// the trailing half). A diagnostic, never a claim of mathematical
/// divergence.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    pub target: f64,
    pub reached_target: bool,
    pub fitted_decay: Option<f64>,
    pub slow_decay: Option<bool>,
    pub divergence_flag: bool,
}

pub fn divergence_diagnostic(ledger: &SeriesLedger, target: f64, delta: f64) -> DivergenceReport {
    let reached = ledger.last_cum_sum() > target;
    let positives: Vec<(f64, f64)> = ledger
        .rows
        .iter()
        .filter(|r| r.increment > 0.0)
        .map(|r| ((r.n as f64).ln(), r.increment.ln()))
        .collect();
    let window = &positives[positives.len() / 2..];
    let (fitted, slow) = if window.len() >= 2 {
        let n = window.len() as f64;
        let mx = window.iter().map(|p| p.0).sum::<f64>() / n;
        let my = window.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = window.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = window.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            (Some(slope), Some(slope > -1.0 - delta))
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };
    DivergenceReport {
        target,
        reached_target: reached,
        fitted_decay: fitted,
        slow_decay: slow,
        divergence_flag: reached && slow.unwrap_or(false),
    }
}

/// Ledger of `Σ_j P(M_{2^j} > ε·2^{j/p})` over dyadic indices, the `p = r`
/// reduction of the weighted series.
pub fn statement1_dyadic(
    spec: &ProcessSpec,
    params: &ExponentParams,
    trials: u64,
    seed: u64,
    n_dyadic: u32,
) -> Result<SeriesLedger> {
    if params.p != params.r {
        return Err(Error::invalid(format!(
            "the dyadic reduction needs p = r (got r={}, p={})",
            params.r, params.p
        )));
    }
    if n_dyadic == 0 {
        return Err(Error::invalid("need at least one dyadic index"));
    }
    let mut tails = Vec::with_capacity(n_dyadic as usize);
    for j in 1..=n_dyadic {
        let n = 1u64
            .checked_shl(j)
            .filter(|&n| n <= spec.horizon())
            .ok_or(Error::HorizonExceeded {
                n: 1u64 << j.min(63),
                max: spec.horizon(),
            })?;
        let stream = RandomStream::for_cell(seed, n, Statistic::M);
        tails.push(estimate_tail(
            spec,
            n,
            params.threshold(n),
            Statistic::M,
            trials,
            &stream,
        )?);
    }
    SeriesLedger::from_weighted(tails, |_| 1.0)
}

/// Finite-window sup-statistic estimate for one anchor.
#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    pub n_anchor: u64,
    pub trials: u64,
    pub hits: u64,
    /// Estimate of `P(sup_{anchor <= k <= window} k^{−1/r} |S_k| > ε)`; a
    /// lower bound for the infinite sup.
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The rate comparison value `anchor^{1−p/r}`.
    pub comparison: f64,
}

/// Estimates `P(sup_{n <= k <= K} k^{−1/r}|S_k| > ε)` for several anchors
/// from one set of paths (common random numbers), so the estimates are
/// exactly non-increasing in the anchor.
pub fn statement1_rate(
    spec: &ProcessSpec,
    params: &ExponentParams,
    anchors: &[u64],
    k_window: u64,
    trials: u64,
    seed: u64,
) -> Result<Vec<RateEstimate>> {
    if params.p <= params.r {
        return Err(Error::invalid(format!(
            "the rate form needs p > r (got r={}, p={})",
            params.r, params.p
        )));
    }
    if anchors.is_empty() {
        return Err(Error::invalid("need at least one anchor"));
    }
    for w in anchors.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid("anchors must be strictly increasing"));
        }
    }
    if anchors[0] == 0 || *anchors.last().unwrap() > k_window {
        return Err(Error::invalid("anchors must lie in [1, window]"));
    }
    if k_window > spec.horizon() {
        return Err(Error::HorizonExceeded {
            n: k_window,
            max: spec.horizon(),
        });
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let stream = RandomStream::new(seed, 0x517A7E);
    let inv_r = 1.0 / params.r;
    let eps = params.eps;
    let hit_counts = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; anchors.len()],
            |mut acc, rep| {
                let mut rng = stream.substream(rep).rng();
                let mut sampler = PathSampler::new(spec);
                let mut weighted = Vec::with_capacity(k_window as usize);
                let mut s = 0.0f64;
                for k in 1..=k_window {
                    s += sampler.next_x(&mut rng);
                    weighted.push(s.abs() * (k as f64).powf(-inv_r));
                }
                // suffix maxima so each anchor reads its window sup directly
                for i in (0..weighted.len() - 1).rev() {
                    weighted[i] = weighted[i].max(weighted[i + 1]);
                }
                for (slot, &anchor) in acc.iter_mut().zip(anchors) {
                    *slot += (weighted[(anchor - 1) as usize] > eps) as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; anchors.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(anchors
        .iter()
        .zip(hit_counts)
        .map(|(&anchor, hits)| {
            let est = TailEstimate::from_hits(anchor, eps, Statistic::M, trials, hits);
            RateEstimate {
                n_anchor: anchor,
                trials,
                hits,
                p_hat: est.p_hat,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                comparison: (anchor as f64).powf(1.0 - params.p / params.r),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::CorrectionFn;
    use crate::exact::{exact_tail_s, OracleOptions};
    use crate::montecarlo::Statistic;
    use crate::process::{
        build_baseline, build_counterexample_arbitrary, build_counterexample_independent,
        ProcessKind,
    };

    fn f1() -> CorrectionFn {
        CorrectionFn::log_tower(1, 0.0)
    }

    #[test]
    fn assemble_prefix_sums() {
        let params = ExponentParams::new(1.0, 2.0, 1.0).unwrap();
        let tails = vec![
            TailEstimate::exact(1, 1.0, Statistic::M, 0.5),
            TailEstimate::exact(2, 2.0, Statistic::M, 0.25),
        ];
        let ledger = assemble(&params, tails).unwrap();
        // weights are 1 and 1 for p/r = 2
        assert!((ledger.rows[0].cum_sum - 0.5).abs() < 1e-15);
        assert!((ledger.rows[1].cum_sum - 0.75).abs() < 1e-15);
        assert_eq!(ledger.rows[1].cum_low, ledger.rows[1].cum_sum);
    }

    #[test]
    fn assemble_rejects_unsorted() {
        let params = ExponentParams::new(1.0, 2.0, 1.0).unwrap();
        let tails = vec![
            TailEstimate::exact(2, 1.0, Statistic::M, 0.5),
            TailEstimate::exact(1, 2.0, Statistic::M, 0.25),
        ];
        assert!(assemble(&params, tails).is_err());
    }

    #[test]
    fn ledger_matches_dot_product() {
        let params = ExponentParams::new(1.0, 1.5, 1.0).unwrap();
        let tails: Vec<TailEstimate> = (1..=50)
            .map(|n| TailEstimate::from_hits(n, 1.0, Statistic::S, 1000, (n * 7 % 999) as u64))
            .collect();
        let ledger = assemble(&params, tails.clone()).unwrap();
        let mut dot = 0.0;
        for (row, tail) in ledger.rows.iter().zip(&tails) {
            dot += params.series_weight(tail.n) * tail.p_hat;
            assert!((row.cum_sum - dot).abs() <= 1e-12 * dot.abs().max(1.0));
            assert!(row.cum_low <= row.cum_sum && row.cum_sum <= row.cum_high);
        }
    }

    #[test]
    fn arbitrary_certificate_closed_form() {
        // r=1/2, p=1, f_1: term_k = 2^{−2p/r−1}/f(4^{1+k}) = 2^{−5}/((1+k)·ln 4)
        let params = ExponentParams::new(0.5, 1.0, 1.0).unwrap();
        let spec = build_counterexample_arbitrary(params, f1(), 1 << 20).unwrap();
        let k0 = spec.as_blocks().unwrap().k0;
        let terms = divergence_certificate(&spec, k0 + 40).unwrap();
        for t in &terms {
            let expect = 0.03125 / ((1.0 + t.k as f64) * 4f64.ln());
            assert!(
                (t.term - expect).abs() <= 1e-14 * expect,
                "term at k={} is {}, want {expect}",
                t.k,
                t.term
            );
        }
        // harmonic growth: the partial sums track (1/(32 ln 4))·ln K
        let last = terms.last().unwrap();
        let lead = 1.0 / (32.0 * 4f64.ln());
        let hi = lead * ((k0 as f64 + 41.0).ln() - (k0 as f64).ln());
        assert!(last.partial_sum <= hi);
        assert!(last.partial_sum >= 0.5 * hi);
    }

    #[test]
    fn independent_certificate_first_term() {
        let params = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        let spec = build_counterexample_independent(params, f1(), 1 << 20).unwrap();
        let s = spec.as_blocks().unwrap();
        let terms = divergence_certificate(&spec, s.k0 + 1).unwrap();
        assert_eq!(terms.len(), 1);
        let k = (s.k0 + 1) as f64;
        let expect = s.c_const.unwrap() * 0.03125 / (2.0 * k * 2f64.ln());
        assert!((terms[0].term - expect).abs() <= 1e-14 * expect);
    }

    // The proof's displayed chain, finitely instantiated: the exact-oracle
    // ledger increment summed over block k dominates the certificate term.
    #[test]
    fn block_increments_dominate_certificate_terms() {
        let opts = OracleOptions::default();
        let params = ExponentParams::new(0.5, 1.0, 1.0).unwrap();
        let spec = build_counterexample_arbitrary(params, f1(), 4096).unwrap();
        let s = spec.as_blocks().unwrap();
        let terms = divergence_certificate(&spec, s.k0 + 2).unwrap();
        for (idx, k) in [s.k0 + 1, s.k0 + 2].into_iter().enumerate() {
            let row = spec.block_row(k).unwrap();
            let mut sum = 0.0;
            for n in (2 * row.first_n)..=row.last_n {
                let tail = exact_tail_s(&spec, n, params.threshold(n), &opts).unwrap();
                sum += params.series_weight(n) * tail;
            }
            assert!(
                sum >= terms[idx].term,
                "block {k} increment {sum} below certificate {}",
                terms[idx].term
            );
        }
    }

    #[test]
    fn convergent_substitute_tail_bounded_by_integral() {
        // f_{1,1}: Σ_{k>=K} term_k <= c·2^{−2p/r−3} / (ln²2·(K−1))
        let params = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        let f = CorrectionFn::log_tower(1, 1.0);
        let spec = build_counterexample_independent(params, f, 1 << 20).unwrap();
        let s = spec.as_blocks().unwrap();
        let terms = divergence_certificate(&spec, 2000).unwrap();
        let k_from = 100;
        let tail: f64 = terms.iter().filter(|t| t.k >= k_from).map(|t| t.term).sum();
        let ln2 = std::f64::consts::LN_2;
        let majorant = s.c_const.unwrap() * 0.03125 / (ln2 * ln2 * (k_from as f64 - 1.0));
        assert!(tail <= majorant, "tail {tail} above integral majorant {majorant}");
    }

    #[test]
    fn divergence_diagnostic_trends() {
        let params = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        // harmonic-like increments: weight n^{-1}, p_hat constant
        let tails: Vec<TailEstimate> = (1..=200)
            .map(|n| TailEstimate::exact(n, 1.0, Statistic::S, 0.5))
            .collect();
        let ledger = assemble(&params, tails).unwrap();
        let report = divergence_diagnostic(&ledger, 1.0, 0.1);
        assert!(report.reached_target);
        assert_eq!(report.slow_decay, Some(true));
        assert!(report.divergence_flag);
        // geometric tails decay fast: no flag
        let tails: Vec<TailEstimate> = (1..=200)
            .map(|n| TailEstimate::exact(n, 1.0, Statistic::S, 0.5f64.powi(n as i32 / 10)))
            .collect();
        let ledger = assemble(&params, tails).unwrap();
        let report = divergence_diagnostic(&ledger, 1e9, 0.1);
        assert!(!report.reached_target);
        assert_eq!(report.slow_decay, Some(false));
        assert!(!report.divergence_flag);
    }

    #[test]
    fn statement1_dyadic_zero_process_and_trend() {
        let params = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        let spec = build_counterexample_independent(params, f1(), 4096).unwrap();
        // the zero prefix gives zero terms at 2^1 (block 1 is inactive)
        let ledger = statement1_dyadic(&spec, &params, 500, 9, 1).unwrap();
        assert_eq!(ledger.rows[0].increment, 0.0);

        // Rademacher at ε = 0.75: dyadic terms decay towards 0
        let rad = build_baseline(ProcessKind::IidDiscrete, vec![-1.0, 1.0], vec![0.5, 0.5], 1024)
            .unwrap();
        let params = ExponentParams::new(1.0, 1.0, 0.75).unwrap();
        let ledger = statement1_dyadic(&rad, &params, 4000, 11, 10).unwrap();
        let first = ledger.rows.first().unwrap().tail.p_hat;
        let last = ledger.rows.last().unwrap().tail.p_hat;
        assert!(first > 0.3, "early dyadic term should be substantial, got {first}");
        assert_eq!(last, 0.0, "late dyadic term should vanish at CLT scale");
        // p != r is rejected
        let bad = ExponentParams::new(1.0, 2.0, 1.0).unwrap();
        assert!(statement1_dyadic(&rad, &bad, 10, 1, 3).is_err());
    }

    #[test]
    fn statement1_rate_monotone_in_anchor() {
        let rad = build_baseline(ProcessKind::IidDiscrete, vec![-1.0, 1.0], vec![0.5, 0.5], 512)
            .unwrap();
        let params = ExponentParams::new(1.0, 2.0, 1.0).unwrap();
        let anchors = [16u64, 32, 64, 128, 256];
        let ests = statement1_rate(&rad, &params, &anchors, 512, 4000, 31).unwrap();
        for w in ests.windows(2) {
            assert!(
                w[0].hits >= w[1].hits,
                "sup over a smaller window cannot hit more often"
            );
        }
        // normalized by the comparison rate, the estimates fall
        let first = ests.first().unwrap();
        let last = ests.last().unwrap();
        assert!(first.p_hat / first.comparison >= last.p_hat / last.comparison);
        // zero process yields zero estimates
        let params_zero = ExponentParams::new(1.0, 2.0, 1.0).unwrap();
        let zero = build_counterexample_independent(
            ExponentParams::new(1.0, 1.0, 1.0).unwrap(),
            f1(),
            4096,
        )
        .unwrap();
        let ests = statement1_rate(&zero, &params_zero, &[1, 2], 3, 200, 1).unwrap();
        assert!(ests.iter().all(|e| e.hits == 0));
    }
}
