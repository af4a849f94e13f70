//! Baseline and counterexample processes as exact, seedable samplers.
//!
//! The counterexamples share one shape: indices are grouped into blocks
//! `[4^{k−1}, 4^k)`, blocks up to `k0` are identically zero, and active
//! blocks carry one large atom whose probability `p_k` is tuned so the
//! uniform moment `sup_n E(|X_n|^q f(|X_n|))` stays finite while the weighted
//! tail series diverges whenever `Σ 1/f(2^n) = ∞`.

use rand::Rng;
use serde::Serialize;

use crate::envelope::CorrectionFn;
use crate::exact::Stage;
use crate::montecarlo::RandomStream;
use crate::params::ExponentParams;
use crate::{Error, Result};

/// Block index `k >= 1` with `4^{k−1} <= n < 4^k`.
pub fn block_of(n: u64) -> u32 {
    debug_assert!(n >= 1);
    let bits = 64 - n.leading_zeros();
    bits.div_ceil(2)
}

/// Index range `[4^{k−1}, 4^k)` of block `k`, as an inclusive pair.
pub fn block_range(k: u32) -> (u64, u64) {
    let first = 1u64 << (2 * (k - 1));
    (first, (first << 2) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProcessKind {
    IidDiscrete,
    NaViaIndependent,
    CounterexampleIndependent,
    CounterexampleMds,
    CounterexampleArbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CounterVariant {
    /// Independent centered three-point variables per index.
    Independent,
    /// Rademacher signs times one shared block coin (martingale differences).
    Mds,
    /// One shared variable for the whole block.
    Arbitrary,
}

/// One row of the derived block table.
#[derive(Debug, Clone, Serialize)]
pub struct BlockRow {
    pub k: u32,
    pub first_n: u64,
    /// Inclusive, clipped to the horizon.
    pub last_n: u64,
    /// Atom magnitude; zero for inactive blocks.
    pub value: f64,
    /// Exact base-2 log of the atom magnitude (for overflow-safe powers).
    pub log2_value: f64,
    /// Atom probability `p_k`; zero for inactive blocks.
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IidSpec {
    pub atoms: Vec<f64>,
    pub probs: Vec<f64>,
    pub na: bool,
    pub horizon: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSpec {
    pub variant: CounterVariant,
    pub params: ExponentParams,
    pub f: CorrectionFn,
    pub k0: u32,
    /// `exp(−3/f(4^{1/r}))` for the independent counterexample.
    pub c_const: Option<f64>,
    pub blocks: Vec<BlockRow>,
    pub horizon: u64,
}

impl BlockSpec {
    /// Formula atom magnitude and probability for block `k`, whether or not
    /// the block is active.
    pub fn formula(&self, k: u32) -> Result<(f64, f64)> {
        let (r, p) = (self.params.r, self.params.p);
        let kf = k as f64;
        let log2_v = match self.variant {
            CounterVariant::Independent => 2.0 * kf / r,
            CounterVariant::Mds => 2.0 * kf * (1.0 / r - 0.5),
            CounterVariant::Arbitrary => 2.0 * (1.0 + kf * (1.0 / r - 1.0)),
        };
        let value = log2_v.exp2();
        let fv = self.f.eval(value)?;
        let p_k = match self.variant {
            CounterVariant::Independent => (-2.0 * kf * p / r).exp2() / fv,
            CounterVariant::Mds | CounterVariant::Arbitrary => {
                (2.0 * kf * (1.0 - p / r)).exp2() / fv
            }
        };
        Ok((value, p_k))
    }

    /// The moment order whose uniform bound the construction certifies.
    pub fn moment_order(&self) -> f64 {
        let (r, p) = (self.params.r, self.params.p);
        match self.variant {
            CounterVariant::Independent => p,
            CounterVariant::Mds => 2.0 * (p - r) / (2.0 - r),
            CounterVariant::Arbitrary => (p - r) / (1.0 - r),
        }
    }
}

/// Full description of a random sequence `{X_n}`.
#[derive(Debug, Clone, Serialize)]
pub enum ProcessSpec {
    Iid(IidSpec),
    Blocks(BlockSpec),
}

impl ProcessSpec {
    pub fn kind(&self) -> ProcessKind {
        match self {
            ProcessSpec::Iid(s) if s.na => ProcessKind::NaViaIndependent,
            ProcessSpec::Iid(_) => ProcessKind::IidDiscrete,
            ProcessSpec::Blocks(s) => match s.variant {
                CounterVariant::Independent => ProcessKind::CounterexampleIndependent,
                CounterVariant::Mds => ProcessKind::CounterexampleMds,
                CounterVariant::Arbitrary => ProcessKind::CounterexampleArbitrary,
            },
        }
    }

    pub fn horizon(&self) -> u64 {
        match self {
            ProcessSpec::Iid(s) => s.horizon,
            ProcessSpec::Blocks(s) => s.horizon,
        }
    }

    pub fn as_blocks(&self) -> Option<&BlockSpec> {
        match self {
            ProcessSpec::Blocks(s) => Some(s),
            ProcessSpec::Iid(_) => None,
        }
    }

    pub fn block_row(&self, k: u32) -> Option<&BlockRow> {
        self.as_blocks()?.blocks.get((k - 1) as usize)
    }

    /// True unless a shared block coin couples coordinates.
    pub fn has_independent_coordinates(&self) -> bool {
        match self {
            ProcessSpec::Iid(_) => true,
            ProcessSpec::Blocks(s) => s.variant == CounterVariant::Independent,
        }
    }

    /// Generative stage list covering indices `1..=n`, for the exact oracle.
    pub fn stages(&self, n: u64) -> Result<Vec<Stage>> {
        if n == 0 || n > self.horizon() {
            return Err(Error::HorizonExceeded {
                n,
                max: self.horizon(),
            });
        }
        match self {
            ProcessSpec::Iid(s) => {
                let atoms = s.atoms.iter().copied().zip(s.probs.iter().copied()).collect();
                Ok(vec![Stage::IidAtoms {
                    first: 1,
                    count: n,
                    atoms,
                }])
            }
            ProcessSpec::Blocks(s) => {
                let mut stages = Vec::new();
                for row in &s.blocks {
                    if row.first_n > n {
                        break;
                    }
                    let count = row.last_n.min(n) - row.first_n + 1;
                    let stage = if row.prob == 0.0 {
                        Stage::IidAtoms {
                            first: row.first_n,
                            count,
                            atoms: vec![(0.0, 1.0)],
                        }
                    } else {
                        match s.variant {
                            CounterVariant::Independent => Stage::IidAtoms {
                                first: row.first_n,
                                count,
                                atoms: vec![
                                    (row.value, row.prob),
                                    (-row.value, row.prob),
                                    (0.0, 1.0 - 2.0 * row.prob),
                                ],
                            },
                            CounterVariant::Arbitrary => Stage::SharedCoin {
                                first: row.first_n,
                                count,
                                value: row.value,
                                prob: row.prob,
                            },
                            CounterVariant::Mds => Stage::SignedCoin {
                                first: row.first_n,
                                count,
                                value: row.value,
                                prob: row.prob,
                                p_plus: 0.5,
                            },
                        }
                    };
                    stages.push(stage);
                }
                Ok(stages)
            }
        }
    }
}

fn build_block_table(
    horizon: u64,
    k0: u32,
    log2_value: impl Fn(u32) -> f64,
    prob: impl Fn(u32) -> Result<f64>,
) -> Result<Vec<BlockRow>> {
    let k_max = block_of(horizon);
    let mut rows = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let (first_n, last_n) = block_range(k);
        let row = if k <= k0 {
            BlockRow {
                k,
                first_n,
                last_n: last_n.min(horizon),
                value: 0.0,
                log2_value: f64::NEG_INFINITY,
                prob: 0.0,
            }
        } else {
            let l2 = log2_value(k);
            BlockRow {
                k,
                first_n,
                last_n: last_n.min(horizon),
                value: l2.exp2(),
                log2_value: l2,
                prob: prob(k)?,
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Independent centered counterexample: atoms `±4^{k/r}` with probability
/// `p_k = 4^{−kp/r}/f(4^{k/r})` each on block `k > k0`.
///
/// `k0` is the smallest start such that every remaining block within the
/// horizon has `p_k < 1/2` and `(1−2p_k)^{4^k} >= c` with
/// `c = exp(−3/f(4^{1/r}))`; each block is certified either directly in log
/// space or through the sufficient bound `(1−x)^m >= exp(−mx/(1−x))`.
pub fn build_counterexample_independent(
    params: ExponentParams,
    f: CorrectionFn,
    horizon: u64,
) -> Result<ProcessSpec> {
    let (r, p) = (params.r, params.p);
    let k_max = block_of(horizon);
    if k_max < 2 {
        return Err(Error::infeasible("horizon too small for any active block"));
    }
    let c_const = (-3.0 / f.eval((2.0 / r).exp2())?).exp();
    let ln_c = c_const.ln();
    let p_k = |k: u32| -> Result<f64> {
        let k = k as f64;
        Ok((-2.0 * k * p / r).exp2() / f.eval((2.0 * k / r).exp2())?)
    };
    let block_ok = |k: u32| -> Result<bool> {
        let pk = p_k(k)?;
        if !(pk < 0.5) {
            return Ok(false);
        }
        let m = (2.0 * k as f64).exp2(); // 4^k
        let sufficient = -2.0 * m * pk / (1.0 - 2.0 * pk) >= ln_c;
        let direct = m * (-2.0 * pk).ln_1p() >= ln_c;
        Ok(sufficient || direct)
    };
    let mut k0 = None;
    'outer: for cand in 1..k_max {
        for k in cand..=k_max {
            if !block_ok(k)? {
                continue 'outer;
            }
        }
        k0 = Some(cand);
        break;
    }
    let Some(k0) = k0 else {
        return Err(Error::infeasible(format!(
            "no start index k0 < {k_max} certifies p_k < 1/2 and (1−2p_k)^(4^k) >= {c_const:.6}"
        )));
    };
    let blocks = build_block_table(horizon, k0, |k| 2.0 * k as f64 / r, p_k)?;
    Ok(ProcessSpec::Blocks(BlockSpec {
        variant: CounterVariant::Independent,
        params,
        f,
        k0,
        c_const: Some(c_const),
        blocks,
        horizon,
    }))
}

/// Martingale-difference counterexample: `X_n = Y_n·Z_k` with Rademacher
/// `Y_n` and one block coin `Z_k ∈ {0, 4^{k(1/r−1/2)}}`,
/// `p_k = 4^{k(1−p/r)}/f(4^{k(1/r−1/2)})`. Needs `p >= 2`; the start index
/// `k0` is at least 2.
pub fn build_counterexample_mds(
    params: ExponentParams,
    f: CorrectionFn,
    horizon: u64,
) -> Result<ProcessSpec> {
    let (r, p) = (params.r, params.p);
    if p < 2.0 {
        return Err(Error::unsupported(format!(
            "the MDS counterexample needs p >= 2 (got p={p})"
        )));
    }
    let k_max = block_of(horizon);
    if k_max < 3 {
        return Err(Error::infeasible("horizon too small for any active block"));
    }
    let log2_z = |k: u32| 2.0 * k as f64 * (1.0 / r - 0.5);
    let p_k = |k: u32| -> Result<f64> {
        Ok((2.0 * k as f64 * (1.0 - p / r)).exp2() / f.eval(log2_z(k).exp2())?)
    };
    let mut k0 = None;
    'outer: for cand in 2..k_max {
        for k in cand..=k_max {
            if !(p_k(k)? < 1.0) {
                continue 'outer;
            }
        }
        k0 = Some(cand);
        break;
    }
    let Some(k0) = k0 else {
        return Err(Error::infeasible(format!(
            "no start index 2 <= k0 < {k_max} gives p_k < 1 on every remaining block"
        )));
    };
    let blocks = build_block_table(horizon, k0, log2_z, p_k)?;
    Ok(ProcessSpec::Blocks(BlockSpec {
        variant: CounterVariant::Mds,
        params,
        f,
        k0,
        c_const: None,
        blocks,
        horizon,
    }))
}

/// Arbitrary-dependence counterexample: one shared variable per block with
/// atom `4^{1+k(1/r−1)}` and `p_k = 4^{k(1−p/r)}/f(4^{1+k(1/r−1)})`. Needs
/// `r < 1 <= p`.
pub fn build_counterexample_arbitrary(
    params: ExponentParams,
    f: CorrectionFn,
    horizon: u64,
) -> Result<ProcessSpec> {
    let (r, p) = (params.r, params.p);
    if !(r < 1.0 && p >= 1.0) {
        return Err(Error::unsupported(format!(
            "the arbitrary counterexample needs 0 < r < 1 <= p (got r={r}, p={p})"
        )));
    }
    let k_max = block_of(horizon);
    if k_max < 2 {
        return Err(Error::infeasible("horizon too small for any active block"));
    }
    let log2_v = |k: u32| 2.0 * (1.0 + k as f64 * (1.0 / r - 1.0));
    let p_k = |k: u32| -> Result<f64> {
        Ok((2.0 * k as f64 * (1.0 - p / r)).exp2() / f.eval(log2_v(k).exp2())?)
    };
    let mut k0 = None;
    'outer: for cand in 1..k_max {
        for k in cand..=k_max {
            if !(p_k(k)? < 1.0) {
                continue 'outer;
            }
        }
        k0 = Some(cand);
        break;
    }
    let Some(k0) = k0 else {
        return Err(Error::infeasible(format!(
            "no start index k0 < {k_max} gives p_k < 1 on every remaining block"
        )));
    };
    let blocks = build_block_table(horizon, k0, log2_v, p_k)?;
    Ok(ProcessSpec::Blocks(BlockSpec {
        variant: CounterVariant::Arbitrary,
        params,
        f,
        k0,
        c_const: None,
        blocks,
        horizon,
    }))
}

/// Baseline i.i.d. sampler over a centered discrete law; `NaViaIndependent`
/// is the same sampler tagged negatively associated (independence implies
/// NA).
pub fn build_baseline(
    kind: ProcessKind,
    atoms: Vec<f64>,
    probs: Vec<f64>,
    horizon: u64,
) -> Result<ProcessSpec> {
    let na = match kind {
        ProcessKind::IidDiscrete => false,
        ProcessKind::NaViaIndependent => true,
        other => {
            return Err(Error::invalid(format!(
                "build_baseline only handles iid kinds, got {other:?}"
            )))
        }
    };
    if atoms.is_empty() || atoms.len() != probs.len() {
        return Err(Error::invalid(
            "atoms and probs must be non-empty and equal length",
        ));
    }
    if probs.iter().any(|&p| !(p >= 0.0) || p > 1.0) {
        return Err(Error::invalid("probabilities must lie in [0, 1]"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    let mean: f64 = atoms.iter().zip(&probs).map(|(a, p)| a * p).sum();
    if mean.abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "baseline law must be centered, got mean {mean}"
        )));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    Ok(ProcessSpec::Iid(IidSpec {
        atoms,
        probs,
        na,
        horizon,
    }))
}

/// One realized path with running sums and running maxima.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub m: Vec<f64>,
}

/// Streams `X_1, X_2, …` for one replica. Block-shared coins are drawn when
/// a block is entered and cached for the rest of it, so the draw sequence is
/// a fixed function of the spec.
pub struct PathSampler<'a> {
    spec: &'a ProcessSpec,
    next_n: u64,
    cached_block: u32,
    coin: f64,
}

impl<'a> PathSampler<'a> {
    pub fn new(spec: &'a ProcessSpec) -> Self {
        PathSampler {
            spec,
            next_n: 1,
            cached_block: 0,
            coin: 0.0,
        }
    }

    /// Emits the next `X_n`. Panics past the horizon (callers bound n first).
    pub fn next_x<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let n = self.next_n;
        assert!(n <= self.spec.horizon(), "sampler ran past the horizon");
        self.next_n += 1;
        match self.spec {
            ProcessSpec::Iid(s) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in s.atoms.iter().zip(&s.probs) {
                    acc += p;
                    if u < acc {
                        return *a;
                    }
                }
                *s.atoms.last().unwrap()
            }
            ProcessSpec::Blocks(s) => {
                let k = block_of(n);
                let row = &s.blocks[(k - 1) as usize];
                if row.prob == 0.0 {
                    return 0.0;
                }
                match s.variant {
                    CounterVariant::Independent => {
                        let u: f64 = rng.random();
                        if u < row.prob {
                            row.value
                        } else if u < 2.0 * row.prob {
                            -row.value
                        } else {
                            0.0
                        }
                    }
                    CounterVariant::Arbitrary => {
                        if self.cached_block != k {
                            self.cached_block = k;
                            let u: f64 = rng.random();
                            self.coin = if u < row.prob { row.value } else { 0.0 };
                        }
                        self.coin
                    }
                    CounterVariant::Mds => {
                        if self.cached_block != k {
                            self.cached_block = k;
                            let u: f64 = rng.random();
                            self.coin = if u < row.prob { row.value } else { 0.0 };
                        }
                        if self.coin == 0.0 {
                            0.0
                        } else if rng.random::<bool>() {
                            self.coin
                        } else {
                            -self.coin
                        }
                    }
                }
            }
        }
    }
}

/// Draws one path of length `n`, maintaining `S_i` and `M_i = max_{j<=i} |S_j|`.
/// Identical streams replay identical paths bit for bit.
pub fn sample_path(spec: &ProcessSpec, n: u64, stream: &RandomStream) -> Result<SamplePath> {
    if n > spec.horizon() {
        return Err(Error::HorizonExceeded {
            n,
            max: spec.horizon(),
        });
    }
    let mut rng = stream.rng();
    let mut sampler = PathSampler::new(spec);
    let mut x = Vec::with_capacity(n as usize);
    let mut s = Vec::with_capacity(n as usize);
    let mut m = Vec::with_capacity(n as usize);
    let (mut sum, mut max) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let xi = sampler.next_x(&mut rng);
        sum += xi;
        max = max.max(sum.abs());
        x.push(xi);
        s.push(sum);
        m.push(max);
    }
    Ok(SamplePath { x, s, m })
}

/// `E(|X_n|^{q_exp}·f(|X_n|))`, exact from the block table.
pub fn exact_moment(spec: &ProcessSpec, n: u64, q_exp: f64, f: &CorrectionFn) -> Result<f64> {
    if n == 0 || n > spec.horizon() {
        return Err(Error::HorizonExceeded {
            n,
            max: spec.horizon(),
        });
    }
    if !(q_exp > 0.0) {
        return Err(Error::invalid("moment order must be positive"));
    }
    match spec {
        ProcessSpec::Iid(s) => {
            let mut total = 0.0;
            for (a, p) in s.atoms.iter().zip(&s.probs) {
                if *a != 0.0 && *p > 0.0 {
                    total += a.abs().powf(q_exp) * f.eval(a.abs())? * p;
                }
            }
            Ok(total)
        }
        ProcessSpec::Blocks(s) => {
            let row = &s.blocks[(block_of(n) - 1) as usize];
            if row.prob == 0.0 {
                return Ok(0.0);
            }
            let multiplicity = match s.variant {
                CounterVariant::Independent => 2.0,
                CounterVariant::Mds | CounterVariant::Arbitrary => 1.0,
            };
            let fv = f.eval(row.value)?;
            let log2_power = q_exp * row.log2_value;
            let moment = if log2_power.abs() < 900.0 {
                multiplicity * row.prob * log2_power.exp2() * fv
            } else {
                // keep the whole product in log space when |X|^q alone overflows
                (log2_power + (multiplicity * row.prob).log2() + fv.log2()).exp2()
            };
            Ok(moment)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::CorrectionFn;
    use crate::params::ExponentParams;

    fn f1() -> CorrectionFn {
        CorrectionFn::log_tower(1, 0.0)
    }

    #[test]
    fn block_arithmetic() {
        assert_eq!(block_of(1), 1);
        assert_eq!(block_of(3), 1);
        assert_eq!(block_of(4), 2);
        assert_eq!(block_of(15), 2);
        assert_eq!(block_of(16), 3);
        assert_eq!(block_of(63), 3);
        assert_eq!(block_of(64), 4);
        assert_eq!(block_range(3), (16, 63));
    }

    #[test]
    fn independent_counterexample_constants() {
        let params = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        let spec = build_counterexample_independent(params, f1(), 4096).unwrap();
        let s = spec.as_blocks().unwrap();
        let c = s.c_const.unwrap();
        assert!((c - (-3.0 / 4f64.ln()).exp()).abs() < 1e-15);
        assert_eq!(s.k0, 1);
        let p1 = 0.25 / 4f64.ln();
        // block 1 is inactive; probabilities appear from block 2 on
        let row2 = spec.block_row(2).unwrap();
        let p2 = 0.0625 / 16f64.ln();
        assert!((row2.prob - p2).abs() < 1e-15);
        assert_eq!(row2.value, 16.0);
        // the k=1 certification holds by hand:
        // p_1 < 1/2 and (1−2p_1)^4 ≈ 0.167 >= c ≈ 0.115
        assert!(p1 < 0.5);
        assert!((1.0 - 2.0 * p1).powi(4) >= c);
    }

    #[test]
    fn independent_moment_is_two_on_active_blocks() {
        let params = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        let spec = build_counterexample_independent(params, f1(), 4096).unwrap();
        for n in [4u64, 5, 16, 100, 1024, 4096] {
            let m = exact_moment(&spec, n, 1.0, &f1()).unwrap();
            assert!((m - 2.0).abs() < 1e-12, "moment at n={n} is {m}");
        }
        // zero block
        assert_eq!(exact_moment(&spec, 2, 1.0, &f1()).unwrap(), 0.0);
    }

    #[test]
    fn mds_counterexample_probability_and_moment() {
        let params = ExponentParams::new(1.0, 3.0, 1.0).unwrap();
        let spec = build_counterexample_mds(params, f1(), 16384).unwrap();
        let s = spec.as_blocks().unwrap();
        assert!(s.k0 >= 2);
        // p_k = 4^{−2k}/f(2^k); the moment with q = 2(p−r)/(2−r) = 4 is 1
        let q = 4.0;
        for k in (s.k0 + 1)..=block_of(16384) {
            let row = spec.block_row(k).unwrap();
            let expect = (-(2.0 * k as f64) * 2.0).exp2() / f1().eval((k as f64).exp2()).unwrap();
            assert!((row.prob - expect).abs() <= 1e-15 * expect);
            let m = exact_moment(&spec, row.first_n, q, &f1()).unwrap();
            assert!((m - 1.0).abs() < 1e-12, "moment at block {k} is {m}");
        }
    }

    #[test]
    fn arbitrary_counterexample_probability_and_moment() {
        let params = ExponentParams::new(0.5, 1.0, 1.0).unwrap();
        let spec = build_counterexample_arbitrary(params, f1(), 4096).unwrap();
        let s = spec.as_blocks().unwrap();
        // q = (p−r)/(1−r) = 1; the would-be p_1 = 4^{−1}/f(4^2)
        let p1 = 0.25 / 16f64.ln();
        assert!((p1 - 0.0901679).abs() < 1e-6);
        let q = 1.0;
        for k in (s.k0 + 1)..=block_of(4096) {
            let row = spec.block_row(k).unwrap();
            let m = exact_moment(&spec, row.first_n, q, &f1()).unwrap();
            assert!((m - 4.0f64).abs() < 1e-12, "moment at block {k} is {m} != 4^q");
        }
    }

    #[test]
    fn baseline_validation() {
        let ok = build_baseline(ProcessKind::IidDiscrete, vec![-1.0, 1.0], vec![0.5, 0.5], 100);
        assert!(ok.is_ok());
        let ok = build_baseline(ProcessKind::NaViaIndependent, vec![-1.0, 3.0], vec![0.75, 0.25], 10);
        assert_eq!(ok.unwrap().kind(), ProcessKind::NaViaIndependent);
        assert!(build_baseline(ProcessKind::IidDiscrete, vec![1.0, 2.0], vec![0.5, 0.6], 10).is_err());
        assert!(build_baseline(ProcessKind::IidDiscrete, vec![1.0, 2.0], vec![0.5, 0.5], 10).is_err());
    }

    #[test]
    fn sample_path_recurrences_and_determinism() {
        let spec =
            build_baseline(ProcessKind::IidDiscrete, vec![-1.0, 1.0], vec![0.5, 0.5], 512).unwrap();
        let stream = RandomStream::new(7, 0);
        let path = sample_path(&spec, 512, &stream).unwrap();
        let replay = sample_path(&spec, 512, &stream).unwrap();
        assert_eq!(path.x, replay.x);
        let mut s = 0.0;
        let mut m = 0.0f64;
        for i in 0..512 {
            s += path.x[i];
            m = m.max(s.abs());
            assert_eq!(path.s[i], s);
            assert_eq!(path.m[i], m);
        }
    }

    #[test]
    fn zero_prefix_paths_are_zero() {
        let params = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        let spec = build_counterexample_independent(params, f1(), 4096).unwrap();
        let stream = RandomStream::new(1, 2);
        let path = sample_path(&spec, 3, &stream).unwrap();
        assert_eq!(path.x, vec![0.0; 3]);
        assert_eq!(path.m, vec![0.0; 3]);
    }

    #[test]
    fn block_sharing_in_arbitrary_paths() {
        let params = ExponentParams::new(0.5, 1.0, 1.0).unwrap();
        let spec = build_counterexample_arbitrary(params, f1(), 4096).unwrap();
        let k0 = spec.as_blocks().unwrap().k0;
        for rep in 0..50u64 {
            let path = sample_path(&spec, 1023, &RandomStream::new(42, rep)).unwrap();
            for k in (k0 + 1)..=block_of(1023) {
                let row = spec.block_row(k).unwrap();
                let vals: Vec<f64> = ((row.first_n - 1)..row.last_n.min(1023))
                    .map(|i| path.x[i as usize])
                    .collect();
                assert!(
                    vals.iter().all(|&v| v == vals[0]),
                    "block {k} not constant within one path"
                );
                assert!(vals[0] == 0.0 || vals[0] == row.value);
            }
        }
    }

    #[test]
    fn empirical_block_frequency_matches_p_k() {
        let params = ExponentParams::new(1.0, 1.0, 1.0).unwrap();
        let spec = build_counterexample_independent(params, f1(), 4096).unwrap();
        let row = spec.block_row(2).unwrap();
        let trials = 20_000u64;
        let mut nonzero = 0u64;
        for rep in 0..trials {
            let path = sample_path(&spec, 4, &RandomStream::new(99, rep)).unwrap();
            if path.x[3] != 0.0 {
                nonzero += 1;
            }
        }
        let p = 2.0 * row.prob;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let p_hat = nonzero as f64 / trials as f64;
        assert!(
            (p_hat - p).abs() <= 4.0 * se,
            "frequency {p_hat} vs 2p_k {p} (se {se})"
        );
    }

    #[test]
    fn horizon_errors() {
        let spec =
            build_baseline(ProcessKind::IidDiscrete, vec![-1.0, 1.0], vec![0.5, 0.5], 16).unwrap();
        assert!(sample_path(&spec, 17, &RandomStream::new(0, 0)).is_err());
        assert!(exact_moment(&spec, 17, 2.0, &f1()).is_err());
    }
}
