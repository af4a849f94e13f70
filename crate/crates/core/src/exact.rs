//! Exact finite-n distribution oracle for block-structured discrete processes.
//!
//! The law of `S_n` is assembled stage by stage: i.i.d. stretches convolve
//! one variable at a time, a shared block coin contributes a two-point law,
//! and a signed block coin contributes a mixture of a point mass at zero and
//! a scaled Rademacher walk. Path maxima need outcome ordering, so `M_n` is
//! computed by full enumeration and is capped at small `n`.

use std::collections::BTreeMap;

use crate::process::ProcessSpec;
use crate::{Error, Result};

/// One independent generative stage covering a contiguous index range.
#[derive(Debug, Clone)]
pub enum Stage {
    /// Each index draws independently from the same atom law.
    IidAtoms {
        first: u64,
        count: u64,
        atoms: Vec<(f64, f64)>,
    },
    /// One coin for the whole range: every index equals `value` (with
    /// probability `prob`) or 0.
    SharedCoin {
        first: u64,
        count: u64,
        value: f64,
        prob: f64,
    },
    /// One coin for the range; when it lands on `value`, each index carries
    /// an independent sign that is `+` with probability `p_plus`.
    SignedCoin {
        first: u64,
        count: u64,
        value: f64,
        prob: f64,
        p_plus: f64,
    },
}

impl Stage {
    fn count(&self) -> u64 {
        match self {
            Stage::IidAtoms { count, .. }
            | Stage::SharedCoin { count, .. }
            | Stage::SignedCoin { count, .. } => *count,
        }
    }
}

/// Caps for the exact oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Maximum number of support points of any intermediate law.
    pub support_cap: usize,
    /// Maximum `n` for full path enumeration (`M_n`, conditional means).
    pub enum_cap: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            support_cap: 1_000_000,
            enum_cap: 12,
        }
    }
}

/// Exact law of a sum: sorted, deduplicated support with probabilities.
#[derive(Debug, Clone)]
pub struct SupportTable {
    entries: Vec<(f64, f64)>,
}

impl SupportTable {
    fn point_mass(v: f64) -> Self {
        SupportTable {
            entries: vec![(v, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn total_probability(&self) -> f64 {
        kahan_sum(self.entries.iter().map(|&(_, p)| p))
    }

    /// `P(|S| > t)`.
    pub fn tail_abs(&self, t: f64) -> f64 {
        kahan_sum(
            self.entries
                .iter()
                .filter(|&&(v, _)| v.abs() > t)
                .map(|&(_, p)| p),
        )
    }

    /// `P(S > t)`.
    pub fn tail_signed(&self, t: f64) -> f64 {
        kahan_sum(
            self.entries
                .iter()
                .filter(|&&(v, _)| v > t)
                .map(|&(_, p)| p),
        )
    }

    pub fn mean(&self) -> f64 {
        kahan_sum(self.entries.iter().map(|&(v, p)| v * p))
    }

    /// Sorts, merges values closer than `1e−9·max|value|`, drops zero-mass
    /// entries, and checks normalization to `1e−9` absolute.
    fn normalize(mut entries: Vec<(f64, f64)>, cap: usize) -> Result<Self> {
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_abs = entries
            .iter()
            .map(|&(v, _)| v.abs())
            .fold(0.0f64, f64::max);
        let tol = 1e-9 * max_abs;
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(entries.len().min(cap + 1));
        for (v, p) in entries {
            if p == 0.0 {
                continue;
            }
            match merged.last_mut() {
                Some((lv, lp)) if (v - *lv) <= tol => *lp += p,
                _ => merged.push((v, p)),
            }
        }
        if merged.len() > cap {
            return Err(Error::SupportCapExceeded {
                support: merged.len(),
                cap,
            });
        }
        let table = SupportTable { entries: merged };
        let total = table.total_probability();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "support table mass {total} deviates from 1"
            )));
        }
        Ok(table)
    }

    fn convolve(&self, other: &SupportTable, cap: usize) -> Result<Self> {
        let pairs = self.entries.len() * other.entries.len();
        if pairs > 32 * cap {
            return Err(Error::SupportCapExceeded {
                support: pairs,
                cap,
            });
        }
        let mut out = Vec::with_capacity(pairs);
        for &(v1, p1) in &self.entries {
            for &(v2, p2) in &other.entries {
                out.push((v1 + v2, p1 * p2));
            }
        }
        Self::normalize(out, cap)
    }
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Binomial pmf row for `count` trials with success probability `p`, via the
/// ratio recurrence from the mode (stable for large counts).
fn binomial_row(count: u64, p: f64) -> Vec<f64> {
    let m = count as usize;
    let mut row = vec![0.0f64; m + 1];
    let mode = ((count as f64 + 1.0) * p).floor().min(count as f64) as usize;
    row[mode] = 1.0;
    let odds = p / (1.0 - p);
    for i in mode..m {
        // p(i+1)/p(i) = (m−i)/(i+1) · odds
        row[i + 1] = row[i] * ((m - i) as f64) / ((i + 1) as f64) * odds;
    }
    for i in (1..=mode).rev() {
        row[i - 1] = row[i] * (i as f64) / ((m - i + 1) as f64) / odds;
    }
    let total = kahan_sum(row.iter().copied());
    for v in &mut row {
        *v /= total;
    }
    row
}

fn stage_law(stage: &Stage, cap: usize) -> Result<SupportTable> {
    match stage {
        Stage::IidAtoms { count, atoms, .. } => {
            if atoms.len() == 1 && atoms[0].0 == 0.0 {
                return Ok(SupportTable::point_mass(0.0));
            }
            let single = SupportTable::normalize(atoms.clone(), cap)?;
            let mut law = SupportTable::point_mass(0.0);
            for _ in 0..*count {
                law = law.convolve(&single, cap)?;
            }
            Ok(law)
        }
        Stage::SharedCoin {
            count,
            value,
            prob,
            ..
        } => SupportTable::normalize(
            vec![(0.0, 1.0 - prob), (*value * *count as f64, *prob)],
            cap,
        ),
        Stage::SignedCoin {
            count,
            value,
            prob,
            p_plus,
            ..
        } => {
            if *count as usize + 2 > cap {
                return Err(Error::SupportCapExceeded {
                    support: *count as usize + 2,
                    cap,
                });
            }
            let walk = binomial_row(*count, *p_plus);
            let m = *count as f64;
            let mut entries: Vec<(f64, f64)> = walk
                .iter()
                .enumerate()
                .map(|(i, &w)| (value * (2.0 * i as f64 - m), prob * w))
                .collect();
            entries.push((0.0, 1.0 - prob));
            SupportTable::normalize(entries, cap)
        }
    }
}

/// Exact law of `S_n`, assembled blockwise.
pub fn exact_sum_law(spec: &ProcessSpec, n: u64, opts: &OracleOptions) -> Result<SupportTable> {
    let stages = spec.stages(n)?;
    let mut law = SupportTable::point_mass(0.0);
    for stage in &stages {
        law = law.convolve(&stage_law(stage, opts.support_cap)?, opts.support_cap)?;
    }
    Ok(law)
}

/// Exact `P(|S_n| > t)`.
pub fn exact_tail_s(spec: &ProcessSpec, n: u64, t: f64, opts: &OracleOptions) -> Result<f64> {
    Ok(exact_sum_law(spec, n, opts)?.tail_abs(t))
}

/// Exact `P(max_{i<=n} |S_i| > t)` by full enumeration over joint outcomes.
pub fn exact_tail_m(spec: &ProcessSpec, n: u64, t: f64, opts: &OracleOptions) -> Result<f64> {
    if n > opts.enum_cap {
        return Err(Error::EnumerationCapExceeded {
            n,
            max: opts.enum_cap,
        });
    }
    let stages = spec.stages(n)?;
    let mut acc = 0.0;
    enumerate_max(&stages, 0, 0, 0.0, 0.0, 1.0, t, &mut acc);
    Ok(acc)
}

/// DFS over the generative choices. `offset` indexes inside the current
/// stage. Paths whose running max already exceeds `t` are pruned into the
/// accumulator.
#[allow(clippy::too_many_arguments)]
fn enumerate_max(
    stages: &[Stage],
    stage_idx: usize,
    offset: u64,
    s: f64,
    m: f64,
    prob: f64,
    t: f64,
    acc: &mut f64,
) {
    if m > t {
        *acc += prob;
        return;
    }
    let Some(stage) = stages.get(stage_idx) else {
        return;
    };
    if offset >= stage.count() {
        enumerate_max(stages, stage_idx + 1, 0, s, m, prob, t, acc);
        return;
    }
    match stage {
        Stage::IidAtoms { atoms, .. } => {
            for &(v, p) in atoms {
                if p == 0.0 {
                    continue;
                }
                let s2 = s + v;
                enumerate_max(stages, stage_idx, offset + 1, s2, m.max(s2.abs()), prob * p, t, acc);
            }
        }
        Stage::SharedCoin {
            count,
            value,
            prob: coin_p,
            ..
        } => {
            debug_assert_eq!(offset, 0, "shared coin branches once per stage");
            // zero branch: S constant across the block
            enumerate_max(stages, stage_idx + 1, 0, s, m, prob * (1.0 - coin_p), t, acc);
            // value branch: S walks monotonically, |S| peaks at an endpoint
            let s_end = s + value * *count as f64;
            let m2 = m.max((s + value).abs()).max(s_end.abs());
            enumerate_max(stages, stage_idx + 1, 0, s_end, m2, prob * coin_p, t, acc);
        }
        Stage::SignedCoin {
            value,
            prob: coin_p,
            p_plus,
            ..
        } => {
            if offset == 0 {
                // zero branch skips the whole block
                enumerate_max(stages, stage_idx + 1, 0, s, m, prob * (1.0 - coin_p), t, acc);
                // nonzero branch enters the per-index sign walk below with
                // the coin probability applied once
                enumerate_signed(stages, stage_idx, 0, s, m, prob * coin_p, *value, *p_plus, t, acc);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_signed(
    stages: &[Stage],
    stage_idx: usize,
    offset: u64,
    s: f64,
    m: f64,
    prob: f64,
    value: f64,
    p_plus: f64,
    t: f64,
    acc: &mut f64,
) {
    if m > t {
        *acc += prob;
        return;
    }
    if offset >= stages[stage_idx].count() {
        enumerate_max(stages, stage_idx + 1, 0, s, m, prob, t, acc);
        return;
    }
    let up = s + value;
    enumerate_signed(stages, stage_idx, offset + 1, up, m.max(up.abs()), prob * p_plus, value, p_plus, t, acc);
    let down = s - value;
    enumerate_signed(stages, stage_idx, offset + 1, down, m.max(down.abs()), prob * (1.0 - p_plus), value, p_plus, t, acc);
}

/// Enumerates every positive-probability history `X_1..X_{n−1}` and returns
/// the largest `|E(X_n | history)|`. Zero for a genuine martingale
/// difference structure; strictly positive when the signs are biased.
pub fn conditional_mean_check_stages(stages: &[Stage], n: u64, opts: &OracleOptions) -> Result<f64> {
    if n > opts.enum_cap {
        return Err(Error::EnumerationCapExceeded {
            n,
            max: opts.enum_cap,
        });
    }
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    // map: observed prefix (value bits) -> (probability, Σ prob·E(X_n | state))
    let mut groups: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    let mut prefix = Vec::with_capacity((n - 1) as usize);
    walk_prefix(stages, 0, 0, 1.0, None, n, &mut prefix, &mut groups);
    Ok(groups
        .values()
        .map(|&(p, ex)| (ex / p).abs())
        .fold(0.0, f64::max))
}

/// Same check driven by a process spec; only meaningful for the MDS
/// counterexample, whose defining property is `E(X_n | F_{n−1}) = 0`.
pub fn conditional_mean_check(spec: &ProcessSpec, n: u64, opts: &OracleOptions) -> Result<f64> {
    use crate::process::ProcessKind;
    if spec.kind() != ProcessKind::CounterexampleMds {
        return Err(Error::invalid(format!(
            "conditional mean check targets the MDS counterexample, got {:?}",
            spec.kind()
        )));
    }
    conditional_mean_check_stages(&spec.stages(n)?, n, opts)
}

/// Coin state of the stage containing index `n`, if it was already opened
/// while generating the prefix.
#[derive(Clone, Copy)]
enum OpenCoin {
    Shared(f64),
    Signed(f64),
}

#[allow(clippy::too_many_arguments)]
fn walk_prefix(
    stages: &[Stage],
    stage_idx: usize,
    offset: u64,
    prob: f64,
    open: Option<OpenCoin>,
    n: u64,
    prefix: &mut Vec<u64>,
    groups: &mut BTreeMap<Vec<u64>, (f64, f64)>,
) {
    let position = prefix.len() as u64 + 1;
    if position == n {
        // prefix complete; attribute E(X_n | generative state)
        let expected = expected_next(stages, stage_idx, offset, open);
        let entry = groups.entry(prefix.clone()).or_insert((0.0, 0.0));
        entry.0 += prob;
        entry.1 += prob * expected;
        return;
    }
    let stage = &stages[stage_idx];
    if offset >= stage.count() {
        walk_prefix(stages, stage_idx + 1, 0, prob, None, n, prefix, groups);
        return;
    }
    match stage {
        Stage::IidAtoms { atoms, .. } => {
            for &(v, p) in atoms {
                if p == 0.0 {
                    continue;
                }
                prefix.push(v.to_bits());
                walk_prefix(stages, stage_idx, offset + 1, prob * p, None, n, prefix, groups);
                prefix.pop();
            }
        }
        Stage::SharedCoin {
            value,
            prob: coin_p,
            ..
        } => {
            let branches = if offset == 0 {
                vec![(0.0, 1.0 - coin_p), (*value, *coin_p)]
            } else {
                match open {
                    Some(OpenCoin::Shared(v)) => vec![(v, 1.0)],
                    _ => unreachable!("shared coin must be open mid-stage"),
                }
            };
            for (v, p) in branches {
                prefix.push(v.to_bits());
                walk_prefix(
                    stages,
                    stage_idx,
                    offset + 1,
                    prob * p,
                    Some(OpenCoin::Shared(v)),
                    n,
                    prefix,
                    groups,
                );
                prefix.pop();
            }
        }
        Stage::SignedCoin {
            value,
            prob: coin_p,
            p_plus,
            ..
        } => {
            let coin_states = if offset == 0 {
                vec![(0.0, 1.0 - coin_p), (*value, *coin_p)]
            } else {
                match open {
                    Some(OpenCoin::Signed(z)) => vec![(z, 1.0)],
                    _ => unreachable!("signed coin must be open mid-stage"),
                }
            };
            for (z, zp) in coin_states {
                if z == 0.0 {
                    prefix.push(0.0f64.to_bits());
                    walk_prefix(
                        stages,
                        stage_idx,
                        offset + 1,
                        prob * zp,
                        Some(OpenCoin::Signed(0.0)),
                        n,
                        prefix,
                        groups,
                    );
                    prefix.pop();
                } else {
                    for (x, sp) in [(z, *p_plus), (-z, 1.0 - *p_plus)] {
                        prefix.push(x.to_bits());
                        walk_prefix(
                            stages,
                            stage_idx,
                            offset + 1,
                            prob * zp * sp,
                            Some(OpenCoin::Signed(z)),
                            n,
                            prefix,
                            groups,
                        );
                        prefix.pop();
                    }
                }
            }
        }
    }
}

/// `E(X_position | generative state)` where `position` is the next index of
/// the stage at `stage_idx` (offset indices consumed so far).
fn expected_next(stages: &[Stage], stage_idx: usize, offset: u64, open: Option<OpenCoin>) -> f64 {
    let (stage, fresh) = if offset >= stages[stage_idx].count() {
        (&stages[stage_idx + 1], true)
    } else {
        (&stages[stage_idx], offset == 0)
    };
    match stage {
        Stage::IidAtoms { atoms, .. } => atoms.iter().map(|&(v, p)| v * p).sum(),
        Stage::SharedCoin { value, prob, .. } => {
            if fresh {
                prob * value
            } else {
                match open {
                    Some(OpenCoin::Shared(v)) => v,
                    _ => unreachable!(),
                }
            }
        }
        Stage::SignedCoin {
            value,
            prob,
            p_plus,
            ..
        } => {
            let bias = 2.0 * p_plus - 1.0;
            if fresh {
                prob * value * bias
            } else {
                match open {
                    Some(OpenCoin::Signed(z)) => z * bias,
                    _ => unreachable!(),
                }
            }
        }
    }
}

/// Exact `P(Σ of m Rademacher >= threshold)` by streaming binomial
/// summation; `m` up to 10⁸.
pub fn binomial_ge(m: u64, threshold: i64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("need at least one summand"));
    }
    if m > 100_000_000 {
        return Err(Error::unsupported(format!(
            "binomial tail for m={m} summands exceeds the streaming cap"
        )));
    }
    // W = 2H − m with H ~ Bin(m, 1/2): W >= thr ⟺ H >= ceil((m+thr)/2)
    let num = m as i64 + threshold;
    if num <= 0 {
        return Ok(1.0);
    }
    let j0 = (num + 1).div_euclid(2) as u64;
    if j0 > m {
        return Ok(0.0);
    }
    // relative pmf values from the mode outwards, two streaming passes
    let mode = m / 2;
    let (mut total, mut total_c) = (0.0f64, 0.0f64);
    let (mut tail, mut tail_c) = (0.0f64, 0.0f64);
    let add = |value: f64, j: u64, total: &mut f64, total_c: &mut f64, tail: &mut f64, tail_c: &mut f64| {
        let y = value - *total_c;
        let t = *total + y;
        *total_c = (t - *total) - y;
        *total = t;
        if j >= j0 {
            let y = value - *tail_c;
            let t = *tail + y;
            *tail_c = (t - *tail) - y;
            *tail = t;
        }
    };
    let mut v = 1.0f64;
    add(v, mode, &mut total, &mut total_c, &mut tail, &mut tail_c);
    let mut j = mode;
    while j < m && v > 0.0 {
        v *= (m - j) as f64 / (j + 1) as f64;
        j += 1;
        add(v, j, &mut total, &mut total_c, &mut tail, &mut tail_c);
    }
    v = 1.0;
    j = mode;
    while j > 0 && v > 0.0 {
        v *= j as f64 / (m - j + 1) as f64;
        j -= 1;
        add(v, j, &mut total, &mut total_c, &mut tail, &mut tail_c);
    }
    Ok(tail / total)
}
