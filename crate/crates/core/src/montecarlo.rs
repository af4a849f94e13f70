//! Seeded, reproducible tail-probability estimation.
//!
//! Replica `i` of a cell draws from a ChaCha stream keyed by
//! `(seed, stream_id, i)`, so estimates are embarrassingly parallel and the
//! hit counts are bitwise independent of worker count and scheduling.
//! Intervals are 95% Wilson score.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::params::ExponentParams;
use crate::process::{PathSampler, ProcessSpec};
use crate::{Error, Result};

/// 97.5% standard normal quantile (95% two-sided).
const Z95: f64 = 1.959963984540054;

/// Which path functional the tail refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// `M_n = max_{i<=n} |S_i|`
    M,
    /// `|S_n|`
    S,
}

impl Statistic {
    pub fn label(self) -> &'static str {
        match self {
            Statistic::M => "M",
            Statistic::S => "S",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Exact,
    MonteCarlo,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::MonteCarlo => "montecarlo",
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A counter-based substream: `(seed, stream_id)` fully determines the
/// sample sequence, and distinct stream ids give statistically independent
/// streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RandomStream { seed, stream_id }
    }

    /// Stream for one `(n, statistic)` cell; grids stay extensible without
    /// reseeding because the id depends only on the cell.
    pub fn for_cell(seed: u64, n: u64, statistic: Statistic) -> Self {
        let tag = match statistic {
            Statistic::M => 1u64,
            Statistic::S => 2u64,
        };
        RandomStream::new(seed, mix64(mix64(n).wrapping_add(tag)))
    }

    /// Derived stream for replica or sub-cell `idx`.
    pub fn substream(&self, idx: u64) -> RandomStream {
        RandomStream {
            seed: self.seed,
            stream_id: mix64(
                self.stream_id
                    .wrapping_mul(0xD1342543DE82EF95)
                    .wrapping_add(mix64(idx)),
            ),
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let k0 = mix64(self.seed ^ 0x243F6A8885A308D3);
        let k1 = mix64(self.stream_id ^ 0x13198A2E03707344);
        let k2 = mix64(k0 ^ mix64(k1));
        let k3 = mix64(k1.wrapping_add(mix64(k0).rotate_left(17)));
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&k0.to_le_bytes());
        key[8..16].copy_from_slice(&k1.to_le_bytes());
        key[16..24].copy_from_slice(&k2.to_le_bytes());
        key[24..].copy_from_slice(&k3.to_le_bytes());
        ChaCha12Rng::from_seed(key)
    }
}

/// 95% Wilson score interval for `hits` successes in `trials`.
pub fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    assert!(trials >= 1 && hits <= trials);
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // rounding must not push the interval off the point estimate
    (
        ((center - half) / denom).clamp(0.0, 1.0).min(p),
        ((center + half) / denom).clamp(0.0, 1.0).max(p),
    )
}

/// A tail probability `P(statistic > t)` with provenance.
#[derive(Debug, Clone, Serialize)]
pub struct TailEstimate {
    pub n: u64,
    pub t: f64,
    pub statistic: Statistic,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub provenance: Provenance,
}

impl TailEstimate {
    pub fn from_hits(n: u64, t: f64, statistic: Statistic, trials: u64, hits: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(hits, trials);
        TailEstimate {
            n,
            t,
            statistic,
            trials,
            hits,
            p_hat: hits as f64 / trials as f64,
            ci_low,
            ci_high,
            provenance: Provenance::MonteCarlo,
        }
    }

    /// Degenerate estimate from an exact oracle value.
    pub fn exact(n: u64, t: f64, statistic: Statistic, p: f64) -> Self {
        TailEstimate {
            n,
            t,
            statistic,
            trials: 0,
            hits: 0,
            p_hat: p,
            ci_low: p,
            ci_high: p,
            provenance: Provenance::Exact,
        }
    }
}

fn replica_statistic<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    n: u64,
    statistic: Statistic,
    rng: &mut R,
) -> f64 {
    let mut sampler = PathSampler::new(spec);
    let mut s = 0.0f64;
    let mut m = 0.0f64;
    for _ in 0..n {
        s += sampler.next_x(rng);
        if statistic == Statistic::M {
            m = m.max(s.abs());
        }
    }
    match statistic {
        Statistic::M => m,
        Statistic::S => s.abs(),
    }
}

fn validate_cell(spec: &ProcessSpec, n: u64, trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    if n == 0 || n > spec.horizon() {
        return Err(Error::HorizonExceeded {
            n,
            max: spec.horizon(),
        });
    }
    Ok(())
}

/// Estimates `P(statistic > t)` from `trials` independent replicas.
pub fn estimate_tail(
    spec: &ProcessSpec,
    n: u64,
    t: f64,
    statistic: Statistic,
    trials: u64,
    stream: &RandomStream,
) -> Result<TailEstimate> {
    validate_cell(spec, n, trials)?;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream.substream(rep).rng();
            (replica_statistic(spec, n, statistic, &mut rng) > t) as u64
        })
        .sum();
    Ok(TailEstimate::from_hits(n, t, statistic, trials, hits))
}

/// One pass over the replicas evaluated against a whole threshold grid with
/// common random numbers, so the hit counts are exactly non-increasing in
/// `t`.
pub fn estimate_tail_multi(
    spec: &ProcessSpec,
    n: u64,
    ts: &[f64],
    statistic: Statistic,
    trials: u64,
    stream: &RandomStream,
) -> Result<Vec<TailEstimate>> {
    validate_cell(spec, n, trials)?;
    if ts.is_empty() {
        return Err(Error::invalid("empty threshold grid"));
    }
    let hit_counts = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; ts.len()],
            |mut acc, rep| {
                let mut rng = stream.substream(rep).rng();
                let v = replica_statistic(spec, n, statistic, &mut rng);
                for (slot, &t) in acc.iter_mut().zip(ts) {
                    *slot += (v > t) as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; ts.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(ts
        .iter()
        .zip(hit_counts)
        .map(|(&t, hits)| TailEstimate::from_hits(n, t, statistic, trials, hits))
        .collect())
}

/// One estimate per `n` in the grid, each from its own substream, at the
/// parameter-driven threshold `ε n^{1/r}`.
pub fn estimate_grid(
    spec: &ProcessSpec,
    params: &ExponentParams,
    n_grid: &[u64],
    statistic: Statistic,
    trials: u64,
    seed: u64,
) -> Result<Vec<TailEstimate>> {
    for w in n_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid("n grid must be strictly increasing"));
        }
    }
    n_grid
        .iter()
        .map(|&n| {
            let stream = RandomStream::for_cell(seed, n, statistic);
            estimate_tail(spec, n, params.threshold(n), statistic, trials, &stream)
        })
        .collect()
}
