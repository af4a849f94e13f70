//! JSON experiment configs, one block per subcommand.

use serde::{Deserialize, Serialize};

use bklab::envelope::{CorrectionFn, DyadicFunction};
use bklab::params::{DependenceRegime, ExponentParams};
use bklab::process::{
    build_baseline, build_counterexample_arbitrary, build_counterexample_independent,
    build_counterexample_mds, ProcessKind, ProcessSpec,
};
use bklab::montecarlo::Statistic;
use bklab::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FConfig {
    LogTower {
        m: u32,
        #[serde(default)]
        eps: f64,
    },
    Dyadic {
        values: Vec<f64>,
        #[serde(default)]
        below_2: Option<f64>,
    },
}

impl FConfig {
    pub fn to_correction(&self) -> Result<CorrectionFn> {
        Ok(match self {
            FConfig::LogTower { m, eps } => CorrectionFn::LogTower { m: *m, eps: *eps },
            FConfig::Dyadic { values, below_2 } => {
                let below = below_2.unwrap_or(*values.first().unwrap_or(&1.0));
                CorrectionFn::Dyadic(DyadicFunction::with_below_2(
                    values.clone(),
                    below,
                    bklab::envelope::Interpolation::StepRight,
                )?)
            }
        })
    }

    pub fn to_dyadic(&self, horizon: u32) -> Result<DyadicFunction> {
        match self {
            FConfig::LogTower { m, eps } => DyadicFunction::log_tower(*m, *eps, horizon),
            FConfig::Dyadic { values, below_2 } => {
                let below = below_2.unwrap_or(*values.first().unwrap_or(&1.0));
                DyadicFunction::with_below_2(
                    values.clone(),
                    below,
                    bklab::envelope::Interpolation::StepRight,
                )
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessConfig {
    IidDiscrete { atoms: Vec<f64>, probs: Vec<f64> },
    NaViaIndependent { atoms: Vec<f64>, probs: Vec<f64> },
    CounterexampleIndependent,
    CounterexampleMds,
    CounterexampleArbitrary,
}

/// The process + parameter block shared by the experiment subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessBlock {
    pub process: ProcessConfig,
    pub r: f64,
    pub p: f64,
    pub eps: f64,
    #[serde(default)]
    pub f: Option<FConfig>,
    pub horizon: u64,
}

impl ProcessBlock {
    pub fn params(&self) -> Result<ExponentParams> {
        ExponentParams::new(self.r, self.p, self.eps)
    }

    pub fn build(&self) -> Result<(ProcessSpec, ExponentParams)> {
        let params = self.params()?;
        let correction = || -> Result<CorrectionFn> {
            self.f
                .as_ref()
                .ok_or_else(|| Error::invalid("counterexample processes need an f block"))?
                .to_correction()
        };
        let spec = match &self.process {
            ProcessConfig::IidDiscrete { atoms, probs } => build_baseline(
                ProcessKind::IidDiscrete,
                atoms.clone(),
                probs.clone(),
                self.horizon,
            )?,
            ProcessConfig::NaViaIndependent { atoms, probs } => build_baseline(
                ProcessKind::NaViaIndependent,
                atoms.clone(),
                probs.clone(),
                self.horizon,
            )?,
            ProcessConfig::CounterexampleIndependent => {
                build_counterexample_independent(params, correction()?, self.horizon)?
            }
            ProcessConfig::CounterexampleMds => {
                build_counterexample_mds(params, correction()?, self.horizon)?
            }
            ProcessConfig::CounterexampleArbitrary => {
                build_counterexample_arbitrary(params, correction()?, self.horizon)?
            }
        };
        Ok((spec, params))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StatisticConfig {
    M,
    S,
}

impl From<StatisticConfig> for Statistic {
    fn from(s: StatisticConfig) -> Statistic {
        match s {
            StatisticConfig::M => Statistic::M,
            StatisticConfig::S => Statistic::S,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum RegimeConfig {
    Arbitrary,
    PairwiseNQD,
    NA,
    MDS,
    ICS,
}

impl From<RegimeConfig> for DependenceRegime {
    fn from(r: RegimeConfig) -> DependenceRegime {
        match r {
            RegimeConfig::Arbitrary => DependenceRegime::Arbitrary,
            RegimeConfig::PairwiseNQD => DependenceRegime::PairwiseNqd,
            RegimeConfig::NA => DependenceRegime::NegativelyAssociated,
            RegimeConfig::MDS => DependenceRegime::Mds,
            RegimeConfig::ICS => DependenceRegime::IndependentCentered,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentRow {
    pub regime: RegimeConfig,
    pub r: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentConfig {
    pub rows: Vec<ExponentRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceConfig {
    Geometric { first: f64, ratio: f64, n: u64 },
    InvNLogSq { n: u64 },
    LogTowerReciprocal { eps: f64, n: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstructionConfig {
    Regularize { sequence: SequenceConfig },
    RatioSmooth,
    SmoothC2,
    PowerConcave { p: f64 },
    PowerConvex { q: f64 },
    DecreasingAfter { c: f64 },
    ConvexLinear,
    SqrtCompose { q: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub construction: ConstructionConfig,
    #[serde(default)]
    pub f: Option<FConfig>,
    #[serde(default)]
    pub horizon: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    #[serde(flatten)]
    pub block: ProcessBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(flatten)]
    pub block: ProcessBlock,
    pub n_grid: Vec<u64>,
    pub statistic: StatisticConfig,
    #[serde(default)]
    pub support_cap: Option<usize>,
    #[serde(default)]
    pub enum_cap: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub block: ProcessBlock,
    pub n_grid: Vec<u64>,
    pub statistic: StatisticConfig,
    pub trials: u64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsCheckConfig {
    pub atoms: Vec<f64>,
    pub probs: Vec<f64>,
    pub n: u64,
    pub x_grid: Vec<f64>,
    /// Shao's `a = x / a_divisor`.
    #[serde(default = "default_a_divisor")]
    pub a_divisor: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub trials: u64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_a_divisor() -> f64 {
    8.0
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(flatten)]
    pub block: ProcessBlock,
    pub mode: SeriesMode,
    pub n_grid: Vec<u64>,
    pub statistic: StatisticConfig,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Emit divergence-certificate terms up to this block (counterexamples).
    #[serde(default)]
    pub certificate_k_max: Option<u32>,
    #[serde(default = "default_target")]
    pub target: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_target() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statement1Variant {
    Dyadic { n_dyadic: u32 },
    Rate { anchors: Vec<u64>, window: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Statement1Config {
    #[serde(flatten)]
    pub block: ProcessBlock,
    pub variant: Statement1Variant,
    pub trials: u64,
    #[serde(default)]
    pub seed: Option<u64>,
}
