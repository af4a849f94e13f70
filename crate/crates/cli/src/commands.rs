//! Per-subcommand runners. Each one parses its config block, runs the
//! computation, and emits files with full reproducibility metadata.

use std::path::Path;

use serde::Serialize;

use bklab::bounds::{doob_bound, empirical_violation, exact_p_max, shao_bound, ShaoInputs};
use bklab::envelope::{
    convex_linear_envelope, decreasing_after, finite_difference_check, growth_bound_check,
    power_concave, power_convex, ratio_smooth, regularize_sequence, smooth_c2_envelope,
    sqrt_compose, PowerEnvelope, ScheduleRule, SummableSeqSpec, TailBound,
};
use bklab::exact::{exact_tail_m, exact_tail_s, OracleOptions};
use bklab::montecarlo::{
    estimate_grid, estimate_tail_multi, RandomStream, Statistic, TailEstimate,
};
use bklab::params::critical_exponent;
use bklab::process::{build_baseline, ProcessKind};
use bklab::series::{
    assemble, divergence_certificate, divergence_diagnostic, statement1_dyadic, statement1_rate,
    SeriesLedger,
};
use bklab::{Error, Result};

use crate::config::*;
use crate::output::*;

pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
}

fn require_seed(config_seed: Option<u64>, over: &Overrides) -> Result<u64> {
    over.seed
        .or(config_seed)
        .ok_or_else(|| Error::invalid("stochastic commands need a seed (config or --seed)"))
}

fn effective_json<T: Serialize>(cfg: &T) -> String {
    serde_json::to_string(cfg).expect("config reserializes")
}

pub fn run_exponent(cfg: ExponentConfig, out: &Path) -> Result<String> {
    let mut rows = Vec::new();
    for row in &cfg.rows {
        let q = critical_exponent(row.regime.into(), row.r, row.p)?;
        rows.push((row, q));
    }
    let meta = Meta::new("exponent", &effective_json(&cfg), None, None);
    let mut csv = meta.header_lines();
    csv.push_str("regime,r,p,q\n");
    let mut stdout = String::new();
    for (row, q) in &rows {
        let regime: bklab::params::DependenceRegime = row.regime.into();
        stdout.push_str(&format!("{},{},{},{}\n", regime.label(), row.r, row.p, q));
        csv.push_str(&format!(
            "{},{},{},{}\n",
            regime.label(),
            fmt_f64(row.r),
            fmt_f64(row.p),
            fmt_f64(*q)
        ));
    }
    write_text(&out.join("exponents.csv"), &csv)?;
    Ok(stdout)
}

#[derive(Serialize)]
struct EnvelopeReport {
    construction: String,
    dyadic_values: Vec<f64>,
    detail: serde_json::Value,
    checks_passed: bool,
}

pub fn run_envelope(cfg: EnvelopeConfig, out: &Path) -> Result<String> {
    let horizon = cfg.horizon.unwrap_or(60);
    let input = || -> Result<_> {
        cfg.f
            .as_ref()
            .ok_or_else(|| Error::invalid("this construction needs an input f block"))?
            .to_dyadic(horizon)
    };
    let (name, values, detail, ok) = match &cfg.construction {
        ConstructionConfig::Regularize { sequence } => {
            let a = match sequence {
                SequenceConfig::Geometric { first, ratio, n } => {
                    SummableSeqSpec::geometric(*first, *ratio, *n)?
                }
                SequenceConfig::InvNLogSq { n } => SummableSeqSpec::inv_n_log_sq(*n)?,
                SequenceConfig::LogTowerReciprocal { eps, n } => {
                    SummableSeqSpec::log_tower_reciprocal(*eps, *n)?
                }
            };
            let (b, schedule) = regularize_sequence(&a, &ScheduleRule::Greedy)?;
            let n1 = schedule.n1();
            let sum_from_n1: f64 = b[(n1 - 1) as usize..].iter().sum();
            let dominates = b
                .iter()
                .zip(a.terms())
                .all(|(b, a)| b >= a);
            let non_increasing = b.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-15));
            let ok = dominates && non_increasing && sum_from_n1 <= 3.0 + 1e-9;
            let detail = serde_json::json!({
                "n_breaks": schedule.n_breaks(),
                "sum_from_n1": sum_from_n1,
                "dominates": dominates,
                "non_increasing": non_increasing,
                "sum_within_bound": sum_from_n1 <= 3.0 + 1e-9,
            });
            ("regularize".to_string(), b.iter().take(64).copied().collect(), detail, ok)
        }
        ConstructionConfig::RatioSmooth => {
            let g = input()?;
            let tail = tail_bound_for(&cfg.f, horizon)?;
            let rs = ratio_smooth(&g, tail)?;
            let dominated = (1..=g.horizon())
                .all(|n| rs.f.value_at_dyadic(n).unwrap() <= g.value_at_dyadic(n).unwrap() * (1.0 + 1e-12));
            let detail = serde_json::json!({
                "n_breaks": rs.schedule.n_breaks(),
                "dominated": dominated,
            });
            let values = (1..=rs.f.horizon())
                .map(|n| rs.f.value_at_dyadic(n).unwrap())
                .collect();
            ("ratio_smooth".to_string(), values, detail, dominated)
        }
        ConstructionConfig::SmoothC2 => {
            let g = input()?;
            let env = smooth_c2_envelope(&g)?;
            let fd = finite_difference_check(&env, 1000, 0x5EED)?;
            let growth = growth_bound_check(&env, 128)?;
            let ok = fd.max_rel_d1 < 1e-5 && fd.max_rel_d2 < 1e-5 && growth.ok();
            let detail = serde_json::json!({
                "fd_max_rel_d1": fd.max_rel_d1,
                "fd_max_rel_d2": fd.max_rel_d2,
                "growth_d1_margin": growth.max_d1_margin,
                "growth_d2_margin": growth.max_d2_margin,
            });
            let values = g.values().to_vec();
            ("smooth_c2".to_string(), values, detail, ok)
        }
        ConstructionConfig::PowerConcave { p } => {
            let g = input()?;
            let env = power_concave(&smooth_c2_envelope(&g)?, *p)?;
            power_report("power_concave", &g, env, -1.0)?
        }
        ConstructionConfig::PowerConvex { q } => {
            let g = input()?;
            let env = power_convex(&smooth_c2_envelope(&g)?, *q)?;
            power_report("power_convex", &g, env, 1.0)?
        }
        ConstructionConfig::DecreasingAfter { c } => {
            let g = input()?;
            let env = smooth_c2_envelope(&g)?;
            let r_c = decreasing_after(&env, *c)?;
            let mut monotone = true;
            let mut prev = f64::INFINITY;
            for i in 0..=1000 {
                let x = r_c * (env.domain_max() / r_c).powf(i as f64 / 1000.0);
                let h = x.powf(-c) * env.value(x)?;
                if h >= prev {
                    monotone = false;
                }
                prev = h;
            }
            let detail = serde_json::json!({ "r_c": r_c, "monotone": monotone });
            ("decreasing_after".to_string(), g.values().to_vec(), detail, monotone)
        }
        ConstructionConfig::ConvexLinear => {
            let g = input()?;
            let env = convex_linear_envelope(&g)?;
            let max_ratio = env.max_ratio_to_input();
            let slopes_ok = (1..env.horizon()).all(|n| env.slope(n) >= env.slope(n - 1) - 1e-12);
            let ok = max_ratio <= 2.0 + 1e-12 && slopes_ok;
            let detail = serde_json::json!({
                "max_ratio_to_input": max_ratio,
                "slopes_non_decreasing": slopes_ok,
            });
            ("convex_linear".to_string(), env.b().to_vec(), detail, ok)
        }
        ConstructionConfig::SqrtCompose { q } => {
            let g = input()?;
            let sc = sqrt_compose(&g, *q)?;
            let termwise = (1..=g.horizon()).all(|n| {
                sc.f.value_at_dyadic(n).unwrap() + 1e-12 >= g.eval((n as f64 / 2.0).exp2()).unwrap()
            });
            let detail = serde_json::json!({ "n_q": sc.n_q, "termwise_dominates_sqrt": termwise });
            let values = (1..=sc.f.horizon())
                .map(|n| sc.f.value_at_dyadic(n).unwrap())
                .collect();
            ("sqrt_compose".to_string(), values, detail, termwise)
        }
    };
    let meta = Meta::new("envelope", &effective_json(&cfg), None, Some(horizon as u64));
    let report = EnvelopeReport {
        construction: name.clone(),
        dyadic_values: values,
        detail,
        checks_passed: ok,
    };
    write_text(&out.join("envelope.json"), &json_report(&meta, &report))?;
    Ok(format!("{name}: checks_passed={ok}\n"))
}

fn tail_bound_for(f: &Option<FConfig>, _horizon: u32) -> Result<TailBound> {
    match f {
        Some(FConfig::LogTower { eps, .. }) if *eps > 0.0 => {
            Ok(TailBound::LogTowerReciprocal { eps: *eps })
        }
        _ => Err(Error::invalid(
            "ratio smoothing needs a summable input with an analytic tail majorant \
             (a log tower with eps > 0)",
        )),
    }
}

type PowerReport = (String, Vec<f64>, serde_json::Value, bool);

fn power_report(
    name: &str,
    g: &bklab::envelope::DyadicFunction,
    env: PowerEnvelope,
    sign: f64,
) -> Result<PowerReport> {
    // sampled second differences keep the right curvature above the threshold
    let step = 2f64.powf(1.0 / 64.0);
    let mut x = env.threshold;
    let mut curvature_ok = true;
    while x * step * step <= env.domain_max() {
        let (a, b, c) = (env.value(x)?, env.value(x * step)?, env.value(x * step * step)?);
        let second = (c - b) / (x * step * (step - 1.0)) - (b - a) / (x * (step - 1.0));
        if sign * second < -1e-12 * b.abs().max(1.0) {
            curvature_ok = false;
            break;
        }
        x *= step;
    }
    let continuity = {
        let below = env.value(env.threshold * (1.0 - 1e-12))?;
        let at = env.value(env.threshold)?;
        (below - at).abs() <= 1e-10 * at.abs()
    };
    let positive_at_zero = env.value_at_zero() > 0.0;
    let ok = curvature_ok && continuity && positive_at_zero;
    let detail = serde_json::json!({
        "threshold": env.threshold,
        "affine_slope": env.affine_slope,
        "value_at_zero": env.value_at_zero(),
        "curvature_ok": curvature_ok,
        "continuity_ok": continuity,
    });
    Ok((name.to_string(), g.values().to_vec(), detail, ok))
}

#[derive(Serialize)]
struct SpecReport {
    kind: String,
    k0: u32,
    c_const: Option<f64>,
    moment_order: f64,
    moment_value: f64,
}

pub fn run_spec(cfg: SpecConfig, out: &Path) -> Result<String> {
    let (spec, _params) = cfg.block.build()?;
    let s = spec
        .as_blocks()
        .ok_or_else(|| Error::invalid("the spec command describes counterexample processes"))?;
    let meta = Meta::new("spec", &effective_json(&cfg), None, Some(cfg.block.horizon));

    let mut csv = meta.header_lines();
    csv.push_str("k,first_n,last_n,active,value,p_k\n");
    for row in &s.blocks {
        let (value, p_k) = s.formula(row.k)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.k,
            row.first_n,
            row.last_n,
            (row.prob > 0.0) as u8,
            fmt_f64(value),
            fmt_f64(p_k)
        ));
    }
    write_text(&out.join("spec.csv"), &csv)?;

    let q = s.moment_order();
    let first_active = s
        .blocks
        .iter()
        .find(|row| row.prob > 0.0)
        .ok_or_else(|| Error::infeasible("no active block within horizon"))?;
    let moment = bklab::process::exact_moment(&spec, first_active.first_n, q, &s.f)?;
    let report = SpecReport {
        kind: format!("{:?}", spec.kind()),
        k0: s.k0,
        c_const: s.c_const,
        moment_order: q,
        moment_value: moment,
    };
    write_text(&out.join("spec.json"), &json_report(&meta, &report))?;
    let (_, p1) = s.formula(1)?;
    Ok(format!(
        "p_1 = {:.5}, k0 = {}, moment = {}\n",
        p1, s.k0, moment
    ))
}

pub fn run_oracle(cfg: OracleConfig, out: &Path) -> Result<String> {
    let (spec, params) = cfg.block.build()?;
    let mut opts = OracleOptions::default();
    if let Some(cap) = cfg.support_cap {
        opts.support_cap = cap;
    }
    if let Some(cap) = cfg.enum_cap {
        opts.enum_cap = cap;
    }
    let statistic: Statistic = cfg.statistic.into();
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let t = params.threshold(n);
        let p = match statistic {
            Statistic::S => exact_tail_s(&spec, n, t, &opts)?,
            Statistic::M => exact_tail_m(&spec, n, t, &opts)?,
        };
        rows.push(TailEstimate::exact(n, t, statistic, p));
    }
    let meta = Meta::new("oracle", &effective_json(&cfg), None, Some(cfg.block.horizon));
    let mut csv = meta.header_lines();
    csv.push_str(TAIL_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&tail_row(row));
        csv.push('\n');
    }
    write_text(&out.join("tails.csv"), &csv)?;
    Ok(format!("oracle: {} cells\n", rows.len()))
}

pub fn run_simulate(cfg: SimulateConfig, out: &Path, over: &Overrides) -> Result<String> {
    let seed = require_seed(cfg.seed, over)?;
    let trials = over.trials.unwrap_or(cfg.trials);
    let (spec, params) = cfg.block.build()?;
    let mut effective = cfg.clone();
    effective.seed = Some(seed);
    effective.trials = trials;
    let rows = estimate_grid(
        &spec,
        &params,
        &cfg.n_grid,
        cfg.statistic.into(),
        trials,
        seed,
    )?;
    let meta = Meta::new(
        "simulate",
        &effective_json(&effective),
        Some(seed),
        Some(cfg.block.horizon),
    );
    let mut csv = meta.header_lines();
    csv.push_str(TAIL_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&tail_row(row));
        csv.push('\n');
    }
    write_text(&out.join("tails.csv"), &csv)?;
    Ok(format!("simulate: {} cells x {trials} trials\n", rows.len()))
}

pub fn run_bounds_check(cfg: BoundsCheckConfig, out: &Path, over: &Overrides) -> Result<String> {
    let seed = require_seed(cfg.seed, over)?;
    let trials = over.trials.unwrap_or(cfg.trials);
    let mut effective = cfg.clone();
    effective.seed = Some(seed);
    effective.trials = trials;
    let spec = build_baseline(
        ProcessKind::IidDiscrete,
        cfg.atoms.clone(),
        cfg.probs.clone(),
        cfg.n,
    )?;
    let n = cfg.n;
    let second_moment: f64 = cfg
        .atoms
        .iter()
        .zip(&cfg.probs)
        .map(|(a, p)| a * a * p)
        .sum();
    let b_n = second_moment * n as f64;
    let stream = RandomStream::for_cell(seed, n, Statistic::M);
    let ests = estimate_tail_multi(&spec, n, &cfg.x_grid, Statistic::M, trials, &stream)?;
    let meta = Meta::new("bounds-check", &effective_json(&effective), Some(seed), Some(n));
    let mut csv = meta.header_lines();
    csv.push_str("x,a,alpha,b_n,p_max,doob,shao,p_hat,ci_low,doob_margin,doob_violated,shao_margin,shao_violated\n");
    let mut flags = 0u32;
    for (x, est) in cfg.x_grid.iter().zip(&ests) {
        let a = x / cfg.a_divisor;
        let p_max = exact_p_max(&spec, n, a)?;
        let doob = doob_bound(b_n, *x, 2.0)?;
        let shao = shao_bound(&ShaoInputs::new(*x, a, cfg.alpha, b_n, p_max)?);
        let doob_v = empirical_violation(doob, est);
        let shao_v = empirical_violation(shao, est);
        flags += (doob_v.violated as u32) + (shao_v.violated as u32);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(*x),
            fmt_f64(a),
            fmt_f64(cfg.alpha),
            fmt_f64(b_n),
            fmt_f64(p_max),
            fmt_f64(doob),
            fmt_f64(shao),
            fmt_f64(est.p_hat),
            fmt_f64(est.ci_low),
            fmt_f64(doob_v.margin),
            doob_v.violated as u8,
            fmt_f64(shao_v.margin),
            shao_v.violated as u8
        ));
    }
    write_text(&out.join("bounds.csv"), &csv)?;
    Ok(format!("bounds-check: {} x-values, {flags} violations\n", ests.len()))
}

fn ledger_csv(meta: &Meta, ledger: &SeriesLedger) -> String {
    let mut csv = meta.header_lines();
    csv.push_str(LEDGER_HEADER);
    csv.push('\n');
    for row in &ledger.rows {
        csv.push_str(&ledger_row(row));
        csv.push('\n');
    }
    csv
}

pub fn run_series(cfg: SeriesConfig, out: &Path, over: &Overrides) -> Result<String> {
    let (spec, params) = cfg.block.build()?;
    let statistic: Statistic = cfg.statistic.into();
    let mut effective = cfg.clone();
    let tails = match cfg.mode {
        SeriesMode::Exact => {
            let opts = OracleOptions::default();
            let mut tails = Vec::new();
            for &n in &cfg.n_grid {
                let t = params.threshold(n);
                let p = match statistic {
                    Statistic::S => exact_tail_s(&spec, n, t, &opts)?,
                    Statistic::M => exact_tail_m(&spec, n, t, &opts)?,
                };
                tails.push(TailEstimate::exact(n, t, statistic, p));
            }
            tails
        }
        SeriesMode::Mc => {
            let seed = require_seed(cfg.seed, over)?;
            let trials = over
                .trials
                .or(cfg.trials)
                .ok_or_else(|| Error::invalid("mc mode needs trials"))?;
            effective.seed = Some(seed);
            effective.trials = Some(trials);
            estimate_grid(&spec, &params, &cfg.n_grid, statistic, trials, seed)?
        }
    };
    let ledger = assemble(&params, tails)?;
    let meta = Meta::new(
        "series",
        &effective_json(&effective),
        effective.seed,
        Some(cfg.block.horizon),
    );
    write_text(&out.join("ledger.csv"), &ledger_csv(&meta, &ledger))?;

    let diag = divergence_diagnostic(&ledger, cfg.target, cfg.delta);
    let mut cert_summary = serde_json::Value::Null;
    if let Some(k_max) = cfg.certificate_k_max {
        let terms = divergence_certificate(&spec, k_max)?;
        let mut csv = meta.header_lines();
        csv.push_str("k,term,partial_sum\n");
        for t in &terms {
            csv.push_str(&format!(
                "{},{},{}\n",
                t.k,
                fmt_f64(t.term),
                fmt_f64(t.partial_sum)
            ));
        }
        write_text(&out.join("certificate.csv"), &csv)?;
        cert_summary = serde_json::json!({
            "k_max": k_max,
            "partial_sum": terms.last().map(|t| t.partial_sum),
        });
    }
    let report = serde_json::json!({
        "diagnostic": diag,
        "certificate": cert_summary,
        "cum_sum": ledger.last_cum_sum(),
    });
    write_text(&out.join("series.json"), &json_report(&meta, &report))?;
    Ok(format!(
        "series: cum_sum = {}, divergence_flag = {}\n",
        ledger.last_cum_sum(),
        diag.divergence_flag
    ))
}

pub fn run_statement1(cfg: Statement1Config, out: &Path, over: &Overrides) -> Result<String> {
    let seed = require_seed(cfg.seed, over)?;
    let trials = over.trials.unwrap_or(cfg.trials);
    let mut effective = cfg.clone();
    effective.seed = Some(seed);
    effective.trials = trials;
    let (spec, params) = cfg.block.build()?;
    let meta = Meta::new(
        "statement1",
        &effective_json(&effective),
        Some(seed),
        Some(cfg.block.horizon),
    );
    match &cfg.variant {
        Statement1Variant::Dyadic { n_dyadic } => {
            let ledger = statement1_dyadic(&spec, &params, trials, seed, *n_dyadic)?;
            write_text(&out.join("statement1.csv"), &ledger_csv(&meta, &ledger))?;
            Ok(format!(
                "statement1 dyadic: {} terms, cum_sum = {}\n",
                ledger.rows.len(),
                ledger.last_cum_sum()
            ))
        }
        Statement1Variant::Rate { anchors, window } => {
            let ests = statement1_rate(&spec, &params, anchors, *window, trials, seed)?;
            let mut csv = meta.header_lines();
            csv.push_str("n_anchor,trials,hits,p_hat,ci_low,ci_high,comparison\n");
            for e in &ests {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    e.n_anchor,
                    e.trials,
                    e.hits,
                    fmt_f64(e.p_hat),
                    fmt_f64(e.ci_low),
                    fmt_f64(e.ci_high),
                    fmt_f64(e.comparison)
                ));
            }
            write_text(&out.join("statement1.csv"), &csv)?;
            Ok(format!("statement1 rate: {} anchors\n", ests.len()))
        }
    }
}

