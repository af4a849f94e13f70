//! Deterministic file emission: meta headers, 17-significant-digit numbers.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use bklab::montecarlo::TailEstimate;
use bklab::series::LedgerRow;

/// Reproducibility metadata embedded in every emitted file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub core_version: &'static str,
    pub cli_version: &'static str,
}

impl Meta {
    pub fn new(command: &str, config_json: &str, seed: Option<u64>, horizon: Option<u64>) -> Meta {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update(b"\n");
        hasher.update(config_json.as_bytes());
        let hash = hasher.finalize();
        let config_hash = hash.iter().map(|b| format!("{b:02x}")).collect();
        Meta {
            config_hash,
            seed,
            horizon,
            core_version: "0.1.0",
            cli_version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn header_lines(&self) -> String {
        let seed = match self.seed {
            Some(s) => s.to_string(),
            None => "none".to_string(),
        };
        let horizon = match self.horizon {
            Some(h) => h.to_string(),
            None => "none".to_string(),
        };
        format!(
            "# config_hash={}\n# seed={}\n# horizon={}\n# bklab_version={}\n# bklab_cli_version={}\n",
            self.config_hash, seed, horizon, self.core_version, self.cli_version
        )
    }
}

/// 17 significant digits: enough to round-trip any binary64 value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_text(path: &Path, content: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, content)
}

pub const TAIL_HEADER: &str = "n,t,statistic,trials,hits,p_hat,ci_low,ci_high,provenance";
pub const LEDGER_HEADER: &str =
    "n,t,statistic,trials,hits,p_hat,ci_low,ci_high,provenance,weight,increment,cum_sum,cum_low,cum_high";

pub fn tail_row(est: &TailEstimate) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        est.n,
        fmt_f64(est.t),
        est.statistic.label(),
        est.trials,
        est.hits,
        fmt_f64(est.p_hat),
        fmt_f64(est.ci_low),
        fmt_f64(est.ci_high),
        est.provenance.label()
    )
}

pub fn ledger_row(row: &LedgerRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        tail_row(&row.tail),
        fmt_f64(row.weight),
        fmt_f64(row.increment),
        fmt_f64(row.cum_sum),
        fmt_f64(row.cum_low),
        fmt_f64(row.cum_high)
    )
}

/// JSON report with the meta block injected under `_meta`.
pub fn json_report<T: Serialize>(meta: &Meta, body: &T) -> String {
    let mut value = serde_json::to_value(body).expect("report serializes");
    if let serde_json::Value::Object(map) = &mut value {
        map.insert(
            "_meta".to_string(),
            serde_json::to_value(meta).expect("meta serializes"),
        );
    }
    serde_json::to_string_pretty(&value).expect("report serializes") + "\n"
}
