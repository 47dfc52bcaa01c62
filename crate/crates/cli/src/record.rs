//! Result records and CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use quasistat::stattest::SampleMatrix;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// Outcome of one command. Runtime is reported on stderr, not here, so that
/// identical inputs give byte-identical report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub id: String,
    pub config: ExperimentConfig,
    pub statistics: BTreeMap<String, f64>,
    pub p_values: BTreeMap<String, f64>,
    pub pass: BTreeMap<String, bool>,
    pub verdict: Option<String>,
}

impl ResultRecord {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        let id = format!(
            "{experiment}-{}-seed{}",
            config.kind,
            config.seed.map_or_else(|| "none".to_string(), |s| s.to_string())
        );
        Self {
            experiment: experiment.to_string(),
            id,
            config: config.clone(),
            statistics: BTreeMap::new(),
            p_values: BTreeMap::new(),
            pass: BTreeMap::new(),
            verdict: None,
        }
    }

    pub fn stat(&mut self, key: impl Into<String>, value: f64) {
        self.statistics.insert(key.into(), value);
    }

    pub fn p(&mut self, key: impl Into<String>, value: f64) {
        self.p_values.insert(key.into(), value);
    }

    pub fn flag(&mut self, key: impl Into<String>, value: bool) {
        self.pass.insert(key.into(), value);
    }

    pub fn all_pass(&self) -> bool {
        self.pass.values().all(|&b| b)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes") + "\n"
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        write_text(&dir.join("report.json"), &self.to_json())
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_csv(prefix: &str, m: &SampleMatrix) -> String {
    let mut s = (1..=m.ncols()).map(|j| format!("{prefix}_{j}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in m.rows() {
        let line = row.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",");
        s.push_str(&line);
        s.push('\n');
    }
    s
}

/// `(name, statistic, p_value)` rows.
pub fn pvalues_csv(rows: &[(String, f64, f64)]) -> String {
    let mut s = String::from("test,statistic,p_value\n");
    for (name, stat, p) in rows {
        writeln!(s, "{name},{},{}", fmt_f64(*stat), fmt_f64(*p)).expect("string write");
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
