//! Per-run result records.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

/// Everything a single train/eval run reports: accuracies, the sparsity
/// artifact, timing, and a full hyperparameter echo. Serialized as one JSON
/// line per run so results aggregate with line tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Model kind, e.g. "bcpnn" or "rbm".
    pub model: String,
    pub dataset: String,
    pub seed: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Fraction of exactly-zero weight entries; meaningful for BCPNN.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_weight_fraction: Option<f64>,
    pub wall_clock_seconds: f64,
    pub hyperparameters: BTreeMap<String, String>,
}

impl RunReport {
    pub fn validate(&self) -> Result<()> {
        for (name, acc) in [
            ("train_accuracy", self.train_accuracy),
            ("test_accuracy", self.test_accuracy),
        ] {
            if !(0.0..=1.0).contains(&acc) {
                return Err(Error::invalid("accuracy", format!("{name} = {acc}")));
            }
        }
        Ok(())
    }

    /// Single-line JSON record.
    pub fn to_json_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::format(e.to_string()))
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let report: RunReport =
            serde_json::from_str(line).map_err(|e| Error::format(e.to_string()))?;
        report.validate()?;
        Ok(report)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        writeln!(f, "{}", self.to_json_line()?)?;
        Ok(())
    }

    /// CSV with a header row; hyperparameters flatten to `k=v` pairs joined
    /// by semicolons.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let hp = self
            .hyperparameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let zero = self
            .zero_weight_fraction
            .map(|z| z.to_string())
            .unwrap_or_default();
        let mut f = File::create(path)?;
        writeln!(
            f,
            "model,dataset,seed,train_accuracy,test_accuracy,zero_weight_fraction,wall_clock_seconds,hyperparameters"
        )?;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            self.model,
            self.dataset,
            self.seed,
            self.train_accuracy,
            self.test_accuracy,
            zero,
            self.wall_clock_seconds,
            hp
        )?;
        Ok(())
    }
}
