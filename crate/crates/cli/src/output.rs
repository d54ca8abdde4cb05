use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use ptlevels::perturb::{effective_series, label_mapping, LabelMapping};
use ptlevels::{eigen, pade, sweep, Model};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Command, FileFormat};
use crate::Failure;

/// Everything that determines a run's results. Embedded in every export;
/// the output directory is left out so exports do not depend on it.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    pub formats: Vec<FileFormat>,
}

/// 17 significant digits, with negative zero printed as zero.
pub fn num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

pub struct Output {
    pub config: RunConfig,
    dir: Option<PathBuf>,
}

impl Output {
    pub fn new(config: RunConfig, dir: Option<PathBuf>) -> Self {
        Output { config, dir }
    }

    pub fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }

    pub fn config_value(&self) -> Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    pub fn wants(&self, f: FileFormat) -> bool {
        self.dir.is_some() && self.config.formats.contains(&f)
    }

    /// CSV with the configuration as a leading `#` line.
    pub fn csv(&self, name: &str, body: &str) -> Result<(), Failure> {
        if self.wants(FileFormat::Csv) {
            self.write(name, &format!("# config {}\n{body}", self.config_json()))?;
        }
        Ok(())
    }

    pub fn json(&self, name: &str, value: &Value) -> Result<(), Failure> {
        if self.wants(FileFormat::Json) {
            self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))?;
        }
        Ok(())
    }

    pub fn svg(&self, name: &str, body: &str) -> Result<(), Failure> {
        if self.wants(FileFormat::Svg) {
            self.write(name, body)?;
        }
        Ok(())
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), contents)?;
        Ok(())
    }

    /// Writes metadata.json, or prints it to stderr without an output
    /// directory.
    pub fn metadata(&self, model: Model, truncation: Option<u32>, orders: Value, mapping: Vec<LabelMapping>, tolerances: Value) -> Result<(), Failure> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = json!({
            "tool": "ptlevels",
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config_value(),
            "model": model,
            "truncation_n_max": truncation,
            "orders": orders,
            "pade_variable": "g",
            "tolerances": tolerances,
            "label_mapping": mapping,
            "timestamp_unix": stamp,
        });
        match &self.dir {
            Some(_) => self.write("metadata.json", &(serde_json::to_string_pretty(&meta)? + "\n")),
            None => {
                writeln!(std::io::stderr(), "metadata {}", serde_json::to_string(&meta)?)?;
                Ok(())
            }
        }
    }
}

/// Tolerances shared by every command.
pub fn base_tolerances() -> Value {
    json!({
        "reality_tol_relative_frobenius": eigen::REALITY_TOL,
        "pair_tol": eigen::PAIR_TOL,
        "krylov_residual": eigen::KRYLOV_TOL,
        "pade_pole_tol": pade::POLE_TOL,
        "convergence_tol": sweep::CONVERGENCE_TOL,
        "ep_bracket": sweep::EP_BRACKET,
    })
}

/// Mapping of the computed labels of levels `0..=top` onto the printed
/// tables, for the levels that have one.
pub fn mapping_through(model: Model, top: u32) -> Vec<LabelMapping> {
    let mut out = Vec::new();
    for n in 0..=top {
        if ptlevels::perturb::reference::reference(model, n).is_empty() {
            continue;
        }
        if let Ok(series) = effective_series(model, n, ptlevels::perturb::DEFAULT_CHECK_ORDER) {
            out.extend(label_mapping(&series));
        }
    }
    out
}
