//! Run reports and their CSV/JSON encodings.
//!
//! Reports carry no timestamps or host information, so a fixed configuration
//! always serializes to the same bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::config::{ExperimentConfig, Format};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// The run completed but cannot support a pass/fail decision.
    Inconclusive,
    /// No pass/fail semantics for this configuration.
    Informational,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Fail => 1,
            _ => 0,
        }
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Inconclusive => "INCONCLUSIVE",
            Self::Informational => "INFORMATIONAL",
        }
    }
}

/// One table cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    /// Serialized as `null` / an empty CSV field.
    Missing,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Self::Num(x)
        } else {
            Self::Missing
        }
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Self::Int(x as u64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Self::Bool(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Self::Missing, Self::from)
    }
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Self::Num(x) => format!("{x:.16e}"),
            Self::Int(n) => n.to_string(),
            Self::Bool(b) => b.to_string(),
            Self::Missing => String::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub verdict: Verdict,
    pub reason: String,
    /// Command-specific scalar results.
    pub metrics: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
}

impl Software {
    pub const CURRENT: Self = Self {
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
    };
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub software: Software,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub columns: Vec<&'static str>,
    pub records: Vec<Vec<Cell>>,
}

impl RunReport {
    pub fn verdict(&self) -> Verdict {
        self.summary.verdict
    }

    /// The whole report as pretty-printed JSON. Floats use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Everything except the table, for the sidecar of a CSV run.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Head<'a> {
            software: &'a Software,
            seed: u64,
            config: &'a ExperimentConfig,
            summary: &'a Summary,
            columns: &'a [&'static str],
        }
        let mut s = serde_json::to_string_pretty(&Head {
            software: &self.software,
            seed: self.seed,
            config: &self.config,
            summary: &self.summary,
            columns: &self.columns,
        })?;
        s.push('\n');
        Ok(s)
    }

    /// The table with a header row; floats carry 17 significant digits.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.records {
            w.write_record(row.iter().map(Cell::csv_field))
                .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| csv_error(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is ASCII"))
    }

    /// Writes the report in the configured format to `config.output`, or
    /// to stdout when no path is set. A CSV file gets a
    /// `<output>.summary.json` sidecar. Returns the paths written.
    pub fn write(&self, format: Format, output: Option<&Path>) -> Result<Vec<PathBuf>> {
        let body = match format {
            Format::Json => self.to_json()?,
            Format::Csv => self.to_csv()?,
        };
        let Some(path) = output else {
            std::io::stdout().lock().write_all(body.as_bytes())?;
            return Ok(Vec::new());
        };
        fs::write(path, body)?;
        let mut written = vec![path.to_path_buf()];
        if format == Format::Csv {
            let sidecar = summary_path(path);
            fs::write(&sidecar, self.summary_json()?)?;
            written.push(sidecar);
        }
        Ok(written)
    }
}

pub fn summary_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::Error::Config(format!("CSV encoding failed: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::Command;

    fn sample() -> RunReport {
        RunReport {
            software: Software::CURRENT,
            seed: 1,
            config: ExperimentConfig::defaults(Command::Unravel),
            summary: Summary {
                verdict: Verdict::Pass,
                reason: "ok".into(),
                metrics: serde_json::json!({"x": 0.1}),
            },
            columns: vec!["t", "x", "flag", "gap"],
            records: vec![vec![
                Cell::from(0.1),
                Cell::from(1.0 / 3.0),
                Cell::from(true),
                Cell::from(f64::NAN),
            ]],
        }
    }

    #[test]
    fn csv_is_lossless() {
        let csv = sample().to_csv().unwrap();
        assert!(!csv.contains('\r'));
        let row = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(fields[1], "3.3333333333333331e-1");
        assert_eq!(fields[2..], ["true", ""]);
    }

    #[test]
    fn json_round_trips_floats() {
        let json = sample().to_json().unwrap();
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["records"][0][1].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(v["summary"]["verdict"], "PASS");
        assert!(v["records"][0][3].is_null());
        assert!(v["config"].get("threads").is_none());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            summary_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.csv.summary.json")
        );
    }
}
