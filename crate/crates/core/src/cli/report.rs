use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::blockbasis::BlockDiagnostics;
use crate::characters::{AuerbachL1Report, UnconditionalityEstimate};
use crate::conditionality::{Witness, WitnessBoundsReport};
use crate::error::Result;
use crate::renorm::AuerbachReport;
use crate::search::SearchOutcome;
use crate::verify::Theorem1Certificate;

use super::config::{Format, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // Display for f64 is the shortest string that parses back exactly
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Item {
    Block {
        m: usize,
        start: usize,
        end: usize,
        diagnostics: BlockDiagnostics,
    },
    Certificate {
        label: String,
        certificate: Theorem1Certificate,
    },
    Witness {
        permutation: String,
        witness: Witness,
        bounds: WitnessBoundsReport,
    },
    Oracle {
        dim: usize,
        identity_constant: f64,
        best: SearchOutcome,
    },
    Renorm {
        report: AuerbachReport,
    },
    Characters {
        m: u32,
        prefix_profile: Vec<f64>,
        auerbach: AuerbachL1Report,
        min_max: Option<SearchOutcome>,
        unconditionality: Vec<UnconditionalityEstimate>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub mode: String,
    pub config: RunConfig,
    pub items: Vec<Item>,
    pub table: Table,
    pub passed: bool,
    pub failures: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write<W: Write>(&self, format: Format, mut out: W) -> Result<()> {
        match format {
            Format::Json => {
                out.write_all(self.to_json()?.as_bytes())?;
                out.write_all(b"\n")?;
            }
            Format::Csv => self.table.write_csv(out)?,
        }
        Ok(())
    }
}
