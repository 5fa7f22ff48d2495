//! The JSON run report.
//!
//! Every probability in the credible-set section is stored with its integer
//! count next to the sample size `n`, so masses are exact multiples of `1/n`
//! and can be recomputed from the file alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::credible::{BlockCredibleSet, CartesianCredibleSet, CriterionTrace};
use crate::error::{Error, Result};
use crate::factorization::MergeStep;
use crate::io::write_atomic;
use crate::model::{Partition, SubModel};
use crate::pipeline::RunConfig;
use crate::summaries::SummaryBundle;

pub const SCHEMA: &str = "ccs_report_v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportError {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenedVariable {
    pub index: usize,
    pub label: String,
    pub pip: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub kl_scores: Vec<f64>,
    pub etas: Vec<f64>,
    /// Merged blocks, in original variable indices.
    pub merges: Vec<MergeStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMember {
    /// Bits in block order.
    pub bits: String,
    /// Original indices of the included variables.
    pub included: Vec<usize>,
    pub count: u64,
    pub mass: f64,
    pub modal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBlock {
    pub variables: Vec<usize>,
    pub labels: Vec<String>,
    pub n: u64,
    pub retained_count: u64,
    pub retained_mass: f64,
    pub block_pip: f64,
    pub members: Vec<ReportMember>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub lambda: f64,
    pub partition: Vec<Vec<usize>>,
    pub log_mass: f64,
    pub mass: f64,
    pub log_size: f64,
    pub size: f64,
    pub blocks: Vec<ReportBlock>,
}

impl ReportSet {
    /// Flattens a credible set whose block indices are already original
    /// variable indices.
    pub fn from_set(set: &CartesianCredibleSet, labels: &[String]) -> Self {
        let blocks = set
            .blocks
            .iter()
            .map(|b| ReportBlock {
                variables: b.block.clone(),
                labels: b.block.iter().map(|&i| labels.get(i).cloned().unwrap_or_default()).collect(),
                n: b.n_samples,
                retained_count: b.retained_count(),
                retained_mass: b.pi(),
                block_pip: b.block_pip(),
                members: b
                    .members
                    .iter()
                    .enumerate()
                    .map(|(k, (sub, count))| ReportMember {
                        bits: sub.to_bit_string(),
                        included: sub.ones().map(|pos| b.block[pos]).collect(),
                        count: *count,
                        mass: b.mass(k),
                        modal: k == 0,
                    })
                    .collect(),
            })
            .collect();
        ReportSet {
            lambda: set.lambda,
            partition: set.partition.blocks().to_vec(),
            log_mass: set.log_mass,
            mass: set.mass(),
            log_size: set.log_size,
            size: set.size(),
            blocks,
        }
    }

    /// Rebuilds the credible set, e.g. to check it against an oracle.
    pub fn to_set(&self, screened_out: Vec<usize>) -> Result<CartesianCredibleSet> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let members = b
                    .members
                    .iter()
                    .map(|m| Ok((m.bits.parse::<SubModel>()?, m.count)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(BlockCredibleSet {
                    block: b.variables.clone(),
                    n_samples: b.n,
                    members,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CartesianCredibleSet {
            lambda: self.lambda,
            partition: Partition::new(self.partition.clone())?,
            blocks,
            log_mass: self.log_mass,
            log_size: self.log_size,
            screened_out,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ReportError>,
    pub config: RunConfig,
    pub n_samples: usize,
    pub labels: Vec<String>,
    pub summary: Option<SummaryBundle>,
    pub screened_out: Vec<ScreenedVariable>,
    pub sequence: Option<SequenceMeta>,
    pub criterion: Option<CriterionTrace>,
    pub credible_set: Option<ReportSet>,
}

impl Report {
    /// A report for a run that stopped with `err`.
    pub fn failed(config: RunConfig, labels: Vec<String>, n_samples: usize, err: &Error) -> Self {
        let kind = match err {
            Error::InvalidInput(_) => "invalid_input",
            Error::Parse { .. } => "parse",
            Error::EmptyRetainedSet { .. } => "empty_retained_set",
            Error::Infeasible { .. } => "infeasible",
            Error::Singular(_) => "singular",
            Error::EnumerationBound { .. } => "enumeration_bound",
            Error::Schema { .. } => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        };
        Report {
            schema: SCHEMA.to_string(),
            status: Status::Error,
            error: Some(ReportError {
                kind: kind.to_string(),
                message: err.to_string(),
            }),
            config,
            n_samples,
            labels,
            summary: None,
            screened_out: Vec::new(),
            sequence: None,
            criterion: None,
            credible_set: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
        if found != SCHEMA {
            return Err(Error::Schema {
                expected: SCHEMA.to_string(),
                found: found.to_string(),
            });
        }
        Ok(serde_json::from_value(value)?)
    }
}

pub fn write_report(report: &Report, path: &Path) -> Result<()> {
    write_atomic(path, report.to_json()?.as_bytes())
}

pub fn read_report(path: &Path) -> Result<Report> {
    Report::from_json(&std::fs::read_to_string(path)?)
}
