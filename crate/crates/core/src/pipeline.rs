//! Trace → report: screening, agglomeration, partition selection.

use serde::{Deserialize, Serialize};

use crate::credible::{select_partition, CartesianCredibleSet, SignMode};
use crate::error::{invalid, Error, Result};
use crate::factorization::{agglomerate, AgglomerateConfig, MergeStep};
use crate::io::report::{Report, ReportSet, ScreenedVariable, SequenceMeta, Status, SCHEMA};
use crate::model::SampleTrace;
use crate::summaries::{screen, summarize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lambda: f64,
    pub m: f64,
    pub screen_tau: f64,
    pub sign_mode: SignMode,
    #[serde(default)]
    pub agglomerate: AgglomerateConfig,
    /// File name of the input trace, without directories.
    #[serde(default)]
    pub input: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda: 0.5,
            m: 2.0,
            screen_tau: 0.04,
            sign_mode: SignMode::PenaltyAdded,
            agglomerate: AgglomerateConfig::default(),
            input: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(invalid(format!("lambda = {} must lie in (0, 1]", self.lambda)));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(invalid(format!("M = {} must be positive", self.m)));
        }
        if !(0.0..1.0).contains(&self.screen_tau) {
            return Err(invalid(format!("screening threshold {} must lie in [0, 1)", self.screen_tau)));
        }
        Ok(())
    }
}

/// Full result of a `find` run, before flattening into a [`Report`].
#[derive(Clone, Debug, PartialEq)]
pub struct FindResult {
    pub set: CartesianCredibleSet,
    pub report: Report,
}

/// Runs the pipeline. Invalid configuration is an error; an empty retained
/// set or an unreachable level yields a report with error status.
pub fn find(trace: &SampleTrace, config: &RunConfig) -> Result<Report> {
    match find_detailed(trace, config) {
        Ok(r) => Ok(r.report),
        Err(e @ (Error::EmptyRetainedSet { .. } | Error::Infeasible { .. })) => {
            let mut report = Report::failed(config.clone(), trace.labels().to_vec(), trace.n_samples(), &e);
            let summary = summarize(trace, config.screen_tau)?;
            report.screened_out = screened(trace, &summary.pips, &summary.retained);
            report.summary = Some(summary);
            Ok(report)
        }
        Err(e) => Err(e),
    }
}

fn screened(trace: &SampleTrace, pips: &[f64], retained: &[usize]) -> Vec<ScreenedVariable> {
    (0..trace.n_vars())
        .filter(|i| !retained.contains(i))
        .map(|i| ScreenedVariable {
            index: i,
            label: trace.labels()[i].clone(),
            pip: pips[i],
        })
        .collect()
}

pub fn find_detailed(trace: &SampleTrace, config: &RunConfig) -> Result<FindResult> {
    config.validate()?;
    let summary = summarize(trace, config.screen_tau)?;
    let (reduced, kept) = screen(trace, config.screen_tau)?;
    let sequence = agglomerate(&reduced, &config.agglomerate)?;
    let selection = select_partition(&sequence, &reduced, config.lambda, config.m, config.sign_mode)?;
    let screened_out = screened(trace, &summary.pips, &kept);
    let set = selection
        .set
        .relabel(&kept, screened_out.iter().map(|s| s.index).collect())?;
    let to_original = |b: &[usize]| b.iter().map(|&i| kept[i]).collect::<Vec<_>>();
    let merges = sequence
        .merges
        .iter()
        .map(|m| MergeStep {
            left: to_original(&m.left),
            right: to_original(&m.right),
            gain: m.gain,
        })
        .collect();
    let report = Report {
        schema: SCHEMA.to_string(),
        status: Status::Ok,
        error: None,
        config: config.clone(),
        n_samples: trace.n_samples(),
        labels: trace.labels().to_vec(),
        summary: Some(summary),
        screened_out,
        sequence: Some(SequenceMeta {
            kl_scores: sequence.kl_scores.clone(),
            etas: sequence.etas.clone(),
            merges,
        }),
        criterion: Some(selection.criterion),
        credible_set: Some(ReportSet::from_set(&set, trace.labels())),
    };
    Ok(FindResult { set, report })
}
