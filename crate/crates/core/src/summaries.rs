//! First-order and pairwise summaries of a sampled posterior over models.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{model_frequencies, Model, SampleTrace};
use crate::reaches_level;

/// Marginal posterior inclusion probability of every variable.
pub fn pips(trace: &SampleTrace) -> Vec<f64> {
    let n = trace.n_samples() as f64;
    column_counts(trace).into_iter().map(|c| c as f64 / n).collect()
}

fn column_counts(trace: &SampleTrace) -> Vec<u64> {
    let mut counts = vec![0u64; trace.n_vars()];
    for m in trace.models() {
        for i in m.ones() {
            counts[i] += 1;
        }
    }
    counts
}

/// Includes variable `i` iff `pips[i] > 0.5` (strictly).
pub fn median_model(pips: &[f64]) -> Model {
    Model::from_bits(&pips.iter().map(|&p| p > 0.5).collect::<Vec<_>>())
}

/// Most frequent sampled model; ties go to the lexicographically smallest
/// pattern. With MCMC input this is the empirical mode only.
pub fn map_model_estimate(trace: &SampleTrace) -> (Model, u64) {
    let mut best: Option<(Model, u64)> = None;
    // BTreeMap iterates in lexicographic order, so a strict `>` keeps the smallest tie
    for (model, count) in model_frequencies(trace) {
        if best.as_ref().is_none_or(|(_, c)| count > *c) {
            best = Some((model, count));
        }
    }
    best.expect("traces are non-empty")
}

/// Pearson correlation of the inclusion indicator columns. Entries involving
/// a constant column are 0 off the diagonal; the diagonal is 1.
pub fn inclusion_correlation(trace: &SampleTrace) -> Vec<Vec<f64>> {
    let p = trace.n_vars();
    let n = trace.n_samples();
    let words = n.div_ceil(64);
    // column-major bitsets so pair counts are popcounts
    let mut cols = vec![vec![0u64; words]; p];
    for (k, m) in trace.models().iter().enumerate() {
        for i in m.ones() {
            cols[i][k / 64] |= 1 << (k % 64);
        }
    }
    let nf = n as f64;
    let freq: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|w| w.count_ones() as f64).sum::<f64>() / nf)
        .collect();
    let mut r = vec![vec![0.0; p]; p];
    for i in 0..p {
        r[i][i] = 1.0;
        for j in (i + 1)..p {
            let vi = freq[i] * (1.0 - freq[i]);
            let vj = freq[j] * (1.0 - freq[j]);
            if vi <= 0.0 || vj <= 0.0 {
                continue;
            }
            let both: u64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| (a & b).count_ones() as u64).sum();
            let cov = both as f64 / nf - freq[i] * freq[j];
            let v = (cov / (vi * vj).sqrt()).clamp(-1.0, 1.0);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    r
}

/// Drops variables with PIP below `tau`. Returns the reduced trace (sample
/// order and labels preserved) and the retained original column indices.
pub fn screen(trace: &SampleTrace, tau: f64) -> Result<(SampleTrace, Vec<usize>)> {
    if !(0.0..1.0).contains(&tau) {
        return Err(invalid(format!("screening threshold {tau} must lie in [0, 1)")));
    }
    let retained: Vec<usize> = pips(trace)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= tau)
        .map(|(i, _)| i)
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptyRetainedSet { tau });
    }
    Ok((trace.select_columns(&retained)?, retained))
}

/// The highest-posterior-probability credible set: models by decreasing
/// probability (ties lexicographic), shortest prefix with mass ≥ `lambda`.
pub fn hpp_credible_set<'a, I>(model_probabilities: I, lambda: f64) -> Result<Vec<(Model, f64)>>
where
    I: IntoIterator<Item = (&'a Model, &'a f64)>,
{
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(invalid(format!("lambda = {lambda} must lie in (0, 1]")));
    }
    let mut ranked: Vec<(Model, f64)> = model_probabilities
        .into_iter()
        .map(|(m, &p)| (m.clone(), p))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut mass = 0.0;
    for (k, (_, p)) in ranked.iter().enumerate() {
        mass += p;
        if reaches_level(mass, lambda) {
            ranked.truncate(k + 1);
            return Ok(ranked);
        }
    }
    Err(Error::Infeasible { total: mass, lambda })
}

/// Everything the report shows about the raw posterior sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryBundle {
    pub n_samples: usize,
    pub pips: Vec<f64>,
    /// Indices included in the median model.
    pub median_model: Vec<usize>,
    /// Indices included in the most frequent sampled model.
    pub map_model_estimate: Vec<usize>,
    pub map_model_count: u64,
    /// Correlation over the retained columns only (order of `retained`).
    pub inclusion_correlation: Vec<Vec<f64>>,
    pub retained: Vec<usize>,
}

/// PIPs, median/MAP models, screening and correlation of the retained columns.
/// An empty retained set is reported through `retained` being empty.
pub fn summarize(trace: &SampleTrace, tau: f64) -> Result<SummaryBundle> {
    let pips = pips(trace);
    let (map, map_count) = map_model_estimate(trace);
    let (retained, correlation) = match screen(trace, tau) {
        Ok((reduced, retained)) => (retained, inclusion_correlation(&reduced)),
        Err(Error::EmptyRetainedSet { .. }) => (Vec::new(), Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(SummaryBundle {
        n_samples: trace.n_samples(),
        median_model: median_model(&pips).ones().collect(),
        map_model_estimate: map.ones().collect(),
        map_model_count: map_count,
        inclusion_correlation: correlation,
        retained,
        pips,
    })
}
