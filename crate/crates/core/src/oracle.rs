//! Brute-force reference computations for small problems.
//!
//! Everything here enumerates: models (at most [`MAX_MODEL_VARS`] variables)
//! or partitions (at most [`MAX_PARTITION_VARS`]). Larger inputs are refused
//! rather than attempted.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::ops::Add;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::bvs::{Design, LinearModel};
use crate::credible::CartesianCredibleSet;
use crate::error::{invalid, Error, Result};
use crate::factorization::kl_score;
use crate::model::{restrict_unchecked, Model, Partition, SampleTrace, SubModel};
use crate::reaches_level;

pub const MAX_MODEL_VARS: usize = 20;
pub const MAX_PARTITION_VARS: usize = 8;

/// Probability weights usable in an [`ExplicitDistribution`].
pub trait Mass: Clone + Debug + PartialOrd + Zero + Add<Output = Self> + Send + Sync {
    /// Whether a total counts as 1.
    fn is_unit(&self) -> bool;
    fn to_f64(&self) -> f64;
}

impl Mass for f64 {
    fn is_unit(&self) -> bool {
        (self - 1.0).abs() <= 1e-12
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

/// Exact rational masses.
pub type Exact = Ratio<i128>;

impl Mass for Exact {
    fn is_unit(&self) -> bool {
        *self == Ratio::from_integer(1)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// A distribution over models given by its atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitDistribution<W: Mass = f64> {
    atoms: BTreeMap<Model, W>,
    p: usize,
}

impl<W: Mass> ExplicitDistribution<W> {
    pub fn new(atoms: impl IntoIterator<Item = (Model, W)>) -> Result<Self> {
        let mut map: BTreeMap<Model, W> = BTreeMap::new();
        let mut p = None;
        for (m, w) in atoms {
            if *p.get_or_insert(m.len()) != m.len() {
                return Err(invalid("atoms have different model lengths"));
            }
            if !(w >= W::zero()) {
                return Err(invalid(format!("negative mass {w:?} on {m}")));
            }
            let entry = map.entry(m).or_insert_with(W::zero);
            *entry = entry.clone() + w;
        }
        let p = p.ok_or_else(|| invalid("distribution has no atoms"))?;
        let total = map.values().cloned().fold(W::zero(), |a, b| a + b);
        if !total.is_unit() {
            return Err(invalid(format!("masses sum to {total:?}, not 1")));
        }
        Ok(ExplicitDistribution { atoms: map, p })
    }

    pub fn n_vars(&self) -> usize {
        self.p
    }

    pub fn atoms(&self) -> &BTreeMap<Model, W> {
        &self.atoms
    }

    pub fn mass(&self, model: &Model) -> W {
        self.atoms.get(model).cloned().unwrap_or_else(W::zero)
    }

    /// Marginal mass of each sub-model on `block`.
    pub fn block_marginal(&self, block: &[usize]) -> BTreeMap<SubModel, W> {
        let mut out: BTreeMap<SubModel, W> = BTreeMap::new();
        for (m, w) in &self.atoms {
            let entry = out.entry(restrict_unchecked(m, block)).or_insert_with(W::zero);
            *entry = entry.clone() + w.clone();
        }
        out
    }
}

impl ExplicitDistribution<f64> {
    /// Empirical distribution of a trace.
    pub fn from_trace(trace: &SampleTrace) -> Result<Self> {
        let n = trace.n_samples() as f64;
        ExplicitDistribution::new(crate::model::model_frequencies(trace).into_iter().map(|(m, c)| (m, c as f64 / n)))
    }
}

fn check_models_bound(p: usize) -> Result<()> {
    if p > MAX_MODEL_VARS {
        Err(Error::EnumerationBound { p, max: MAX_MODEL_VARS })
    } else {
        Ok(())
    }
}

/// Every model in the Cartesian product set, with screened-out variables at 0.
pub fn enumerate_set(set: &CartesianCredibleSet, p: usize) -> Result<Vec<Model>> {
    check_models_bound(p)?;
    let mut covered: Vec<usize> = set.partition.indices();
    covered.extend(&set.screened_out);
    covered.sort_unstable();
    if covered != (0..p).collect::<Vec<_>>() {
        return Err(invalid(format!("partition and screened variables do not cover 0..{p} exactly")));
    }
    let mut models = vec![Model::zeros(p)];
    for b in &set.blocks {
        let mut next = Vec::with_capacity(models.len() * b.members.len());
        for m in &models {
            for (sub, _) in &b.members {
                let mut extended = m.clone();
                for (pos, &var) in b.block.iter().enumerate() {
                    extended.set(var, sub.get(pos));
                }
                next.push(extended);
            }
        }
        models = next;
    }
    Ok(models)
}

/// `Σ_{γ ∈ S} p(γ)`, summed over the enumerated members of the set.
pub fn exhaustive_set_mass<W: Mass>(dist: &ExplicitDistribution<W>, set: &CartesianCredibleSet) -> Result<W> {
    let models = enumerate_set(set, dist.n_vars())?;
    Ok(models.iter().map(|m| dist.mass(m)).fold(W::zero(), |a, b| a + b))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn log_prior(k: usize, p: usize, pi: f64) -> f64 {
    let on = if k == 0 { 0.0 } else { k as f64 * pi.ln() };
    let off = if k == p { 0.0 } else { (p - k) as f64 * (1.0 - pi).ln() };
    on + off
}

/// Exact `p(γ | y)` over all `2^p` models for fixed `g` and `π`.
pub fn exact_posterior_enumeration(design: &Design, g: f64, pi: f64) -> Result<ExplicitDistribution<f64>> {
    let p = design.p();
    check_models_bound(p)?;
    if !(0.0..=1.0).contains(&pi) {
        return Err(invalid(format!("pi = {pi} must lie in [0, 1]")));
    }
    let lm = LinearModel::new(design)?;
    let logs: Vec<f64> = (0..1u64 << p)
        .into_par_iter()
        .map(|code| {
            let m = Model::from_code(p, code);
            let lp = log_prior(m.count_ones(), p, pi);
            if lp == f64::NEG_INFINITY {
                lp
            } else {
                lm.log_marginal_or_neg_inf(&m, g) + lp
            }
        })
        .collect();
    let z = log_sum_exp(&logs);
    if !z.is_finite() {
        return Err(Error::Singular("no model has positive posterior mass".into()));
    }
    ExplicitDistribution::new(
        logs.iter()
            .enumerate()
            .filter(|(_, l)| **l > f64::NEG_INFINITY)
            .map(|(code, l)| (Model::from_code(p, code as u64), (l - z).exp())),
    )
}

/// Calls `f` on every set partition of `0..n`, as restricted growth strings.
fn for_each_set_partition(n: usize, mut f: impl FnMut(&[usize])) {
    if n == 0 {
        return;
    }
    let mut rgs = vec![0usize; n];
    let mut max = vec![0usize; n];
    loop {
        f(&rgs);
        // advance: rightmost position that can still grow
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            if rgs[i] <= max[i - 1] {
                rgs[i] += 1;
                max[i] = max[i - 1].max(rgs[i]);
                for j in i + 1..n {
                    rgs[j] = 0;
                    max[j] = max[i];
                }
                break;
            }
            i -= 1;
        }
    }
}

/// KL-minimal partition of the trace's variables for each block count.
/// Entry `k - 1` holds the best partition with `k` blocks; ties keep the
/// first partition in restricted-growth-string order.
pub fn exhaustive_partition_scan(trace: &SampleTrace) -> Result<Vec<(Partition, f64)>> {
    let p = trace.n_vars();
    if p > MAX_PARTITION_VARS {
        return Err(Error::EnumerationBound { p, max: MAX_PARTITION_VARS });
    }
    let mut best: Vec<Option<(Partition, f64)>> = vec![None; p];
    let mut err = None;
    for_each_set_partition(p, |rgs| {
        if err.is_some() {
            return;
        }
        let k = rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (var, &b) in rgs.iter().enumerate() {
            blocks[b].push(var);
        }
        let part = match Partition::new(blocks) {
            Ok(part) => part,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        match kl_score(trace, &part) {
            Ok(score) => {
                let slot = &mut best[k - 1];
                if slot.as_ref().is_none_or(|(_, s)| score < *s) {
                    *slot = Some((part, score));
                }
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(best.into_iter().map(|b| b.expect("every block count occurs")).collect())
}

/// `-(1/N) Σ_t Σ_i log q_i(γ_t[B_i])` with `q_i` the empirical block masses,
/// evaluated sample by sample.
pub fn kl_score_literal(trace: &SampleTrace, partition: &Partition) -> Result<f64> {
    if let Some(&bad) = partition.indices().iter().find(|&&i| i >= trace.n_vars()) {
        return Err(invalid(format!("index {bad} out of range")));
    }
    let n = trace.n_samples() as f64;
    let mut total = 0.0;
    for block in partition.blocks() {
        let mut counts: HashMap<SubModel, u64> = HashMap::new();
        for m in trace.models() {
            *counts.entry(restrict_unchecked(m, block)).or_insert(0) += 1;
        }
        for m in trace.models() {
            let q = counts[&restrict_unchecked(m, block)] as f64 / n;
            total -= q.ln() / n;
        }
    }
    Ok(total)
}

/// Source of truth for [`validate_credible_set`].
pub enum MassSource<'a> {
    Explicit(&'a ExplicitDistribution<f64>),
    Trace(&'a SampleTrace),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub mass: f64,
    pub diagnostics: Vec<String>,
}

/// Checks a credible set against its contract: valid covering partition,
/// non-empty blocks, each block holding its modal sub-model, and mass at
/// least `lambda` (summed exhaustively for explicit distributions, as
/// `Π P(S_i)` for traces).
pub fn validate_credible_set(source: MassSource<'_>, set: &CartesianCredibleSet, lambda: f64) -> ValidationReport {
    let mut diagnostics = Vec::new();
    let p = match source {
        MassSource::Explicit(d) => d.n_vars(),
        MassSource::Trace(t) => t.n_vars(),
    };
    if set.blocks.len() != set.partition.n_blocks() {
        diagnostics.push(format!("{} block sets for {} partition blocks", set.blocks.len(), set.partition.n_blocks()));
    }
    for (b, part) in set.blocks.iter().zip(set.partition.blocks()) {
        if &b.block != part {
            diagnostics.push(format!("block {:?} does not match partition block {:?}", b.block, part));
        }
    }
    let mut covered = set.partition.indices();
    covered.extend(&set.screened_out);
    covered.sort_unstable();
    if covered != (0..p).collect::<Vec<_>>() {
        diagnostics.push(format!("partition plus screened variables do not cover 0..{p} exactly"));
    }
    for (i, b) in set.blocks.iter().enumerate() {
        if b.is_empty() {
            diagnostics.push(format!("empty block {i} {:?}", b.block));
        }
    }

    let mut marginals: Vec<BTreeMap<SubModel, f64>> = Vec::new();
    let block_mass = |members: &[(SubModel, u64)], marginal: &BTreeMap<SubModel, f64>| -> f64 {
        members.iter().map(|(s, _)| marginal.get(s).copied().unwrap_or(0.0)).sum()
    };
    if diagnostics.is_empty() {
        for b in &set.blocks {
            let marginal: BTreeMap<SubModel, f64> = match source {
                MassSource::Explicit(d) => d.block_marginal(&b.block),
                MassSource::Trace(t) => {
                    let n = t.n_samples() as f64;
                    let mut c: BTreeMap<SubModel, u64> = BTreeMap::new();
                    for m in t.models() {
                        *c.entry(restrict_unchecked(m, &b.block)).or_insert(0) += 1;
                    }
                    c.into_iter().map(|(s, k)| (s, k as f64 / n)).collect()
                }
            };
            let top = marginal.values().cloned().fold(f64::NEG_INFINITY, f64::max);
            let modal_present = b.members.iter().any(|(s, _)| marginal.get(s).is_some_and(|&m| m == top));
            if !modal_present {
                diagnostics.push(format!("block {:?} does not contain a modal sub-model", b.block));
            }
            marginals.push(marginal);
        }
    }

    let mass = if !diagnostics.is_empty() {
        f64::NAN
    } else {
        match source {
            MassSource::Explicit(d) => match exhaustive_set_mass(d, set) {
                Ok(m) => m,
                Err(e) => {
                    diagnostics.push(e.to_string());
                    f64::NAN
                }
            },
            MassSource::Trace(_) => set.blocks.iter().zip(&marginals).map(|(b, m)| block_mass(&b.members, m)).product(),
        }
    };
    if mass.is_finite() && !reaches_level(mass, lambda) {
        diagnostics.push(format!("mass {mass} is below lambda = {lambda}"));
    }
    ValidationReport {
        passed: diagnostics.is_empty(),
        mass,
        diagnostics,
    }
}
