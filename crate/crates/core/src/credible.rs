//! Cartesian credible sets: per-block sets of sub-models whose product
//! carries at least the requested posterior mass, built by greedily dropping
//! low-mass sub-models, plus the partition-selection criterion.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::factorization::PartitionSequence;
use crate::model::{empirical_block_distribution, BlockDistribution, Partition, SampleTrace, SubModel};
use crate::reaches_log_level;

/// Criterion values closer than this are treated as tied.
const CRITERION_TIE_TOL: f64 = 1e-12;

/// One block's credible set. Members are listed by decreasing mass (ties
/// lexicographic); every mass is `count / n_samples`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCredibleSet {
    pub block: Vec<usize>,
    pub n_samples: u64,
    pub members: Vec<(SubModel, u64)>,
}

impl BlockCredibleSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn retained_count(&self) -> u64 {
        self.members.iter().map(|m| m.1).sum()
    }

    /// Retained mass `P(S_i | Data)`.
    pub fn pi(&self) -> f64 {
        self.retained_count() as f64 / self.n_samples as f64
    }

    /// Mass of the members other than the all-zero sub-model.
    pub fn block_pip(&self) -> f64 {
        let c: u64 = self.members.iter().filter(|(s, _)| !s.is_zero()).map(|m| m.1).sum();
        c as f64 / self.n_samples as f64
    }

    /// Highest-mass member (ties: lexicographically smallest).
    pub fn modal(&self) -> &SubModel {
        &self.members[0].0
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.members[k].1 as f64 / self.n_samples as f64
    }

    pub fn contains(&self, sub: &SubModel) -> bool {
        self.members.iter().any(|(s, _)| s == sub)
    }
}

/// A 100λ% Cartesian credible set over a partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartesianCredibleSet {
    pub lambda: f64,
    pub partition: Partition,
    pub blocks: Vec<BlockCredibleSet>,
    /// `Σ log π_i`.
    pub log_mass: f64,
    /// `Σ log #S_i`.
    pub log_size: f64,
    /// Variables removed by PIP screening before the search; never in a block.
    pub screened_out: Vec<usize>,
}

impl CartesianCredibleSet {
    pub fn mass(&self) -> f64 {
        self.log_mass.exp()
    }

    /// Number of models in the product set.
    pub fn size(&self) -> f64 {
        self.log_size.exp().round()
    }

    /// Re-expresses block indices through `map` (reduced column → original
    /// column) and records the screened-out variables.
    pub fn relabel(mut self, map: &[usize], screened_out: Vec<usize>) -> Result<Self> {
        self.partition = self.partition.relabel(map)?;
        for b in &mut self.blocks {
            b.block = b
                .block
                .iter()
                .map(|&i| map.get(i).copied().ok_or_else(|| invalid("relabel map too short")))
                .collect::<Result<_>>()?;
        }
        // block order follows the relabelled partition
        self.blocks.sort_by_key(|b| b.block.iter().copied().min());
        self.screened_out = screened_out;
        Ok(self)
    }
}

/// One removal performed by the greedy search.
#[derive(Clone, Debug, PartialEq)]
pub struct RemovalStep {
    pub block: usize,
    pub removed: SubModel,
    pub log_mass_after: f64,
    pub log_size_after: f64,
}

/// Removal candidate of one block: its minimum-mass member. Ordered by the
/// criterion `(min / π) · #S` using exact integer cross-multiplication, then
/// by block index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Candidate {
    min_count: u64,
    size: u64,
    retained: u64,
    block: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.min_count as u128 * self.size as u128 * other.retained as u128;
        let rhs = other.min_count as u128 * other.size as u128 * self.retained as u128;
        lhs.cmp(&rhs).then(self.block.cmp(&other.block))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct BlockState {
    /// Members in removal order: ascending count, ties lexicographically
    /// descending, so the surviving members keep the ranking order.
    order: Vec<(SubModel, u64)>,
    next: usize,
    retained: u64,
}

impl BlockState {
    fn size(&self) -> usize {
        self.order.len() - self.next
    }

    fn candidate(&self, block: usize) -> Option<Candidate> {
        (self.size() >= 2).then(|| Candidate {
            min_count: self.order[self.next].1,
            size: self.size() as u64,
            retained: self.retained,
            block,
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("lambda = {lambda} must lie in (0, 1]")))
    }
}

/// Greedy Cartesian credible set for fixed block distributions.
///
/// Every block starts from its observed support. At each step the block with
/// the smallest `(min mass / π_i) · #S_i` (ties: lowest block index) loses its
/// lowest-mass member, unless that would take `Π π_i` below `lambda`, in which
/// case the search stops. Blocks never drop below one member.
pub fn find_block_sets(dists: &[BlockDistribution], lambda: f64) -> Result<CartesianCredibleSet> {
    find_block_sets_traced(dists, lambda).map(|(set, _)| set)
}

/// [`find_block_sets`] together with the removal schedule it followed.
pub fn find_block_sets_traced(
    dists: &[BlockDistribution],
    lambda: f64,
) -> Result<(CartesianCredibleSet, Vec<RemovalStep>)> {
    check_lambda(lambda)?;
    let n = dists.first().ok_or_else(|| invalid("no block distributions"))?.n_samples();
    if dists.iter().any(|d| d.n_samples() != n) {
        return Err(invalid("block distributions must share the same sample count"));
    }
    if dists.iter().any(|d| d.support_len() == 0) {
        return Err(invalid("every block needs a non-empty support"));
    }
    let partition = Partition::new(dists.iter().map(|d| d.block().to_vec()).collect())?;
    let mut dists: Vec<&BlockDistribution> = dists.iter().collect();
    dists.sort_by_key(|d| d.block().iter().copied().min());

    let mut states: Vec<BlockState> = dists
        .iter()
        .map(|d| {
            let mut order = d.entries().to_vec();
            order.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
            BlockState { order, next: 0, retained: n }
        })
        .collect();

    let ln_n = (n as f64).ln();
    let mut block_log_mass = vec![0.0f64; states.len()];
    let mut block_log_size: Vec<f64> = states.iter().map(|s| (s.size() as f64).ln()).collect();
    let mut heap: BinaryHeap<Reverse<Candidate>> =
        states.iter().enumerate().filter_map(|(i, s)| s.candidate(i)).map(Reverse).collect();
    let mut schedule = Vec::new();

    while let Some(&Reverse(cand)) = heap.peek() {
        let i = cand.block;
        let st = &states[i];
        let after = st.retained - st.order[st.next].1;
        let trial = (after as f64).ln() - ln_n;
        let log_mass_after: f64 = block_log_mass
            .iter()
            .enumerate()
            .map(|(k, &v)| if k == i { trial } else { v })
            .sum();
        if !reaches_log_level(log_mass_after, lambda) {
            break;
        }
        heap.pop();
        let st = &mut states[i];
        let removed = st.order[st.next].0.clone();
        st.next += 1;
        st.retained = after;
        block_log_mass[i] = trial;
        block_log_size[i] = (st.size() as f64).ln();
        if let Some(c) = st.candidate(i) {
            heap.push(Reverse(c));
        }
        schedule.push(RemovalStep {
            block: i,
            removed,
            log_mass_after,
            log_size_after: block_log_size.iter().sum(),
        });
    }

    let blocks: Vec<BlockCredibleSet> = states
        .into_iter()
        .zip(&dists)
        .map(|(st, d)| {
            let mut members = st.order[st.next..].to_vec();
            members.reverse();
            BlockCredibleSet {
                block: d.block().to_vec(),
                n_samples: n,
                members,
            }
        })
        .collect();
    let set = CartesianCredibleSet {
        lambda,
        partition,
        blocks,
        log_mass: block_log_mass.iter().sum(),
        log_size: block_log_size.iter().sum(),
        screened_out: Vec::new(),
    };
    Ok((set, schedule))
}

/// Mass of the non-zero sub-models of a block distribution: the posterior
/// probability that at least one variable of the block is included.
pub fn block_pip(dist: &BlockDistribution) -> f64 {
    let c: u64 = dist.entries().iter().filter(|(s, _)| !s.is_zero()).map(|e| e.1).sum();
    c as f64 / dist.n_samples() as f64
}

/// Highest-mass sub-model (ties: lexicographically smallest).
pub fn modal_submodel(dist: &BlockDistribution) -> Result<SubModel> {
    let mut best: Option<&(SubModel, u64)> = None;
    // entries are sorted lexicographically, so strict `>` keeps the smallest tie
    for e in dist.entries() {
        if best.is_none_or(|b| e.1 > b.1) {
            best = Some(e);
        }
    }
    best.map(|e| e.0.clone()).ok_or_else(|| invalid("empty support"))
}

/// `log Γ(k)` for a positive integer `k`.
fn ln_gamma_int(k: usize) -> f64 {
    (2..k).map(|i| (i as f64).ln()).sum()
}

/// Log of the Dirichlet-process exchangeable partition function:
/// `K log M + Σ_k log Γ(#P_k)`.
pub fn eou_penalty(partition: &Partition, m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid(format!("M = {m} must be positive")));
    }
    Ok(partition.n_blocks() as f64 * m.ln() + partition.sizes().into_iter().map(ln_gamma_int).sum::<f64>())
}

/// How the partition penalty enters the selection criterion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignMode {
    /// Minimize `log #S + f(P)`.
    #[default]
    #[serde(rename = "penalty-added")]
    PenaltyAdded,
    /// Minimize `log #S - f(P)`.
    #[serde(rename = "penalty-subtracted", alias = "paper-literal")]
    PenaltySubtracted,
}

impl SignMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SignMode::PenaltyAdded => "penalty-added",
            SignMode::PenaltySubtracted => "penalty-subtracted",
        }
    }

    pub fn combine(self, log_size: f64, penalty: f64) -> f64 {
        match self {
            SignMode::PenaltyAdded => log_size + penalty,
            SignMode::PenaltySubtracted => log_size - penalty,
        }
    }
}

impl fmt::Display for SignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "penalty-added" => Ok(SignMode::PenaltyAdded),
            "penalty-subtracted" | "paper-literal" => Ok(SignMode::PenaltySubtracted),
            other => Err(invalid(format!("unknown sign mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionEntry {
    pub index: usize,
    pub n_blocks: usize,
    pub log_size: f64,
    pub penalty: f64,
    pub value: f64,
    pub chosen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionTrace {
    pub m: f64,
    pub sign_mode: SignMode,
    pub entries: Vec<CriterionEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub chosen: usize,
    pub criterion: CriterionTrace,
    pub set: CartesianCredibleSet,
}

/// Builds the 100λ% set of every partition in `sequence` and returns the one
/// minimizing the ease-of-understanding criterion (ties: finest partition).
pub fn select_partition(
    sequence: &PartitionSequence,
    trace: &SampleTrace,
    lambda: f64,
    m: f64,
    sign_mode: SignMode,
) -> Result<Selection> {
    check_lambda(lambda)?;
    if sequence.is_empty() {
        return Err(invalid("empty partition sequence"));
    }
    let evaluated: Vec<(CartesianCredibleSet, f64)> = sequence
        .partitions
        .par_iter()
        .map(|p| {
            let dists = p
                .blocks()
                .iter()
                .map(|b| empirical_block_distribution(trace, b))
                .collect::<Result<Vec<_>>>()?;
            Ok((find_block_sets(&dists, lambda)?, eou_penalty(p, m)?))
        })
        .collect::<Result<_>>()?;

    let values: Vec<f64> = evaluated.iter().map(|(s, f)| sign_mode.combine(s.log_size, *f)).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let chosen = values.iter().position(|&v| v <= best + CRITERION_TIE_TOL).expect("non-empty");

    let entries = evaluated
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(index, ((set, penalty), &value))| CriterionEntry {
            index,
            n_blocks: set.partition.n_blocks(),
            log_size: set.log_size,
            penalty: *penalty,
            value,
            chosen: index == chosen,
        })
        .collect();
    let set = evaluated.into_iter().nth(chosen).expect("chosen index in range").0;
    Ok(Selection {
        chosen,
        criterion: CriterionTrace { m, sign_mode, entries },
        set,
    })
}
