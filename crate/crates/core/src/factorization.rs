//! Blockwise product approximations of the sampled posterior.
//!
//! With the empirically optimal block parameters, the Monte Carlo estimate of
//! the KL divergence between the sample and a product over blocks equals
//! (up to a constant) the sum of the blocks' empirical entropies. Merging two
//! blocks lowers the score by their empirical mutual information, so the
//! agglomerative search repeatedly joins the pair with the largest mutual
//! information.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{empirical_block_distribution, restrict_unchecked, BlockDistribution, Partition, SampleTrace, SubModel};

/// Gains closer than this to the best are treated as tied.
const GAIN_TIE_TOL: f64 = 1e-12;

/// `-Σ c/n log(c/n)` evaluated as `log n - Σ c log c / n`.
fn entropy_from_counts(counts: impl IntoIterator<Item = u64>, n: u64) -> f64 {
    let nf = n as f64;
    let s: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let c = c as f64;
            c * c.ln()
        })
        .sum();
    nf.ln() - s / nf
}

/// Empirical entropy of a block distribution (nats).
pub fn block_entropy(dist: &BlockDistribution) -> f64 {
    entropy_from_counts(dist.entries().iter().map(|e| e.1), dist.n_samples())
}

/// Monte Carlo KL score of the product approximation over `partition`, up to
/// the additive constant: the sum of empirical block entropies.
pub fn kl_score(trace: &SampleTrace, partition: &Partition) -> Result<f64> {
    partition
        .blocks()
        .iter()
        .map(|b| empirical_block_distribution(trace, b).map(|d| block_entropy(&d)))
        .sum()
}

/// `Σ c_ab/n · log(c_ab·n / (c_a·c_b))`. Exact independence in the counts
/// gives exactly zero.
fn mutual_information_terms(joint: impl IntoIterator<Item = (u64, u64, u64)>, n: u64) -> f64 {
    let nf = n as f64;
    joint
        .into_iter()
        .map(|(cab, ca, cb)| {
            let num = cab as u128 * n as u128;
            let den = ca as u128 * cb as u128;
            if num == den {
                0.0
            } else {
                cab as f64 / nf * ((num as f64).ln() - (den as f64).ln())
            }
        })
        .sum()
}

/// KL reduction from merging two disjoint blocks: their empirical mutual
/// information `H_i + H_j - H_{i∪j}`.
pub fn merge_gain(trace: &SampleTrace, dist_i: &BlockDistribution, dist_j: &BlockDistribution) -> Result<f64> {
    if dist_i.block().iter().any(|i| dist_j.block().contains(i)) {
        return Err(invalid("merge_gain needs disjoint blocks"));
    }
    let n = trace.n_samples() as u64;
    if dist_i.n_samples() != n || dist_j.n_samples() != n {
        return Err(invalid("block distributions were not built from this trace"));
    }
    let mut joint: HashMap<(SubModel, SubModel), u64> = HashMap::new();
    for m in trace.models() {
        let key = (restrict_unchecked(m, dist_i.block()), restrict_unchecked(m, dist_j.block()));
        *joint.entry(key).or_insert(0) += 1;
    }
    let mut cells: Vec<_> = joint.into_iter().collect();
    cells.sort();
    Ok(mutual_information_terms(
        cells
            .into_iter()
            .map(|((a, b), c)| (c, dist_i.count(&a), dist_j.count(&b))),
        n,
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgglomerateConfig {
    /// Stop after this many merges.
    pub max_steps: Option<usize>,
    /// Never form a block larger than this; such pairs are skipped.
    pub max_block_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub gain: f64,
}

/// Partitions `P_0` (all singletons) … `P_K`, each obtained from its
/// predecessor by one merge.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSequence {
    pub partitions: Vec<Partition>,
    /// KL score of each partition, up to the common constant.
    pub kl_scores: Vec<f64>,
    /// `etas[k-1] = kl_scores[k] - kl_scores[k-1]`, never positive beyond rounding.
    pub etas: Vec<f64>,
    pub merges: Vec<MergeStep>,
}

impl PartitionSequence {
    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }
}

/// A block in the agglomerative frontier, with every sample's sub-model
/// replaced by a dense id.
struct Frontier {
    id: usize,
    members: Vec<usize>,
    labels: Vec<u32>,
    counts: Vec<u64>,
    entropy: f64,
}

impl Frontier {
    fn singleton(trace: &SampleTrace, id: usize, column: usize) -> Self {
        let labels: Vec<u32> = trace.models().iter().map(|m| u32::from(m.get(column))).collect();
        let ones = labels.iter().filter(|&&l| l == 1).count() as u64;
        let counts = vec![trace.n_samples() as u64 - ones, ones];
        let entropy = entropy_from_counts(counts.iter().copied(), trace.n_samples() as u64);
        Frontier {
            id,
            members: vec![column],
            labels,
            counts,
            entropy,
        }
    }

    fn joint_key(&self, other: &Frontier, k: usize) -> u64 {
        self.labels[k] as u64 * other.counts.len() as u64 + other.labels[k] as u64
    }

    /// Joint counts as sorted `(key, count)` pairs.
    fn joint_counts(&self, other: &Frontier) -> Vec<(u64, u64)> {
        let n = self.labels.len();
        let cells = self.counts.len() * other.counts.len();
        if cells <= (4 * n).max(1 << 16) {
            let mut dense = vec![0u64; cells];
            for k in 0..n {
                dense[self.joint_key(other, k) as usize] += 1;
            }
            dense
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c > 0)
                .map(|(key, c)| (key as u64, c))
                .collect()
        } else {
            let mut sparse: HashMap<u64, u64> = HashMap::new();
            for k in 0..n {
                *sparse.entry(self.joint_key(other, k)).or_insert(0) += 1;
            }
            let mut v: Vec<_> = sparse.into_iter().collect();
            v.sort_unstable();
            v
        }
    }

    fn mutual_information(&self, other: &Frontier) -> f64 {
        let nb = other.counts.len() as u64;
        let n = self.labels.len() as u64;
        mutual_information_terms(
            self.joint_counts(other).into_iter().map(|(key, c)| {
                (c, self.counts[(key / nb) as usize], other.counts[(key % nb) as usize])
            }),
            n,
        )
    }

    fn merge(&self, other: &Frontier, id: usize) -> Frontier {
        let n = self.labels.len();
        let mut remap: HashMap<u64, u32> = HashMap::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut labels = Vec::with_capacity(n);
        for k in 0..n {
            let key = self.joint_key(other, k);
            let next = counts.len() as u32;
            let l = *remap.entry(key).or_insert(next);
            if l == next {
                counts.push(0);
            }
            counts[l as usize] += 1;
            labels.push(l);
        }
        let mut members = self.members.clone();
        members.extend_from_slice(&other.members);
        members.sort_unstable();
        let entropy = entropy_from_counts(counts.iter().copied(), n as u64);
        Frontier {
            id,
            members,
            labels,
            counts,
            entropy,
        }
    }
}

fn frontier_partition(blocks: &[Frontier]) -> Partition {
    Partition::new(blocks.iter().map(|b| b.members.clone()).collect()).expect("frontier blocks are disjoint")
}

fn frontier_score(blocks: &[Frontier]) -> f64 {
    blocks.iter().map(|b| b.entropy).sum()
}

/// Greedy agglomerative search over the columns of `trace`: start from all
/// singletons and repeatedly merge the pair of blocks with the largest KL
/// reduction (ties: smallest block positions), until one block remains or a
/// cap in `config` stops it.
pub fn agglomerate(trace: &SampleTrace, config: &AgglomerateConfig) -> Result<PartitionSequence> {
    let p = trace.n_vars();
    if p == 0 {
        return Err(invalid("cannot agglomerate a trace without variables"));
    }
    let mut blocks: Vec<Frontier> = (0..p)
        .into_par_iter()
        .map(|i| Frontier::singleton(trace, i, i))
        .collect();
    let mut next_id = p;

    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    let mut gains: HashMap<(usize, usize), f64> = pairs
        .par_iter()
        .map(|&(i, j)| ((i, j), blocks[i].mutual_information(&blocks[j])))
        .collect();
    let gain_of = |gains: &HashMap<(usize, usize), f64>, a: usize, b: usize| gains[&(a.min(b), a.max(b))];

    let mut seq = PartitionSequence {
        partitions: vec![frontier_partition(&blocks)],
        kl_scores: vec![frontier_score(&blocks)],
        etas: Vec::new(),
        merges: Vec::new(),
    };

    let size_ok = |a: &Frontier, b: &Frontier| {
        config
            .max_block_size
            .is_none_or(|cap| a.members.len() + b.members.len() <= cap)
    };

    while blocks.len() > 1 && config.max_steps.is_none_or(|cap| seq.merges.len() < cap) {
        let mut best = f64::NEG_INFINITY;
        for a in 0..blocks.len() {
            for b in (a + 1)..blocks.len() {
                if size_ok(&blocks[a], &blocks[b]) {
                    best = best.max(gain_of(&gains, blocks[a].id, blocks[b].id));
                }
            }
        }
        if best == f64::NEG_INFINITY {
            break;
        }
        let (a, b) = (0..blocks.len())
            .flat_map(|a| ((a + 1)..blocks.len()).map(move |b| (a, b)))
            .find(|&(a, b)| {
                size_ok(&blocks[a], &blocks[b]) && gain_of(&gains, blocks[a].id, blocks[b].id) >= best - GAIN_TIE_TOL
            })
            .expect("the best pair exists");

        let gain = gain_of(&gains, blocks[a].id, blocks[b].id);
        let merged = blocks[a].merge(&blocks[b], next_id);
        next_id += 1;
        let step = MergeStep {
            left: blocks[a].members.clone(),
            right: blocks[b].members.clone(),
            gain,
        };
        let (old_a, old_b) = (blocks[a].id, blocks[b].id);
        gains.retain(|&(i, j), _| i != old_a && i != old_b && j != old_a && j != old_b);
        blocks.remove(b);
        blocks[a] = merged;

        let fresh: Vec<((usize, usize), f64)> = blocks
            .par_iter()
            .enumerate()
            .filter(|(k, _)| *k != a)
            .map(|(_, other)| {
                let key = (other.id.min(blocks[a].id), other.id.max(blocks[a].id));
                (key, blocks[a].mutual_information(other))
            })
            .collect();
        gains.extend(fresh);

        let score = frontier_score(&blocks);
        seq.etas.push(score - seq.kl_scores.last().copied().unwrap_or(0.0));
        seq.kl_scores.push(score);
        seq.partitions.push(frontier_partition(&blocks));
        seq.merges.push(step);
    }
    Ok(seq)
}
