//! Model space primitives: packed inclusion vectors, sample traces,
//! partitions of the variable indices and empirical block distributions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

const WORD: usize = 64;

/// A binary inclusion vector over `len` variables, packed LSB-first into
/// 64-bit words. Ordering is lexicographic over the bits in index order,
/// so `(0,1) < (1,0)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Model {
    len: usize,
    words: Vec<u64>,
}

/// A model restricted to one block of a partition. Bit `k` corresponds to the
/// `k`-th (ascending) index of the block.
pub type SubModel = Model;

impl Model {
    pub fn zeros(len: usize) -> Self {
        Model {
            len,
            words: vec![0; len.div_ceil(WORD)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut m = Model::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                m.set(i, true);
            }
        }
        m
    }

    /// Builds a model from 0/1 digits. Any nonzero value counts as included.
    pub fn from_digits(digits: &[u8]) -> Self {
        let mut m = Model::zeros(digits.len());
        for (i, &d) in digits.iter().enumerate() {
            if d != 0 {
                m.set(i, true);
            }
        }
        m
    }

    /// Model of length `len` including exactly the listed indices.
    pub fn from_indices(len: usize, included: &[usize]) -> Result<Self> {
        let mut m = Model::zeros(len);
        for &i in included {
            if i >= len {
                return Err(invalid(format!("index {i} out of range for length {len}")));
            }
            m.set(i, true);
        }
        Ok(m)
    }

    /// The `len` low bits of `code`; bit `i` of the code is variable `i`.
    pub fn from_code(len: usize, code: u64) -> Self {
        assert!(len <= WORD, "from_code supports at most 64 variables");
        let mut m = Model::zeros(len);
        if len > 0 {
            let mask = if len == WORD { u64::MAX } else { (1u64 << len) - 1 };
            m.words[0] = code & mask;
        }
        m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let v = self.get(i);
        self.set(i, !v);
    }

    /// Number of included variables.
    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    pub fn zeros_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| !self.get(i))
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_digits(&self) -> Vec<u8> {
        self.bits().map(u8::from).collect()
    }

    /// Packed words, LSB-first. Bits beyond `len` are always zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Bit pattern as a `0101` string in index order.
    pub fn to_bit_string(&self) -> String {
        self.bits().map(|b| if b { '1' } else { '0' }).collect()
    }
}

impl Ord for Model {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.words.iter().zip(&other.words) {
            let diff = a ^ b;
            if diff != 0 {
                let t = diff.trailing_zeros();
                return if (a >> t) & 1 == 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for Model {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Model({})", self.to_bit_string())
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

impl Serialize for Model {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_bit_string())
    }
}

impl<'de> Deserialize<'de> for Model {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    /// Parses a `0101` bit string.
    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .bytes()
            .map(|b| match b {
                b'0' => Ok(0),
                b'1' => Ok(1),
                _ => Err(invalid(format!("non-binary character in bit string {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Model::from_digits(&digits))
    }
}

/// N sampled models over p labelled variables: the empirical posterior.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleTrace {
    models: Vec<Model>,
    labels: Vec<String>,
}

impl SampleTrace {
    pub fn new(labels: Vec<String>, models: Vec<Model>) -> Result<Self> {
        if models.is_empty() {
            return Err(invalid("a trace needs at least one sample"));
        }
        let p = labels.len();
        if let Some((k, m)) = models.iter().enumerate().find(|(_, m)| m.len() != p) {
            return Err(invalid(format!(
                "sample {k} has {} variables, expected {p}",
                m.len()
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(invalid(format!("duplicate variable label {l:?}")));
            }
        }
        Ok(SampleTrace { models, labels })
    }

    /// Trace with default labels `x1..xp`.
    pub fn from_models(models: Vec<Model>) -> Result<Self> {
        let p = models.first().map_or(0, Model::len);
        SampleTrace::new(default_labels(p), models)
    }

    pub fn n_samples(&self) -> usize {
        self.models.len()
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Keeps only the listed columns (in the given order).
    pub fn select_columns(&self, columns: &[usize]) -> Result<SampleTrace> {
        let p = self.n_vars();
        if let Some(&bad) = columns.iter().find(|&&c| c >= p) {
            return Err(invalid(format!("column {bad} out of range for p = {p}")));
        }
        let models = self.models.iter().map(|m| restrict_unchecked(m, columns)).collect();
        let labels = columns.iter().map(|&c| self.labels[c].clone()).collect();
        SampleTrace::new(labels, models)
    }

    /// Concatenates traces over the same variables.
    pub fn concat(traces: Vec<SampleTrace>) -> Result<SampleTrace> {
        let mut iter = traces.into_iter();
        let mut first = iter.next().ok_or_else(|| invalid("no traces to concatenate"))?;
        for t in iter {
            if t.labels != first.labels {
                return Err(invalid("cannot concatenate traces with different labels"));
            }
            first.models.extend(t.models);
        }
        Ok(first)
    }
}

pub fn default_labels(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

/// Disjoint non-empty blocks of variable indices. Blocks are kept sorted
/// internally and ordered by their smallest member.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut blocks = blocks;
        let mut seen = HashSet::new();
        for b in &mut blocks {
            if b.is_empty() {
                return Err(invalid("partition blocks must be non-empty"));
            }
            b.sort_unstable();
            for &i in b.iter() {
                if !seen.insert(i) {
                    return Err(invalid(format!("index {i} appears in more than one block")));
                }
            }
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }

    pub fn singletons(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut blocks: Vec<Vec<usize>> = indices.into_iter().map(|i| vec![i]).collect();
        blocks.sort_by_key(|b| b[0]);
        Partition { blocks }
    }

    pub fn single_block(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        Partition::new(vec![indices.into_iter().collect()])
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// All indices, ascending.
    pub fn indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// True when the union of blocks equals `indices` exactly.
    pub fn covers(&self, indices: &[usize]) -> bool {
        let mut want = indices.to_vec();
        want.sort_unstable();
        want.dedup();
        want == self.indices()
    }

    /// Maps every index through `map` (e.g. reduced → original column).
    pub fn relabel(&self, map: &[usize]) -> Result<Partition> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|&i| {
                        map.get(i)
                            .copied()
                            .ok_or_else(|| invalid(format!("index {i} has no relabelling")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(blocks)
    }
}

impl TryFrom<Vec<Vec<usize>>> for Partition {
    type Error = Error;

    fn try_from(blocks: Vec<Vec<usize>>) -> Result<Self> {
        Partition::new(blocks)
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.blocks
    }
}

/// Restricts `model` to `block`: output bit `k` is model bit `block[k]`.
pub fn restrict(model: &Model, block: &[usize]) -> Result<SubModel> {
    if let Some(&bad) = block.iter().find(|&&i| i >= model.len()) {
        return Err(invalid(format!(
            "block index {bad} out of range for a model of length {}",
            model.len()
        )));
    }
    Ok(restrict_unchecked(model, block))
}

pub(crate) fn restrict_unchecked(model: &Model, block: &[usize]) -> SubModel {
    let mut sub = Model::zeros(block.len());
    for (k, &i) in block.iter().enumerate() {
        if model.get(i) {
            sub.set(k, true);
        }
    }
    sub
}

/// Empirical distribution of the sub-models of one block. Masses are kept as
/// integer counts over `n` samples, so every mass is exactly `count / n`.
/// Entries are sorted by sub-model; unobserved sub-models are absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockDistribution {
    block: Vec<usize>,
    n: u64,
    entries: Vec<(SubModel, u64)>,
}

impl BlockDistribution {
    /// Builds a distribution from explicit counts. Counts must be positive and
    /// sum to `n`; sub-models must be distinct and match the block size.
    pub fn from_counts(block: Vec<usize>, n: u64, counts: Vec<(SubModel, u64)>) -> Result<Self> {
        if block.is_empty() {
            return Err(invalid("empty block"));
        }
        let mut entries = counts;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut total = 0u64;
        for (i, (sub, c)) in entries.iter().enumerate() {
            if sub.len() != block.len() {
                return Err(invalid("sub-model length differs from block size"));
            }
            if *c == 0 {
                return Err(invalid("zero counts must be omitted from the support"));
            }
            if i > 0 && entries[i - 1].0 == *sub {
                return Err(invalid(format!("duplicate sub-model {sub}")));
            }
            total += c;
        }
        if total != n {
            return Err(invalid(format!("counts sum to {total}, expected {n}")));
        }
        Ok(BlockDistribution { block, n, entries })
    }

    pub fn block(&self) -> &[usize] {
        &self.block
    }

    /// Number of samples the counts are taken over.
    pub fn n_samples(&self) -> u64 {
        self.n
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// `(sub-model, count)` pairs sorted by sub-model.
    pub fn entries(&self) -> &[(SubModel, u64)] {
        &self.entries
    }

    pub fn count(&self, sub: &SubModel) -> u64 {
        self.entries
            .binary_search_by(|(s, _)| s.cmp(sub))
            .map_or(0, |k| self.entries[k].1)
    }

    pub fn mass(&self, sub: &SubModel) -> f64 {
        self.count(sub) as f64 / self.n as f64
    }

    pub fn masses(&self) -> impl Iterator<Item = (&SubModel, f64)> + '_ {
        let n = self.n as f64;
        self.entries.iter().map(move |(s, c)| (s, *c as f64 / n))
    }
}

/// Empirical distribution of the restrictions of every sample to `block`.
pub fn empirical_block_distribution(trace: &SampleTrace, block: &[usize]) -> Result<BlockDistribution> {
    if block.is_empty() {
        return Err(invalid("empty block"));
    }
    let p = trace.n_vars();
    if let Some(&bad) = block.iter().find(|&&i| i >= p) {
        return Err(invalid(format!("block index {bad} out of range for p = {p}")));
    }
    let mut counts: HashMap<SubModel, u64> = HashMap::new();
    for m in trace.models() {
        *counts.entry(restrict_unchecked(m, block)).or_insert(0) += 1;
    }
    let mut entries: Vec<(SubModel, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(BlockDistribution {
        block: block.to_vec(),
        n: trace.n_samples() as u64,
        entries,
    })
}

/// Frequency of every distinct sampled model.
pub fn model_frequencies(trace: &SampleTrace) -> BTreeMap<Model, u64> {
    let mut freq = BTreeMap::new();
    for m in trace.models() {
        *freq.entry(m.clone()).or_insert(0) += 1;
    }
    freq
}

/// `Σ log #S_i` for block credible sets of the given sizes (nats).
pub fn log_cardinality(sizes: &[usize]) -> Result<f64> {
    if sizes.contains(&0) {
        return Err(invalid("block credible sets must be non-empty"));
    }
    Ok(sizes.iter().map(|&s| (s as f64).ln()).sum())
}
