//! Predictors: anything that turns a token history into a [`Distribution`].
//!
//! Encoder and decoder drive a predictor through the same sequence of
//! `next_distribution` / `update` calls, so a predictor must be a
//! deterministic function of the history it has seen.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::bits::write_varint;
use crate::coder::{CoderError, Distribution, TOTAL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("probability {index} is negative or not finite ({value})")]
    BadProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, outside 1 +/- 1e-4")]
    BadSum(f64),
    #[error("expected {expected} probabilities, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("alphabet of {0} symbols cannot be coded at a total of 65536")]
    AlphabetTooLarge(usize),
    #[error("invalid context model configuration: {0}")]
    Config(&'static str),
    #[error("token {token} outside alphabet of {alphabet}")]
    TokenOutOfRange { token: u32, alphabet: usize },
    #[error("predictor transport failed: {0}")]
    Transport(alloc::string::String),
    #[error(transparent)]
    Coder(#[from] CoderError),
}

/// Source of per-step next-token distributions.
pub trait Predictor {
    fn alphabet_size(&self) -> usize;

    /// Distribution of the token following `context` (the full history so far).
    fn next_distribution(&mut self, context: &[u32]) -> Result<Distribution, PredictError>;

    /// Records that `observed` followed `context`.
    fn update(&mut self, context: &[u32], observed: u32) -> Result<(), PredictError>;

    /// Bytes charged to the model when computing the adjusted rate.
    fn model_size_bytes(&self) -> u64;
}

impl<P: Predictor + ?Sized> Predictor for &mut P {
    fn alphabet_size(&self) -> usize {
        (**self).alphabet_size()
    }

    fn next_distribution(&mut self, context: &[u32]) -> Result<Distribution, PredictError> {
        (**self).next_distribution(context)
    }

    fn update(&mut self, context: &[u32], observed: u32) -> Result<(), PredictError> {
        (**self).update(context, observed)
    }

    fn model_size_bytes(&self) -> u64 {
        (**self).model_size_bytes()
    }
}

/// Quantizes a probability vector to a [`Distribution`].
///
/// Every symbol first receives one unit; the remaining `TOTAL - n` units are
/// split in proportion to `p` by largest-remainder rounding, ties going to the
/// lower index.
pub fn quantize_probabilities(p: &[f64]) -> Result<Distribution, PredictError> {
    let n = p.len();
    if n == 0 {
        return Err(PredictError::WrongLength { expected: 1, got: 0 });
    }
    if n > TOTAL as usize {
        return Err(PredictError::AlphabetTooLarge(n));
    }
    let mut sum = 0.0;
    for (index, &value) in p.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(PredictError::BadProbability { index, value });
        }
        sum += value;
    }
    if !(1.0 - 1e-4..=1.0 + 1e-4).contains(&sum) {
        return Err(PredictError::BadSum(sum));
    }
    Ok(largest_remainder(p, sum))
}

fn largest_remainder(p: &[f64], sum: f64) -> Distribution {
    let n = p.len();
    let spare = (TOTAL as usize - n) as f64;
    let mut freqs = vec![0u32; n];
    let mut rems = vec![0f64; n];
    let mut assigned: i64 = 0;
    for i in 0..n {
        let share = p[i] / sum * spare;
        let base = libm::floor(share);
        freqs[i] = base as u32;
        rems[i] = share - base;
        assigned += base as i64;
    }
    let mut leftover = TOTAL as i64 - n as i64 - assigned;
    let by_rank = |a: &usize, b: &usize| -> Ordering {
        rems[*b]
            .partial_cmp(&rems[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    if leftover > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        let m = leftover as usize;
        if m < n {
            order.select_nth_unstable_by(m - 1, by_rank);
        }
        for &i in &order[..m.min(n)] {
            freqs[i] += 1;
        }
        leftover -= m.min(n) as i64;
        debug_assert_eq!(leftover, 0);
    } else if leftover < 0 {
        // Float rounding pushed the floors past the budget: take units back
        // from the smallest remainders.
        let mut order: Vec<usize> = (0..n).filter(|&i| freqs[i] > 0).collect();
        order.sort_unstable_by(|a, b| by_rank(b, a));
        for &i in order.iter().take((-leftover) as usize) {
            freqs[i] -= 1;
        }
    }
    let mut cum = Vec::with_capacity(n + 1);
    let mut acc = 0u32;
    cum.push(0);
    for f in freqs {
        acc += f + 1;
        cum.push(acc);
    }
    Distribution::from_cumulative(cum).expect("largest remainder keeps the total exact")
}

/// How the escape weight of a context is derived from its statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlendRule {
    /// Escape count equals the number of distinct successors (PPM method C).
    EscapeDistinct,
    /// Escape count fixed at one (PPM method A).
    EscapeOne,
}

impl BlendRule {
    pub fn id(self) -> u8 {
        match self {
            BlendRule::EscapeDistinct => 0,
            BlendRule::EscapeOne => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(BlendRule::EscapeDistinct),
            1 => Some(BlendRule::EscapeOne),
            _ => None,
        }
    }
}

pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContextModelConfig {
    /// Longest context, in tokens.
    pub order: usize,
    /// Hash slots per context order; a power of two.
    pub capacity: usize,
    pub blend: BlendRule,
    pub alphabet_size: usize,
}

impl ContextModelConfig {
    pub fn new(order: usize, alphabet_size: usize) -> Self {
        Self {
            order,
            capacity: 1 << 18,
            blend: BlendRule::EscapeDistinct,
            alphabet_size,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn with_blend(mut self, blend: BlendRule) -> Self {
        self.blend = blend;
        self
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        if self.order > MAX_ORDER {
            return Err(PredictError::Config("order must be at most 12"));
        }
        if !self.capacity.is_power_of_two() {
            return Err(PredictError::Config("capacity must be a power of two"));
        }
        if self.alphabet_size == 0 {
            return Err(PredictError::Config("alphabet must be non-empty"));
        }
        if self.alphabet_size > TOTAL as usize {
            return Err(PredictError::AlphabetTooLarge(self.alphabet_size));
        }
        Ok(())
    }
}

const PROBE_LIMIT: usize = 16;
const RESCALE_AT: u32 = 1 << 16;

#[derive(Debug, Clone, Default)]
struct Successors {
    total: u32,
    // Sorted by token so iteration order is stable.
    counts: Vec<(u32, u32)>,
}

impl Successors {
    fn add(&mut self, token: u32) {
        match self.counts.binary_search_by_key(&token, |&(t, _)| t) {
            Ok(i) => self.counts[i].1 += 1,
            Err(i) => self.counts.insert(i, (token, 1)),
        }
        self.total += 1;
        if self.total >= RESCALE_AT {
            self.total = 0;
            for (_, c) in &mut self.counts {
                *c = (*c).div_ceil(2);
                self.total += *c;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct ContextTable {
    keys: Vec<u64>,
    stats: Vec<Successors>,
    mask: usize,
}

impl ContextTable {
    fn new(capacity: usize) -> Self {
        Self {
            keys: vec![0; capacity],
            stats: vec![Successors::default(); capacity],
            mask: capacity - 1,
        }
    }

    fn find(&self, key: u64) -> Option<usize> {
        let start = key as usize & self.mask;
        for i in 0..PROBE_LIMIT.min(self.keys.len()) {
            let slot = (start + i) & self.mask;
            if self.keys[slot] == key {
                return Some(slot);
            }
            if self.keys[slot] == 0 {
                return None;
            }
        }
        None
    }

    fn find_or_insert(&mut self, key: u64) -> Option<usize> {
        let start = key as usize & self.mask;
        for i in 0..PROBE_LIMIT.min(self.keys.len()) {
            let slot = (start + i) & self.mask;
            if self.keys[slot] == key {
                return Some(slot);
            }
            if self.keys[slot] == 0 {
                self.keys[slot] = key;
                return Some(slot);
            }
        }
        // Neighbourhood full: the context goes unrecorded.
        None
    }
}

fn context_key(order: usize, context: &[u32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ order as u64;
    for &t in &context[context.len() - order..] {
        for b in t.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    // Final avalanche so the low bits used for indexing are well mixed.
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    if h == 0 {
        1
    } else {
        h
    }
}

/// Adaptive order-k context model with PPM-style escape blending.
///
/// The distribution for a context starts from uniform and is refined from
/// order 0 up to the longest context that has statistics:
/// `P_o(s) = c_o(s) / (n_o + e_o) + e_o / (n_o + e_o) * P_{o-1}(s)`, with
/// `n_o` the context's total count and `e_o` its escape count.
#[derive(Debug, Clone)]
pub struct ContextModel {
    config: ContextModelConfig,
    order0: Successors,
    tables: Vec<ContextTable>,
    scratch: Vec<f64>,
}

impl ContextModel {
    pub fn new(config: ContextModelConfig) -> Result<Self, PredictError> {
        config.validate()?;
        let tables = (1..=config.order)
            .map(|_| ContextTable::new(config.capacity))
            .collect();
        Ok(Self {
            config,
            order0: Successors::default(),
            tables,
            scratch: vec![0.0; config.alphabet_size],
        })
    }

    pub fn config(&self) -> &ContextModelConfig {
        &self.config
    }

    fn escape(&self, stats: &Successors) -> f64 {
        match self.config.blend {
            BlendRule::EscapeDistinct => stats.counts.len() as f64,
            BlendRule::EscapeOne => 1.0,
        }
    }

    fn blend(probs: &mut [f64], stats: &Successors, escape: f64) {
        if stats.total == 0 {
            return;
        }
        let denom = stats.total as f64 + escape;
        let keep = escape / denom;
        for p in probs.iter_mut() {
            *p *= keep;
        }
        for &(t, c) in &stats.counts {
            probs[t as usize] += c as f64 / denom;
        }
    }

    /// Blended real-valued probabilities for the next token.
    pub fn probabilities(&mut self, context: &[u32]) -> &[f64] {
        let n = self.config.alphabet_size;
        let mut probs = core::mem::take(&mut self.scratch);
        probs.clear();
        probs.resize(n, 1.0 / n as f64);
        Self::blend(&mut probs, &self.order0, self.escape(&self.order0));
        let max_order = self.config.order.min(context.len());
        for order in 1..=max_order {
            let table = &self.tables[order - 1];
            if let Some(slot) = table.find(context_key(order, context)) {
                let stats = &table.stats[slot];
                Self::blend(&mut probs, stats, self.escape(stats));
            }
        }
        self.scratch = probs;
        &self.scratch
    }

    /// Serialized statistics: per order, each occupied slot's key and
    /// successor counts as varints.
    pub fn serialize_tables(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_varint(&mut out, self.config.order as u64);
        write_successors(&mut out, &self.order0);
        for table in &self.tables {
            let used = table.keys.iter().filter(|&&k| k != 0).count();
            write_varint(&mut out, used as u64);
            for (slot, &key) in table.keys.iter().enumerate() {
                if key != 0 {
                    out.extend_from_slice(&key.to_le_bytes());
                    write_successors(&mut out, &table.stats[slot]);
                }
            }
        }
        out
    }
}

fn write_successors(out: &mut Vec<u8>, stats: &Successors) {
    write_varint(out, stats.counts.len() as u64);
    let mut prev = 0u32;
    for &(t, c) in &stats.counts {
        write_varint(out, (t - prev) as u64);
        write_varint(out, c as u64);
        prev = t;
    }
}

impl Predictor for ContextModel {
    fn alphabet_size(&self) -> usize {
        self.config.alphabet_size
    }

    fn next_distribution(&mut self, context: &[u32]) -> Result<Distribution, PredictError> {
        self.probabilities(context);
        Ok(largest_remainder(&self.scratch, self.scratch.iter().sum()))
    }

    fn update(&mut self, context: &[u32], observed: u32) -> Result<(), PredictError> {
        if observed as usize >= self.config.alphabet_size {
            return Err(PredictError::TokenOutOfRange {
                token: observed,
                alphabet: self.config.alphabet_size,
            });
        }
        self.order0.add(observed);
        let max_order = self.config.order.min(context.len());
        for order in 1..=max_order {
            let key = context_key(order, context);
            let table = &mut self.tables[order - 1];
            if let Some(slot) = table.find_or_insert(key) {
                table.stats[slot].add(observed);
            }
        }
        Ok(())
    }

    fn model_size_bytes(&self) -> u64 {
        self.serialize_tables().len() as u64
    }
}
