//! Canonical Huffman codes over sparse `u32` symbol sets.
//!
//! A code is fully determined by its `(symbol, length)` pairs: codewords are
//! assigned in order of increasing length, then increasing symbol id. This is
//! what the model files store.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use thiserror::Error;

use crate::bits::{BitError, BitReader, BitWriter};

/// Longest codeword the builder will produce.
pub const MAX_CODE_LEN: u8 = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HuffmanError {
    #[error("code lengths violate the Kraft inequality")]
    Oversubscribed,
    #[error("code length {0} exceeds the supported maximum")]
    TooLong(u8),
    #[error("duplicate or unsorted symbol in code table")]
    UnsortedSymbols,
    #[error("empty code table")]
    Empty,
    #[error("bit pattern matches no codeword")]
    NoMatch,
    #[error(transparent)]
    Bits(#[from] BitError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalCode {
    // (symbol, codeword, length), sorted by symbol.
    table: Vec<(u32, u64, u8)>,
    // Symbols in canonical order.
    canonical: Vec<u32>,
    // Per length: number of codewords, first codeword, index of first symbol.
    counts: Vec<u32>,
    first_code: Vec<u64>,
    first_index: Vec<u32>,
}

/// Huffman code lengths for `weights` (pairs of distinct symbol and weight),
/// returned sorted by symbol. Ties are broken by symbol order, so the result
/// is deterministic.
pub fn code_lengths(weights: &[(u32, u64)]) -> Vec<(u32, u8)> {
    let mut items: Vec<(u32, u64)> = weights.to_vec();
    items.sort_unstable_by_key(|&(s, _)| s);
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![(items[0].0, 0)];
    }
    let mut scale = 0u32;
    loop {
        let lengths = build_lengths(&items, scale);
        if lengths.iter().all(|&l| l <= MAX_CODE_LEN) {
            return items.iter().map(|&(s, _)| s).zip(lengths).collect();
        }
        scale += 1;
    }
}

fn build_lengths(items: &[(u32, u64)], scale: u32) -> Vec<u8> {
    let n = items.len();
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = items
        .iter()
        .enumerate()
        .map(|(i, &(_, w))| Reverse((((w >> scale).max(1)), i)))
        .collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().unwrap();
        let Reverse((wb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((wa + wb, next)));
        next += 1;
    }
    // Parents always have larger indices, so one backward pass fixes depths.
    let mut depth = vec![0u32; 2 * n - 1];
    for node in (0..2 * n - 2).rev() {
        depth[node] = depth[parent[node]] + 1;
    }
    depth[..n].iter().map(|&d| d.min(255) as u8).collect()
}

impl CanonicalCode {
    pub fn from_weights(weights: &[(u32, u64)]) -> Result<Self, HuffmanError> {
        Self::from_lengths(&code_lengths(weights))
    }

    /// Builds the canonical code for `(symbol, length)` pairs sorted by symbol.
    pub fn from_lengths(lengths: &[(u32, u8)]) -> Result<Self, HuffmanError> {
        if lengths.is_empty() {
            return Err(HuffmanError::Empty);
        }
        if lengths.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(HuffmanError::UnsortedSymbols);
        }
        if lengths.len() == 1 {
            if lengths[0].1 != 0 {
                return Err(HuffmanError::TooLong(lengths[0].1));
            }
        } else if let Some(&(_, l)) = lengths.iter().find(|&&(_, l)| l == 0 || l > MAX_CODE_LEN) {
            return Err(HuffmanError::TooLong(l));
        }
        let max_len = lengths.iter().map(|&(_, l)| l).max().unwrap() as usize;
        let mut counts = vec![0u32; max_len + 1];
        for &(_, l) in lengths {
            counts[l as usize] += 1;
        }
        // Kraft: sum of 2^(max_len - l) must not exceed 2^max_len.
        let mut kraft: u128 = 0;
        for (l, &c) in counts.iter().enumerate().skip(1) {
            kraft += (c as u128) << (max_len - l);
        }
        if max_len > 0 && kraft > 1u128 << max_len {
            return Err(HuffmanError::Oversubscribed);
        }

        let mut canonical: Vec<(u8, u32)> = lengths.iter().map(|&(s, l)| (l, s)).collect();
        canonical.sort_unstable();
        let mut first_code = vec![0u64; max_len + 1];
        let mut first_index = vec![0u32; max_len + 1];
        let mut code = 0u64;
        let mut index = counts[0];
        for l in 1..=max_len {
            code = (code + if l > 1 { counts[l - 1] as u64 } else { 0 }) << 1;
            first_code[l] = code;
            first_index[l] = index;
            index += counts[l];
        }
        let mut table = Vec::with_capacity(lengths.len());
        let mut next = first_code.clone();
        for &(l, s) in &canonical {
            table.push((s, next[l as usize], l));
            next[l as usize] += 1;
        }
        table.sort_unstable_by_key(|&(s, _, _)| s);
        Ok(Self {
            table,
            canonical: canonical.into_iter().map(|(_, s)| s).collect(),
            counts,
            first_code,
            first_index,
        })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// `(symbol, length)` pairs sorted by symbol.
    pub fn lengths(&self) -> impl Iterator<Item = (u32, u8)> + '_ {
        self.table.iter().map(|&(s, _, l)| (s, l))
    }

    /// `(symbol, codeword, length)` triples sorted by symbol.
    pub fn codewords(&self) -> &[(u32, u64, u8)] {
        &self.table
    }

    pub fn codeword(&self, symbol: u32) -> Option<(u64, u8)> {
        self.table
            .binary_search_by_key(&symbol, |&(s, _, _)| s)
            .ok()
            .map(|i| (self.table[i].1, self.table[i].2))
    }

    pub fn contains(&self, symbol: u32) -> bool {
        self.codeword(symbol).is_some()
    }

    /// Writes the codeword for `symbol`; returns false if it has none.
    pub fn encode(&self, symbol: u32, out: &mut BitWriter) -> bool {
        match self.codeword(symbol) {
            Some((code, len)) => {
                out.push_bits(code, len as u32);
                true
            }
            None => false,
        }
    }

    pub fn decode(&self, input: &mut BitReader<'_>) -> Result<u32, HuffmanError> {
        if self.counts.len() == 1 {
            return Ok(self.canonical[0]);
        }
        let mut code = 0u64;
        for l in 1..self.counts.len() {
            code = (code << 1) | input.read_bit()? as u64;
            let offset = code.wrapping_sub(self.first_code[l]);
            if code >= self.first_code[l] && offset < self.counts[l] as u64 {
                return Ok(self.canonical[(self.first_index[l] as u64 + offset) as usize]);
            }
        }
        Err(HuffmanError::NoMatch)
    }

    /// Kraft sum as `(numerator, 2^max_len)`.
    pub fn kraft_sum(&self) -> (u128, u128) {
        let max_len = self.counts.len() - 1;
        let mut num = 0u128;
        for (l, &c) in self.counts.iter().enumerate() {
            num += (c as u128) << (max_len - l);
        }
        (num, 1u128 << max_len)
    }

    /// True when no codeword is a proper prefix of another (pairwise check).
    pub fn is_prefix_free(&self) -> bool {
        if self.table.len() == 1 {
            return true;
        }
        // Sorted as left-aligned bit strings, a codeword that prefixes any
        // other also prefixes its immediate successor.
        let mut words: Vec<(u64, u8)> = self.table.iter().map(|&(_, c, l)| (c, l)).collect();
        words.sort_unstable_by_key(|&(c, l)| (c << (64 - l as u32), l));
        words.windows(2).all(|w| {
            let ((ca, la), (cb, lb)) = (w[0], w[1]);
            !(la <= lb && (cb >> (lb - la)) == ca)
        })
    }
}
