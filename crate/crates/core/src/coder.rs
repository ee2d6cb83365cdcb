//! Carry-propagating range coder over fixed-point cumulative distributions.
//!
//! The coder keeps a 64-bit `low` accumulator and a 32-bit width `range`.
//! Each symbol narrows `[low, low + range)` to
//! `[low + ceil(range * C / TOTAL), low + floor(range * (C + F) / TOTAL))`,
//! where `C` and `F` are the symbol's cumulative and individual frequency.
//! Rounding the lower edge up and the upper edge down keeps every coder
//! interval inside the ideal real-valued interval of the same prefix. Whenever
//! `range` drops below 2^24 the top byte of `low` is shifted out, with carries
//! resolved through a cached byte and a run of pending `0xFF` bytes.
//!
//! A stream of `R` renormalizations is exactly `R + 4` bytes long, and the
//! decoder reads exactly that many, so any truncation is detected.

use alloc::vec::Vec;

use thiserror::Error;

/// Log2 of the fixed-point probability scale.
pub const TOTAL_BITS: u32 = 16;
/// Every [`Distribution`] sums to exactly this many frequency units.
pub const TOTAL: u32 = 1 << TOTAL_BITS;
/// Lower bound on `range` after renormalization.
pub const RANGE_FLOOR: u64 = 1 << 24;
/// Bytes written by [`Encoder::finish`] beyond those emitted while coding.
pub const FLUSH_BYTES: usize = 4;

const CARRY_BIT: u64 = 1 << 32;
const INITIAL_RANGE: u64 = u32::MAX as u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoderError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(&'static str),
    #[error("symbol {symbol} outside alphabet of {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("coded stream is truncated")]
    Truncated,
    #[error("coded stream is corrupt")]
    Corrupt,
    #[error("{0} unread bytes after the last symbol")]
    TrailingBytes(usize),
}

/// Cumulative frequency table over an alphabet.
///
/// `cum[0] == 0`, `cum[n] == TOTAL` and `cum` is strictly increasing, so every
/// symbol owns at least one frequency unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Distribution {
    cum: Vec<u32>,
}

impl Distribution {
    pub fn from_cumulative(cum: Vec<u32>) -> Result<Self, CoderError> {
        if cum.len() < 2 {
            return Err(CoderError::InvalidDistribution("empty alphabet"));
        }
        if cum[0] != 0 {
            return Err(CoderError::InvalidDistribution("cum[0] must be 0"));
        }
        if *cum.last().unwrap() != TOTAL {
            return Err(CoderError::InvalidDistribution("cumulative total must equal TOTAL"));
        }
        if cum.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoderError::InvalidDistribution("cumulative table not strictly increasing"));
        }
        Ok(Self { cum })
    }

    pub fn from_frequencies(freqs: &[u32]) -> Result<Self, CoderError> {
        let mut cum = Vec::with_capacity(freqs.len() + 1);
        let mut acc = 0u64;
        cum.push(0);
        for &f in freqs {
            acc += f as u64;
            if acc > TOTAL as u64 {
                return Err(CoderError::InvalidDistribution("frequencies exceed TOTAL"));
            }
            cum.push(acc as u32);
        }
        Self::from_cumulative(cum)
    }

    /// Equal split of `TOTAL` over `n` symbols; leftover units go to the
    /// lowest indices. Matches quantizing an exactly uniform probability
    /// vector.
    pub fn uniform(n: usize) -> Result<Self, CoderError> {
        if n == 0 || n > TOTAL as usize {
            return Err(CoderError::InvalidDistribution("alphabet size out of range"));
        }
        let base = TOTAL as usize / n;
        let extra = TOTAL as usize % n;
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0u32;
        cum.push(0);
        for i in 0..n {
            acc += (base + usize::from(i < extra)) as u32;
            cum.push(acc);
        }
        Ok(Self { cum })
    }

    /// Alphabet size.
    pub fn len(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn freq(&self, symbol: usize) -> u32 {
        self.cum[symbol + 1] - self.cum[symbol]
    }

    pub fn cum(&self, symbol: usize) -> u32 {
        self.cum[symbol]
    }

    pub fn cumulative(&self) -> &[u32] {
        &self.cum
    }

    pub fn frequencies(&self) -> impl Iterator<Item = u32> + '_ {
        self.cum.windows(2).map(|w| w[1] - w[0])
    }

    pub fn probability(&self, symbol: usize) -> f64 {
        self.freq(symbol) as f64 / TOTAL as f64
    }

    /// Information content of `symbol` in bits.
    pub fn cost_bits(&self, symbol: usize) -> f64 {
        TOTAL_BITS as f64 - libm::log2(self.freq(symbol) as f64)
    }

    /// Symbol whose cumulative interval contains `value` (`value < TOTAL`).
    fn locate(&self, value: u64) -> usize {
        // Number of k >= 1 with cum[k] <= value.
        self.cum[1..].partition_point(|&c| c as u64 <= value)
    }
}

/// Shannon entropy of the quantized distribution, in bits per symbol.
pub fn entropy(dist: &Distribution) -> f64 {
    let total = TOTAL as f64;
    dist.frequencies()
        .map(|f| {
            let p = f as f64 / total;
            -p * libm::log2(p)
        })
        .sum()
}

#[inline]
fn sub_interval(range: u64, dist: &Distribution, symbol: usize) -> (u64, u64) {
    let lo = (range * dist.cum[symbol] as u64 + (TOTAL as u64 - 1)) >> TOTAL_BITS;
    let hi = (range * dist.cum[symbol + 1] as u64) >> TOTAL_BITS;
    (lo, hi)
}

#[derive(Debug, Clone)]
pub struct Encoder {
    low: u64,
    range: u64,
    cache: u8,
    cache_size: u64,
    // The byte above the first real output byte is always zero and is not written.
    skip_lead: bool,
    renorms: u64,
    out: Vec<u8>,
}

impl Default for Encoder {
    fn default() -> Self {
        Self::new()
    }
}

impl Encoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: INITIAL_RANGE,
            cache: 0,
            cache_size: 1,
            skip_lead: true,
            renorms: 0,
            out: Vec::new(),
        }
    }

    pub fn encode(&mut self, dist: &Distribution, symbol: usize) -> Result<(), CoderError> {
        if symbol >= dist.len() {
            return Err(CoderError::SymbolOutOfRange {
                symbol,
                alphabet: dist.len(),
            });
        }
        let (lo, hi) = sub_interval(self.range, dist, symbol);
        self.low += lo;
        self.range = hi - lo;
        while self.range < RANGE_FLOOR {
            self.range <<= 8;
            self.shift_low();
            self.renorms += 1;
        }
        Ok(())
    }

    fn shift_low(&mut self) {
        if self.low < 0xFF00_0000 || self.low >= CARRY_BIT {
            let carry = (self.low >> 32) as u8;
            let mut pending = self.cache;
            loop {
                if self.skip_lead {
                    debug_assert_eq!(pending.wrapping_add(carry), 0);
                    self.skip_lead = false;
                } else {
                    self.out.push(pending.wrapping_add(carry));
                }
                pending = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn low(&self) -> u64 {
        self.low
    }

    /// Renormalization steps so far; each one accounts for one output byte.
    pub fn renormalizations(&self) -> u64 {
        self.renorms
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..=FLUSH_BYTES {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    code: u64,
    range: u64,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self, CoderError> {
        let mut dec = Self {
            code: 0,
            range: INITIAL_RANGE,
            input,
            pos: 0,
        };
        for _ in 0..FLUSH_BYTES {
            dec.code = (dec.code << 8) | dec.next_byte()? as u64;
        }
        Ok(dec)
    }

    fn next_byte(&mut self) -> Result<u8, CoderError> {
        let byte = *self.input.get(self.pos).ok_or(CoderError::Truncated)?;
        self.pos += 1;
        Ok(byte)
    }

    pub fn decode(&mut self, dist: &Distribution) -> Result<usize, CoderError> {
        let target = (self.code << TOTAL_BITS) / self.range;
        let symbol = dist.locate(target);
        if symbol >= dist.len() {
            return Err(CoderError::Corrupt);
        }
        let (lo, hi) = sub_interval(self.range, dist, symbol);
        if self.code < lo || self.code >= hi {
            return Err(CoderError::Corrupt);
        }
        self.code -= lo;
        self.range = hi - lo;
        while self.range < RANGE_FLOOR {
            self.code = (self.code << 8) | self.next_byte()? as u64;
            self.range <<= 8;
        }
        Ok(symbol)
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    /// Checks that the whole input was consumed.
    pub fn finish(self) -> Result<(), CoderError> {
        match self.input.len() - self.pos {
            0 => Ok(()),
            n => Err(CoderError::TrailingBytes(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn roundtrip(dists: &[Distribution], msg: &[usize]) -> Vec<u8> {
        let mut enc = Encoder::new();
        for (d, &s) in dists.iter().cycle().zip(msg) {
            enc.encode(d, s).unwrap();
            assert!(enc.range() >= RANGE_FLOOR);
        }
        let bytes = enc.finish();
        let mut dec = Decoder::new(&bytes).unwrap();
        for (d, &s) in dists.iter().cycle().zip(msg) {
            assert_eq!(dec.decode(d).unwrap(), s);
            assert!(dec.range() >= RANGE_FLOOR);
        }
        dec.finish().unwrap();
        bytes
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::from_cumulative(vec![0, 10, 10, TOTAL]).is_err());
        assert!(Distribution::from_cumulative(vec![0, 10, TOTAL - 1]).is_err());
        assert!(Distribution::from_cumulative(vec![1, TOTAL]).is_err());
        assert!(Distribution::from_cumulative(vec![0]).is_err());
        assert!(Distribution::from_frequencies(&[TOTAL, 1]).is_err());
        let d = Distribution::from_frequencies(&[1, TOTAL - 1]).unwrap();
        assert_eq!(d.freq(0), 1);
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn uniform_binary_byte() {
        let d = Distribution::uniform(2).unwrap();
        let mut enc = Encoder::new();
        for s in [0, 1, 1, 0, 1, 0, 0, 1] {
            enc.encode(&d, s).unwrap();
        }
        assert_eq!(enc.renormalizations(), 1);
        let bytes = enc.finish();
        assert_eq!(bytes.len(), 1 + FLUSH_BYTES);
        // Eight equiprobable bits land verbatim in the first byte.
        assert_eq!(bytes[0], 0b0110_1001);
    }

    #[test]
    fn single_symbol_alphabet_is_free() {
        let d = Distribution::uniform(1).unwrap();
        let bytes = roundtrip(&[d], &[0; 1000]);
        assert_eq!(bytes.len(), FLUSH_BYTES);
    }

    #[test]
    fn skewed_and_varying_distributions() {
        let dists = vec![
            Distribution::from_frequencies(&[1, 1, TOTAL - 2]).unwrap(),
            Distribution::uniform(7).unwrap(),
            Distribution::from_frequencies(&[TOTAL - 1, 1]).unwrap(),
        ];
        let msg: Vec<usize> = (0..3000).map(|i| [0, 6, 1, 2, 3, 0, 1, 2, 0][i % 9] % [3, 7, 2][i % 3]).collect();
        roundtrip(&dists, &msg);
    }

    #[test]
    fn carry_chains_resolve() {
        // Repeatedly choosing the top symbol of a skewed table pushes `low`
        // towards the carry boundary and produces long 0xFF runs.
        let d = Distribution::from_frequencies(&[TOTAL - 3, 3]).unwrap();
        let mut msg = vec![1usize; 4000];
        msg.extend([0usize; 50]);
        msg.extend([1usize; 4000]);
        roundtrip(&[d], &msg);
    }

    #[test]
    fn rejects_out_of_range_symbol() {
        let d = Distribution::uniform(3).unwrap();
        let mut enc = Encoder::new();
        assert_eq!(
            enc.encode(&d, 3),
            Err(CoderError::SymbolOutOfRange { symbol: 3, alphabet: 3 })
        );
    }

    #[test]
    fn truncated_and_trailing_input() {
        let d = Distribution::uniform(256).unwrap();
        let msg: Vec<usize> = (0..100).collect();
        let bytes = roundtrip(core::slice::from_ref(&d), &msg);
        for cut in 0..bytes.len() {
            let mut failed = false;
            match Decoder::new(&bytes[..cut]) {
                Err(e) => {
                    assert_eq!(e, CoderError::Truncated);
                    failed = true;
                }
                Ok(mut dec) => {
                    for _ in 0..msg.len() {
                        if let Err(e) = dec.decode(&d) {
                            assert_eq!(e, CoderError::Truncated);
                            failed = true;
                            break;
                        }
                    }
                }
            }
            assert!(failed, "cut at {cut} decoded silently");
        }
        let mut longer = bytes.clone();
        longer.push(0);
        let mut dec = Decoder::new(&longer).unwrap();
        for _ in 0..msg.len() {
            dec.decode(&d).unwrap();
        }
        assert_eq!(dec.finish(), Err(CoderError::TrailingBytes(1)));
    }

    #[test]
    fn entropy_values() {
        assert!((entropy(&Distribution::uniform(256).unwrap()) - 8.0).abs() < 1e-12);
        let dyadic = Distribution::from_frequencies(&[TOTAL / 2, TOTAL / 4, TOTAL / 4]).unwrap();
        assert!((entropy(&dyadic) - 1.5).abs() < 1e-12);
        let degenerate = Distribution::from_frequencies(&[TOTAL - 3, 1, 1, 1]).unwrap();
        assert!(entropy(&degenerate) < 1e-3);
    }
}
