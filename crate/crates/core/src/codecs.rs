//! Token codecs driven by a [`Predictor`]: plain arithmetic coding, token rank
//! compression (TRC) and token-by-token prefix coding (TTC).
//!
//! None of the streams record the token count; callers store it alongside.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bits::{BitError, BitReader, BitString, BitWriter};
use crate::coder::{CoderError, Decoder, Distribution, Encoder, TOTAL, TOTAL_BITS};
use crate::predictor::{ContextModel, ContextModelConfig, PredictError, Predictor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Coder(#[from] CoderError),
    #[error(transparent)]
    Bits(#[from] BitError),
    #[error("predictor returned {got} symbols, expected {expected}")]
    AlphabetMismatch { expected: usize, got: usize },
    #[error("decoded rank {rank} outside alphabet of {alphabet}")]
    RankOutOfRange { rank: u64, alphabet: usize },
    #[error("bit pattern matches no codeword")]
    NoMatch,
}

fn step<P: Predictor>(predictor: &mut P, history: &[u32]) -> Result<Distribution, CodecError> {
    let dist = predictor.next_distribution(history)?;
    let expected = predictor.alphabet_size();
    if dist.len() != expected {
        return Err(CodecError::AlphabetMismatch {
            expected,
            got: dist.len(),
        });
    }
    Ok(dist)
}

fn check_token(token: u32, alphabet: usize) -> Result<(), CodecError> {
    if token as usize >= alphabet {
        return Err(PredictError::TokenOutOfRange { token, alphabet }.into());
    }
    Ok(())
}

/// Arithmetic-codes `tokens` under the predictor's per-step distributions.
pub fn ac_encode<P: Predictor>(mut predictor: P, tokens: &[u32]) -> Result<Vec<u8>, CodecError> {
    let mut enc = Encoder::new();
    for i in 0..tokens.len() {
        let dist = step(&mut predictor, &tokens[..i])?;
        check_token(tokens[i], dist.len())?;
        enc.encode(&dist, tokens[i] as usize)?;
        predictor.update(&tokens[..i], tokens[i])?;
    }
    Ok(enc.finish())
}

pub fn ac_decode<P: Predictor>(mut predictor: P, input: &[u8], count: usize) -> Result<Vec<u32>, CodecError> {
    let mut dec = Decoder::new(input)?;
    let mut tokens = Vec::with_capacity(count);
    for _ in 0..count {
        let dist = step(&mut predictor, &tokens)?;
        let symbol = dec.decode(&dist)? as u32;
        predictor.update(&tokens, symbol)?;
        tokens.push(symbol);
    }
    dec.finish()?;
    Ok(tokens)
}

/// Ideal code length `sum -log2 q(x_i)` of `tokens` under the predictor.
pub fn ideal_bits<P: Predictor>(mut predictor: P, tokens: &[u32]) -> Result<f64, CodecError> {
    let mut bits = 0.0;
    for i in 0..tokens.len() {
        let dist = step(&mut predictor, &tokens[..i])?;
        check_token(tokens[i], dist.len())?;
        bits += dist.cost_bits(tokens[i] as usize);
        predictor.update(&tokens[..i], tokens[i])?;
    }
    Ok(bits)
}

/// Position of `token` when the alphabet is sorted by descending frequency,
/// ties broken by ascending id.
pub fn rank_of(dist: &Distribution, token: u32) -> usize {
    let f = dist.freq(token as usize);
    let t = token as usize;
    (0..dist.len())
        .filter(|&j| {
            let g = dist.freq(j);
            g > f || (g == f && j < t)
        })
        .count()
}

/// Inverse of [`rank_of`].
pub fn token_at_rank(dist: &Distribution, rank: usize) -> Option<u32> {
    if rank >= dist.len() {
        return None;
    }
    let mut order: Vec<u32> = (0..dist.len() as u32).collect();
    order.select_nth_unstable_by_key(rank, |&j| (core::cmp::Reverse(dist.freq(j as usize)), j));
    Some(order[rank])
}

const RANK_ESCAPE: u8 = 255;
const RANK_MODEL_CAPACITY: usize = 1 << 10;

fn rank_model() -> ContextModel {
    ContextModel::new(ContextModelConfig::new(1, 256).with_capacity(RANK_MODEL_CAPACITY))
        .expect("static rank model configuration")
}

/// Rank bytes: ranks below 255 are one byte, larger ranks are the escape byte
/// followed by `rank - 255` as a varint.
fn push_rank_bytes(out: &mut Vec<u8>, rank: usize) {
    if rank < RANK_ESCAPE as usize {
        out.push(rank as u8);
    } else {
        out.push(RANK_ESCAPE);
        crate::bits::write_varint(out, (rank - RANK_ESCAPE as usize) as u64);
    }
}

struct RankStream {
    model: ContextModel,
    history: Vec<u32>,
}

impl RankStream {
    fn new() -> Self {
        Self {
            model: rank_model(),
            history: Vec::new(),
        }
    }

    fn code(&mut self, byte: Option<u8>, enc: Option<&mut Encoder>, dec: Option<&mut Decoder<'_>>) -> Result<u8, CodecError> {
        let ctx = &self.history[self.history.len().saturating_sub(1)..];
        let dist = self.model.next_distribution(ctx)?;
        let byte = match (byte, enc, dec) {
            (Some(b), Some(enc), _) => {
                enc.encode(&dist, b as usize)?;
                b
            }
            (_, _, Some(dec)) => dec.decode(&dist)? as u8,
            _ => unreachable!("rank stream needs an encoder or a decoder"),
        };
        self.model.update(ctx, byte as u32)?;
        self.history.push(byte as u32);
        Ok(byte)
    }

    fn encode(&mut self, enc: &mut Encoder, byte: u8) -> Result<(), CodecError> {
        self.code(Some(byte), Some(enc), None).map(|_| ())
    }

    fn decode(&mut self, dec: &mut Decoder<'_>) -> Result<u8, CodecError> {
        self.code(None, None, Some(dec))
    }
}

/// Rank sequence of `tokens` under the predictor.
pub fn ranks<P: Predictor>(mut predictor: P, tokens: &[u32]) -> Result<Vec<usize>, CodecError> {
    let mut out = Vec::with_capacity(tokens.len());
    for i in 0..tokens.len() {
        let dist = step(&mut predictor, &tokens[..i])?;
        check_token(tokens[i], dist.len())?;
        out.push(rank_of(&dist, tokens[i]));
        predictor.update(&tokens[..i], tokens[i])?;
    }
    Ok(out)
}

/// TRC: codes each token's rank, with the rank bytes arithmetic-coded under an
/// adaptive order-1 byte model.
pub fn trc_encode<P: Predictor>(predictor: P, tokens: &[u32]) -> Result<Vec<u8>, CodecError> {
    let mut bytes = Vec::with_capacity(tokens.len());
    for r in ranks(predictor, tokens)? {
        push_rank_bytes(&mut bytes, r);
    }
    let mut enc = Encoder::new();
    let mut stream = RankStream::new();
    for b in bytes {
        stream.encode(&mut enc, b)?;
    }
    Ok(enc.finish())
}

pub fn trc_decode<P: Predictor>(mut predictor: P, input: &[u8], count: usize) -> Result<Vec<u32>, CodecError> {
    let mut dec = Decoder::new(input)?;
    let mut stream = RankStream::new();
    let mut tokens = Vec::with_capacity(count);
    for _ in 0..count {
        let first = stream.decode(&mut dec)?;
        let rank = if first == RANK_ESCAPE {
            let mut value: u64 = 0;
            let mut shift = 0;
            loop {
                let b = stream.decode(&mut dec)?;
                if shift > 63 {
                    return Err(BitError::VarintOverflow.into());
                }
                value |= ((b & 0x7F) as u64) << shift;
                shift += 7;
                if b & 0x80 == 0 {
                    break;
                }
            }
            value.saturating_add(RANK_ESCAPE as u64)
        } else {
            first as u64
        };
        let dist = step(&mut predictor, &tokens)?;
        let alphabet = dist.len();
        let token = usize::try_from(rank)
            .ok()
            .and_then(|r| token_at_rank(&dist, r))
            .ok_or(CodecError::RankOutOfRange { rank, alphabet })?;
        predictor.update(&tokens, token)?;
        tokens.push(token);
    }
    dec.finish()?;
    Ok(tokens)
}

/// Per-step Shannon code: tokens sorted by descending probability (ties by
/// ascending id), lengths `ceil(log2(1/q))`, codewords from the cumulative
/// probability of the preceding tokens.
#[derive(Debug, Clone)]
pub struct StepCodebook {
    // (token, codeword, length) in sorted order.
    entries: Vec<(u32, u64, u8)>,
    // Position of each token in `entries`.
    position: Vec<u32>,
}

/// Smallest `l` with `freq * 2^l >= TOTAL`, i.e. `ceil(log2(TOTAL / freq))`.
pub fn shannon_length(freq: u32) -> u8 {
    debug_assert!(freq > 0);
    let mut l = 0u8;
    while (freq as u64) << l < TOTAL as u64 {
        l += 1;
    }
    l
}

impl StepCodebook {
    pub fn new(dist: &Distribution) -> Self {
        let mut order: Vec<u32> = (0..dist.len() as u32).collect();
        order.sort_unstable_by_key(|&j| (core::cmp::Reverse(dist.freq(j as usize)), j));
        let mut entries = Vec::with_capacity(order.len());
        let mut position = vec![0u32; order.len()];
        let mut cum = 0u64;
        for (pos, &t) in order.iter().enumerate() {
            let f = dist.freq(t as usize);
            let len = shannon_length(f);
            entries.push((t, cum >> (TOTAL_BITS - len as u32), len));
            position[t as usize] = pos as u32;
            cum += f as u64;
        }
        Self { entries, position }
    }

    /// `(codeword, length)` for `token`.
    pub fn codeword(&self, token: u32) -> (u64, u8) {
        let (_, c, l) = self.entries[self.position[token as usize] as usize];
        (c, l)
    }

    pub fn entries(&self) -> &[(u32, u64, u8)] {
        &self.entries
    }

    /// Kraft sum as `(numerator, 2^16)`.
    pub fn kraft_sum(&self) -> (u64, u64) {
        let num = self
            .entries
            .iter()
            .map(|&(_, _, l)| 1u64 << (TOTAL_BITS - l as u32))
            .sum();
        (num, TOTAL as u64)
    }

    pub fn decode(&self, input: &mut BitReader<'_>) -> Result<u32, CodecError> {
        // Lengths are non-decreasing in sorted order, so bits are only read
        // as far as the matching codeword needs.
        let mut code = 0u64;
        let mut have = 0u8;
        for &(t, c, l) in &self.entries {
            while have < l {
                code = (code << 1) | input.read_bit()? as u64;
                have += 1;
            }
            if c == code {
                return Ok(t);
            }
        }
        Err(CodecError::NoMatch)
    }
}

pub fn ttc_encode<P: Predictor>(mut predictor: P, tokens: &[u32]) -> Result<BitString, CodecError> {
    let mut out = BitWriter::new();
    for i in 0..tokens.len() {
        let dist = step(&mut predictor, &tokens[..i])?;
        check_token(tokens[i], dist.len())?;
        let (code, len) = StepCodebook::new(&dist).codeword(tokens[i]);
        out.push_bits(code, len as u32);
        predictor.update(&tokens[..i], tokens[i])?;
    }
    Ok(out.into_bitstring())
}

pub fn ttc_decode<P: Predictor>(mut predictor: P, input: &[u8], count: usize) -> Result<Vec<u32>, CodecError> {
    let mut reader = BitReader::new(input);
    let mut tokens = Vec::with_capacity(count);
    for _ in 0..count {
        let dist = step(&mut predictor, &tokens)?;
        let token = StepCodebook::new(&dist).decode(&mut reader)?;
        predictor.update(&tokens, token)?;
        tokens.push(token);
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::quantize_probabilities;

    /// Fixed distribution every step, ignoring history.
    struct Fixed(Distribution);

    impl Predictor for Fixed {
        fn alphabet_size(&self) -> usize {
            self.0.len()
        }
        fn next_distribution(&mut self, _: &[u32]) -> Result<Distribution, PredictError> {
            Ok(self.0.clone())
        }
        fn update(&mut self, _: &[u32], _: u32) -> Result<(), PredictError> {
            Ok(())
        }
        fn model_size_bytes(&self) -> u64 {
            0
        }
    }

    /// Puts almost all mass on a known next token.
    struct Oracle {
        truth: Vec<u32>,
        alphabet: usize,
    }

    impl Predictor for Oracle {
        fn alphabet_size(&self) -> usize {
            self.alphabet
        }
        fn next_distribution(&mut self, context: &[u32]) -> Result<Distribution, PredictError> {
            let mut p = vec![0.0; self.alphabet];
            p[self.truth[context.len()] as usize] = 1.0;
            quantize_probabilities(&p)
        }
        fn update(&mut self, _: &[u32], _: u32) -> Result<(), PredictError> {
            Ok(())
        }
        fn model_size_bytes(&self) -> u64 {
            0
        }
    }

    fn sample(n: usize, alphabet: u32, seed: u64) -> Vec<u32> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 33) % alphabet as u64) as u32
            })
            .collect()
    }

    #[test]
    fn shannon_lengths() {
        assert_eq!(shannon_length(TOTAL / 2), 1);
        // q = 0.3
        assert_eq!(shannon_length(19661), 2);
        assert_eq!(shannon_length(TOTAL), 0);
        assert_eq!(shannon_length(1), 16);
        assert_eq!(shannon_length(TOTAL / 4 + 1), 2);
    }

    #[test]
    fn rank_roundtrip() {
        let dist = Distribution::from_frequencies(&[10, 30, 30, TOTAL - 70]).unwrap();
        assert_eq!(rank_of(&dist, 3), 0);
        assert_eq!(rank_of(&dist, 1), 1);
        assert_eq!(rank_of(&dist, 2), 2);
        assert_eq!(rank_of(&dist, 0), 3);
        for t in 0..4 {
            assert_eq!(token_at_rank(&dist, rank_of(&dist, t)), Some(t));
        }
        assert_eq!(token_at_rank(&dist, 4), None);
    }

    #[test]
    fn codecs_roundtrip_adaptive() {
        let tokens = sample(3000, 7, 3);
        let model = || ContextModel::new(ContextModelConfig::new(2, 7).with_capacity(1 << 8)).unwrap();
        let ac = ac_encode(model(), &tokens).unwrap();
        assert_eq!(ac_decode(model(), &ac, tokens.len()).unwrap(), tokens);
        let trc = trc_encode(model(), &tokens).unwrap();
        assert_eq!(trc_decode(model(), &trc, tokens.len()).unwrap(), tokens);
        let ttc = ttc_encode(model(), &tokens).unwrap();
        assert_eq!(ttc_decode(model(), &ttc.bytes, tokens.len()).unwrap(), tokens);
        assert!(ac.len() as u64 * 8 <= ttc.bit_len + 64);
    }

    #[test]
    fn empty_and_single() {
        let uni = || Fixed(Distribution::uniform(256).unwrap());
        for tokens in [vec![], vec![42u32]] {
            let ac = ac_encode(uni(), &tokens).unwrap();
            assert_eq!(ac_decode(uni(), &ac, tokens.len()).unwrap(), tokens);
            let trc = trc_encode(uni(), &tokens).unwrap();
            assert_eq!(trc_decode(uni(), &trc, tokens.len()).unwrap(), tokens);
            let ttc = ttc_encode(uni(), &tokens).unwrap();
            assert_eq!(ttc.bit_len, 8 * tokens.len() as u64);
            assert_eq!(ttc_decode(uni(), &ttc.bytes, tokens.len()).unwrap(), tokens);
        }
    }

    #[test]
    fn perfect_predictor_gives_zero_ranks() {
        let truth = sample(10_000, 256, 9);
        let oracle = || Oracle {
            truth: truth.clone(),
            alphabet: 256,
        };
        assert!(ranks(oracle(), &truth).unwrap().iter().all(|&r| r == 0));
        let c = trc_encode(oracle(), &truth).unwrap();
        assert!(c.len() * 100 < truth.len(), "{} bytes", c.len());
        assert_eq!(trc_decode(oracle(), &c, truth.len()).unwrap(), truth);
    }

    #[test]
    fn uniform_ranks_do_not_compress() {
        let tokens = sample(20_000, 256, 5);
        let uni = || Fixed(Distribution::uniform(256).unwrap());
        let c = trc_encode(uni(), &tokens).unwrap();
        let per_token = c.len() as f64 / tokens.len() as f64;
        assert!((0.97..1.12).contains(&per_token), "{per_token}");
        assert_eq!(trc_decode(uni(), &c, tokens.len()).unwrap(), tokens);
    }

    #[test]
    fn large_ranks_use_escape() {
        let n = 1000;
        let tokens = sample(500, n, 1);
        let uni = || Fixed(Distribution::uniform(n as usize).unwrap());
        let c = trc_encode(uni(), &tokens).unwrap();
        assert_eq!(trc_decode(uni(), &c, tokens.len()).unwrap(), tokens);
    }

    #[test]
    fn ttc_codebook_kraft_and_prefix() {
        let dist = Distribution::from_frequencies(&[32768, 19661, 9830, 3277]).unwrap();
        let book = StepCodebook::new(&dist);
        let (num, den) = book.kraft_sum();
        assert!(num <= den);
        assert_eq!(book.codeword(0), (0b0, 1));
        assert_eq!(book.codeword(1).1, 2);
        let words: Vec<(u64, u8)> = book.entries().iter().map(|&(_, c, l)| (c, l)).collect();
        for (i, &(ca, la)) in words.iter().enumerate() {
            for (j, &(cb, lb)) in words.iter().enumerate() {
                if i != j && la <= lb {
                    assert_ne!(cb >> (lb - la), ca);
                }
            }
        }
    }

    #[test]
    fn corrupt_streams_are_errors() {
        let tokens = sample(400, 16, 2);
        let uni = || Fixed(Distribution::uniform(16).unwrap());
        let ac = ac_encode(uni(), &tokens).unwrap();
        assert!(ac_decode(uni(), &ac[..ac.len() - 1], tokens.len()).is_err());
        let ttc = ttc_encode(uni(), &tokens).unwrap();
        assert!(ttc_decode(uni(), &ttc.bytes[..ttc.bytes.len() - 1], tokens.len()).is_err());
    }
}
