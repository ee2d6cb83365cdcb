//! Three ways of turning an arbitrary byte stream into tokens for a model
//! with a text vocabulary:
//!
//! * as text: each byte becomes the code point `U+00XX`, the resulting string
//!   is tokenized by greedy longest match with byte fallback;
//! * as integers: the token id is the byte value;
//! * as byte tokens: each byte maps to the vocabulary's own byte-fallback
//!   token, found by [`ByteMapping::build`].
//!
//! Byte-fallback tokens are written `<0xHH>` (upper-case hex) in vocabularies.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizerError {
    #[error("vocabulary assigns id {0} twice")]
    DuplicateId(u32),
    #[error("vocabulary has no byte token for 0x{0:02X}")]
    MissingByteToken(u8),
    #[error("token {0} is not in the vocabulary")]
    UnknownToken(u32),
    #[error("byte token mapping has no byte for id {0}")]
    UnmappedToken(u32),
    #[error("decoded text is not a byte string")]
    NotByteText,
    #[error("empty vocabulary token")]
    EmptyToken,
}

/// Row of the UTF-8 encoding table a byte belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Utf8Class {
    /// `0yyyzzzz`: a complete one-byte sequence.
    Ascii,
    /// `10xxxxxx`: continuation byte.
    Continuation,
    /// `110xxxyy` lead byte of a two-byte sequence.
    Lead2,
    /// `1110wwww` lead byte of a three-byte sequence.
    Lead3,
    /// `11110uvv` lead byte of a four-byte sequence.
    Lead4,
    /// Never appears in well-formed UTF-8: 0xC0, 0xC1, 0xF5-0xFF.
    Invalid,
}

pub fn classify(byte: u8) -> Utf8Class {
    match byte {
        0x00..=0x7F => Utf8Class::Ascii,
        0x80..=0xBF => Utf8Class::Continuation,
        0xC2..=0xDF => Utf8Class::Lead2,
        0xE0..=0xEF => Utf8Class::Lead3,
        0xF0..=0xF4 => Utf8Class::Lead4,
        _ => Utf8Class::Invalid,
    }
}

pub fn byte_token_name(byte: u8) -> String {
    format!("<0x{byte:02X}>")
}

fn parse_byte_token(s: &str) -> Option<u8> {
    let hex = s.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 || !hex.bytes().all(|c| c.is_ascii_digit() || (b'A'..=b'F').contains(&c)) {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(Vec<u8>),
    Byte(u8),
}

/// A token vocabulary: text pieces plus byte-fallback tokens.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    // UTF-8 bytes of each text piece -> id.
    pieces: BTreeMap<Vec<u8>, u32>,
    byte_tokens: [Option<u32>; 256],
    by_id: BTreeMap<u32, Piece>,
    longest: usize,
}

impl Vocabulary {
    pub fn from_entries<S: AsRef<str>>(entries: impl IntoIterator<Item = (S, u32)>) -> Result<Self, TokenizerError> {
        let mut vocab = Self {
            pieces: BTreeMap::new(),
            byte_tokens: [None; 256],
            by_id: BTreeMap::new(),
            longest: 0,
        };
        for (token, id) in entries {
            let token = token.as_ref();
            let piece = match parse_byte_token(token) {
                Some(b) => {
                    vocab.byte_tokens[b as usize] = Some(id);
                    Piece::Byte(b)
                }
                None => {
                    if token.is_empty() {
                        return Err(TokenizerError::EmptyToken);
                    }
                    vocab.pieces.insert(token.as_bytes().to_vec(), id);
                    vocab.longest = vocab.longest.max(token.len());
                    Piece::Text(token.as_bytes().to_vec())
                }
            };
            if vocab.by_id.insert(id, piece).is_some() {
                return Err(TokenizerError::DuplicateId(id));
            }
        }
        Ok(vocab)
    }

    /// One past the largest id.
    pub fn size(&self) -> usize {
        self.by_id.keys().next_back().map_or(0, |&id| id as usize + 1)
    }

    pub fn byte_token(&self, byte: u8) -> Option<u32> {
        self.byte_tokens[byte as usize]
    }

    /// Tokenizes `text` with every text piece removed, so only byte-fallback
    /// tokens can appear.
    pub fn tokenize_bytes_only(&self, text: &str) -> Result<Vec<u32>, TokenizerError> {
        text.bytes()
            .map(|b| self.byte_token(b).ok_or(TokenizerError::MissingByteToken(b)))
            .collect()
    }

    /// Greedy longest-match tokenization with byte fallback.
    pub fn tokenize(&self, text: &[u8]) -> Result<Vec<u32>, TokenizerError> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < text.len() {
            let mut matched = None;
            for len in (1..=self.longest.min(text.len() - i)).rev() {
                if let Some(&id) = self.pieces.get(&text[i..i + len]) {
                    matched = Some((id, len));
                    break;
                }
            }
            match matched {
                Some((id, len)) => {
                    out.push(id);
                    i += len;
                }
                None => {
                    out.push(self.byte_token(text[i]).ok_or(TokenizerError::MissingByteToken(text[i]))?);
                    i += 1;
                }
            }
        }
        Ok(out)
    }

    pub fn detokenize(&self, tokens: &[u32]) -> Result<Vec<u8>, TokenizerError> {
        let mut out = Vec::new();
        for &t in tokens {
            match self.by_id.get(&t) {
                Some(Piece::Text(s)) => out.extend_from_slice(s),
                Some(Piece::Byte(b)) => out.push(*b),
                None => return Err(TokenizerError::UnknownToken(t)),
            }
        }
        Ok(out)
    }
}

/// Bytes as the code points `U+0000..=U+00FF`.
pub fn bytes_as_text(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

pub fn text_as_bytes(text: &str) -> Result<Vec<u8>, TokenizerError> {
    text.chars()
        .map(|c| u8::try_from(c as u32).map_err(|_| TokenizerError::NotByteText))
        .collect()
}

pub fn tokenize_as_text(bytes: &[u8], vocab: &Vocabulary) -> Result<Vec<u32>, TokenizerError> {
    vocab.tokenize(bytes_as_text(bytes).as_bytes())
}

pub fn detokenize_as_text(tokens: &[u32], vocab: &Vocabulary) -> Result<Vec<u8>, TokenizerError> {
    let utf8 = vocab.detokenize(tokens)?;
    let text = core::str::from_utf8(&utf8).map_err(|_| TokenizerError::NotByteText)?;
    text_as_bytes(text)
}

pub fn tokenize_as_int(bytes: &[u8]) -> Vec<u32> {
    bytes.iter().map(|&b| b as u32).collect()
}

pub fn detokenize_as_int(tokens: &[u32]) -> Result<Vec<u8>, TokenizerError> {
    tokens
        .iter()
        .map(|&t| u8::try_from(t).map_err(|_| TokenizerError::UnknownToken(t)))
        .collect()
}

/// How a [`ByteMapping`] entry was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Direct,
    Interpolated,
}

/// Injective map from byte values to a vocabulary's byte-token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteMapping {
    ids: [u32; 256],
    provenance: [Provenance; 256],
    inverse: BTreeMap<u32, u8>,
}

impl ByteMapping {
    /// Walks well-formed UTF-8 sequences covering every lead and continuation
    /// byte, tokenizes each with the text pieces removed and records the byte
    /// token seen at each position. Bytes that never occur in well-formed
    /// UTF-8 are filled in by linear interpolation between their nearest
    /// mapped neighbours (extrapolation past the last one), moved to the
    /// nearest unused id.
    pub fn build(vocab: &Vocabulary) -> Result<Self, TokenizerError> {
        let mut direct: [Option<u32>; 256] = [None; 256];
        let mut record = |s: &str| -> Result<(), TokenizerError> {
            for (b, id) in s.bytes().zip(vocab.tokenize_bytes_only(s)?) {
                direct[b as usize] = Some(id);
            }
            Ok(())
        };
        let mut buf = [0u8; 4];
        // One code point per lead byte and per continuation value is enough to
        // visit every byte that well-formed UTF-8 can contain.
        for cp in 0u32..0x80 {
            record(char::from_u32(cp).unwrap().encode_utf8(&mut buf))?;
        }
        for lead in 0xC2u32..=0xDF {
            for cont in 0x80u32..=0xBF {
                let cp = ((lead & 0x1F) << 6) | (cont & 0x3F);
                record(char::from_u32(cp).unwrap().encode_utf8(&mut buf))?;
            }
        }
        for lead in 0xE0u32..=0xEF {
            let cp = ((lead & 0x0F) << 12) | 0x0A80;
            if let Some(c) = char::from_u32(cp) {
                record(c.encode_utf8(&mut buf))?;
            } else {
                // Surrogate block: pick a code point below it.
                record(char::from_u32(((lead & 0x0F) << 12) | 0x0080).unwrap().encode_utf8(&mut buf))?;
            }
        }
        for lead in 0xF0u32..=0xF4 {
            let cp = (((lead & 0x07) << 18).max(0x10000)) | 0x80;
            record(char::from_u32(cp).unwrap().encode_utf8(&mut buf))?;
        }
        Ok(Self::from_direct(&direct))
    }

    /// Completes a partial map by interpolation; `direct` needs at least one entry.
    pub fn from_direct(direct: &[Option<u32>; 256]) -> Self {
        let known: Vec<(i64, i64)> = (0..256)
            .filter_map(|b| direct[b].map(|id| (b as i64, id as i64)))
            .collect();
        assert!(!known.is_empty(), "need at least one mapped byte");
        let mut ids = [0u32; 256];
        let mut provenance = [Provenance::Interpolated; 256];
        let mut used = BTreeMap::new();
        for &(b, id) in &known {
            ids[b as usize] = id as u32;
            provenance[b as usize] = Provenance::Direct;
            used.insert(id as u32, b as u8);
        }
        for b in 0..256i64 {
            if direct[b as usize].is_some() {
                continue;
            }
            let right = known.partition_point(|&(k, _)| k < b);
            let estimate = match (right.checked_sub(1).map(|i| known[i]), known.get(right).copied()) {
                (Some(l), Some(r)) => lerp(l, r, b),
                (Some(l), None) if right >= 2 => lerp(known[right - 2], l, b),
                (None, Some(r)) if known.len() >= 2 => lerp(r, known[1], b),
                (Some((k, id)), None) | (None, Some((k, id))) => id + (b - k),
                (None, None) => unreachable!(),
            };
            let id = nearest_unused(estimate, &used);
            ids[b as usize] = id;
            used.insert(id, b as u8);
        }
        Self {
            ids,
            provenance,
            inverse: used,
        }
    }

    pub fn token(&self, byte: u8) -> u32 {
        self.ids[byte as usize]
    }

    pub fn byte_of(&self, token: u32) -> Option<u8> {
        self.inverse.get(&token).copied()
    }

    pub fn provenance(&self, byte: u8) -> Provenance {
        self.provenance[byte as usize]
    }

    pub fn ids(&self) -> &[u32; 256] {
        &self.ids
    }

    pub fn is_injective(&self) -> bool {
        self.inverse.len() == 256
    }

    /// Smallest alphabet that holds every mapped id.
    pub fn alphabet_size(&self) -> usize {
        self.ids.iter().max().map_or(0, |&m| m as usize + 1)
    }
}

// Rounded linear interpolation through (x0, y0) and (x1, y1), evaluated at x.
fn lerp((x0, y0): (i64, i64), (x1, y1): (i64, i64), x: i64) -> i64 {
    let num = (y1 - y0) * (x - x0);
    let den = x1 - x0;
    y0 + div_round(num, den)
}

fn div_round(num: i64, den: i64) -> i64 {
    let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
    (2 * num + den).div_euclid(2 * den)
}

fn nearest_unused(estimate: i64, used: &BTreeMap<u32, u8>) -> u32 {
    let estimate = estimate.clamp(0, u32::MAX as i64);
    for d in 0.. {
        for cand in [estimate + d, estimate - d] {
            if (0..=u32::MAX as i64).contains(&cand) && !used.contains_key(&(cand as u32)) {
                return cand as u32;
            }
        }
    }
    unreachable!()
}

pub fn tokenize_as_byte_tokens(bytes: &[u8], mapping: &ByteMapping) -> Vec<u32> {
    bytes.iter().map(|&b| mapping.token(b)).collect()
}

pub fn detokenize_as_byte_tokens(tokens: &[u32], mapping: &ByteMapping) -> Result<Vec<u8>, TokenizerError> {
    tokens
        .iter()
        .map(|&t| mapping.byte_of(t).ok_or(TokenizerError::UnmappedToken(t)))
        .collect()
}
