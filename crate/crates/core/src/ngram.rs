//! Word n-gram compressor with a trigram, bigram, unigram and character
//! fallback chain, each context coded by its own canonical Huffman tree.
//!
//! Text is split into alternating whitespace runs and words
//! (`space, word, space, word, ..., space`, the outer runs possibly empty).
//! Each word is coded in the trigram tree of the two preceding words; when it
//! is missing there the UNK codeword is written and the bigram tree is tried,
//! then the unigram tree, and finally the word is spelled out byte by byte
//! with an end-of-word marker. A level whose context never occurred in
//! training has no tree and is skipped without writing anything. Whitespace
//! runs use their own unigram tree with a character fallback.
//!
//! Symbol 0 is UNK in every tree. Word ids are `1..=V` in byte order of the
//! vocabulary; the start-of-text context is `V + 1`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use thiserror::Error;

use crate::bits::{read_varint, write_varint, BitError, BitReader, BitString, BitWriter};
use crate::huffman::{CanonicalCode, HuffmanError};

pub const MAGIC: &[u8; 4] = b"NGHM";
pub const FORMAT_VERSION: u8 = 1;

const UNK: u32 = 0;
/// Byte alphabet plus the end-of-word marker.
const END_OF_WORD: u32 = 256;
const SPACE_BYTES: [u8; 5] = [b'\t', b'\n', 0x0C, b'\r', b' '];
const END_OF_SPACE: u32 = SPACE_BYTES.len() as u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NGramError {
    #[error("corrupt stream: {0}")]
    Corrupt(&'static str),
    #[error("model file is malformed: {0}")]
    BadModel(&'static str),
    #[error(transparent)]
    Huffman(#[from] HuffmanError),
    #[error(transparent)]
    Bits(#[from] BitError),
}

fn is_space(b: u8) -> bool {
    b.is_ascii_whitespace()
}

/// Words and the whitespace runs around them; `spaces.len() == words.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordStream<'a> {
    pub spaces: Vec<&'a [u8]>,
    pub words: Vec<&'a [u8]>,
}

pub fn tokenize(text: &[u8]) -> WordStream<'_> {
    let mut spaces = Vec::new();
    let mut words = Vec::new();
    let mut i = 0;
    loop {
        let start = i;
        while i < text.len() && is_space(text[i]) {
            i += 1;
        }
        spaces.push(&text[start..i]);
        if i == text.len() {
            break;
        }
        let start = i;
        while i < text.len() && !is_space(text[i]) {
            i += 1;
        }
        words.push(&text[start..i]);
    }
    WordStream { spaces, words }
}

pub fn detokenize(stream: &WordStream<'_>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(stream.spaces[0]);
    for (w, s) in stream.words.iter().zip(&stream.spaces[1..]) {
        out.extend_from_slice(w);
        out.extend_from_slice(s);
    }
    out
}

/// Which table a codeword came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Trigram,
    Bigram,
    Unigram,
    Char,
    Space,
    SpaceChar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramModel {
    vocab: Vec<Vec<u8>>,
    space_vocab: Vec<Vec<u8>>,
    trigram: BTreeMap<(u32, u32), CanonicalCode>,
    bigram: BTreeMap<u32, CanonicalCode>,
    unigram: CanonicalCode,
    chars: CanonicalCode,
    space_unigram: CanonicalCode,
    space_chars: CanonicalCode,
}

fn lookup(vocab: &[Vec<u8>], item: &[u8]) -> u32 {
    match vocab.binary_search_by(|v| v.as_slice().cmp(item)) {
        Ok(i) => i as u32 + 1,
        Err(_) => UNK,
    }
}

fn tree_with_unk(counts: &BTreeMap<u32, u64>) -> CanonicalCode {
    let weights: Vec<(u32, u64)> = core::iter::once((UNK, 1)).chain(counts.iter().map(|(&s, &c)| (s, c))).collect();
    CanonicalCode::from_weights(&weights).expect("weights are non-empty")
}

fn laplace_tree(counts: &[u64]) -> CanonicalCode {
    let weights: Vec<(u32, u64)> = counts.iter().enumerate().map(|(s, &c)| (s as u32, c + 1)).collect();
    CanonicalCode::from_weights(&weights).expect("weights are non-empty")
}

fn space_symbol(b: u8) -> u32 {
    SPACE_BYTES.iter().position(|&s| s == b).expect("whitespace byte") as u32
}

impl NGramModel {
    pub fn build(corpus: &[u8]) -> Self {
        Self::build_from(&[corpus])
    }

    /// Trains on several documents; the two-word context restarts at each one.
    pub fn build_from(documents: &[&[u8]]) -> Self {
        let streams: Vec<WordStream<'_>> = documents.iter().map(|d| tokenize(d)).collect();
        let mut words = BTreeSet::new();
        let mut spaces = BTreeSet::new();
        for s in &streams {
            words.extend(s.words.iter().copied());
            spaces.extend(s.spaces.iter().copied());
        }
        let vocab: Vec<Vec<u8>> = words.into_iter().map(|w| w.to_vec()).collect();
        let space_vocab: Vec<Vec<u8>> = spaces.into_iter().map(|w| w.to_vec()).collect();
        let start = vocab.len() as u32 + 1;

        let mut tri: BTreeMap<(u32, u32), BTreeMap<u32, u64>> = BTreeMap::new();
        let mut bi: BTreeMap<u32, BTreeMap<u32, u64>> = BTreeMap::new();
        let mut uni: BTreeMap<u32, u64> = BTreeMap::new();
        let mut chars = [0u64; END_OF_WORD as usize + 1];
        let mut space_uni: BTreeMap<u32, u64> = BTreeMap::new();
        let mut space_chars = [0u64; END_OF_SPACE as usize + 1];
        for s in &streams {
            let (mut c1, mut c2) = (start, start);
            for &w in &s.words {
                let id = lookup(&vocab, w);
                *tri.entry((c1, c2)).or_default().entry(id).or_default() += 1;
                *bi.entry(c2).or_default().entry(id).or_default() += 1;
                *uni.entry(id).or_default() += 1;
                for &b in w {
                    chars[b as usize] += 1;
                }
                chars[END_OF_WORD as usize] += 1;
                c1 = c2;
                c2 = id;
            }
            for &sp in &s.spaces {
                *space_uni.entry(lookup(&space_vocab, sp)).or_default() += 1;
                for &b in sp {
                    space_chars[space_symbol(b) as usize] += 1;
                }
                space_chars[END_OF_SPACE as usize] += 1;
            }
        }
        Self {
            trigram: tri.iter().map(|(&k, c)| (k, tree_with_unk(c))).collect(),
            bigram: bi.iter().map(|(&k, c)| (k, tree_with_unk(c))).collect(),
            unigram: tree_with_unk(&uni),
            chars: laplace_tree(&chars),
            space_unigram: tree_with_unk(&space_uni),
            space_chars: laplace_tree(&space_chars),
            vocab,
            space_vocab,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn start(&self) -> u32 {
        self.vocab.len() as u32 + 1
    }

    /// Id of `word` in the vocabulary, 0 if unknown.
    pub fn word_id(&self, word: &[u8]) -> u32 {
        lookup(&self.vocab, word)
    }

    /// Trigram tree for the context `(first, second)`; `None` stands for the
    /// start of text.
    pub fn trigram_tree(&self, first: Option<&[u8]>, second: Option<&[u8]>) -> Option<&CanonicalCode> {
        let id = |w: Option<&[u8]>| w.map_or(self.start(), |w| self.word_id(w));
        self.trigram.get(&(id(first), id(second)))
    }

    /// Every Huffman tree in the model.
    pub fn trees(&self) -> impl Iterator<Item = &CanonicalCode> {
        self.trigram
            .values()
            .chain(self.bigram.values())
            .chain([&self.unigram, &self.chars, &self.space_unigram, &self.space_chars])
    }

    pub fn context_counts(&self) -> (usize, usize) {
        (self.trigram.len(), self.bigram.len())
    }

    pub fn compress(&self, text: &[u8]) -> BitString {
        self.compress_traced(text, &mut |_, _| {})
    }

    /// Like [`compress`](Self::compress), reporting each codeword's level and symbol.
    pub fn compress_traced(&self, text: &[u8], trace: &mut dyn FnMut(Level, u32)) -> BitString {
        let stream = tokenize(text);
        let mut out = BitWriter::new();
        let (mut c1, mut c2) = (self.start(), self.start());
        self.encode_space(stream.spaces[0], &mut out, trace);
        for (&w, &sp) in stream.words.iter().zip(&stream.spaces[1..]) {
            let id = self.encode_word((c1, c2), w, &mut out, trace);
            self.encode_space(sp, &mut out, trace);
            c1 = c2;
            c2 = id;
        }
        out.into_bitstring()
    }

    fn levels(&self, ctx: (u32, u32)) -> [(Level, Option<&CanonicalCode>); 3] {
        [
            (Level::Trigram, self.trigram.get(&ctx)),
            (Level::Bigram, self.bigram.get(&ctx.1)),
            (Level::Unigram, Some(&self.unigram)),
        ]
    }

    fn encode_word(&self, ctx: (u32, u32), word: &[u8], out: &mut BitWriter, trace: &mut dyn FnMut(Level, u32)) -> u32 {
        let id = self.word_id(word);
        for (level, tree) in self.levels(ctx) {
            let Some(tree) = tree else { continue };
            if id != UNK && tree.contains(id) {
                tree.encode(id, out);
                trace(level, id);
                return id;
            }
            tree.encode(UNK, out);
            trace(level, UNK);
        }
        for &b in word {
            self.chars.encode(b as u32, out);
            trace(Level::Char, b as u32);
        }
        self.chars.encode(END_OF_WORD, out);
        trace(Level::Char, END_OF_WORD);
        UNK
    }

    fn encode_space(&self, run: &[u8], out: &mut BitWriter, trace: &mut dyn FnMut(Level, u32)) {
        let id = lookup(&self.space_vocab, run);
        self.space_unigram.encode(id, out);
        trace(Level::Space, id);
        if id == UNK {
            for &b in run {
                let s = space_symbol(b);
                self.space_chars.encode(s, out);
                trace(Level::SpaceChar, s);
            }
            self.space_chars.encode(END_OF_SPACE, out);
            trace(Level::SpaceChar, END_OF_SPACE);
        }
    }

    /// Decodes `original_len` bytes of text from `bits`.
    pub fn decompress(&self, bits: &[u8], original_len: usize) -> Result<Vec<u8>, NGramError> {
        let mut input = BitReader::new(bits);
        let mut out = Vec::with_capacity(original_len);
        let (mut c1, mut c2) = (self.start(), self.start());
        self.decode_space(&mut input, &mut out)?;
        while out.len() < original_len {
            let id = self.decode_word((c1, c2), &mut input, &mut out)?;
            self.decode_space(&mut input, &mut out)?;
            c1 = c2;
            c2 = id;
        }
        if out.len() != original_len {
            return Err(NGramError::Corrupt("decoded length does not match"));
        }
        Ok(out)
    }

    fn decode_word(&self, ctx: (u32, u32), input: &mut BitReader<'_>, out: &mut Vec<u8>) -> Result<u32, NGramError> {
        for (_, tree) in self.levels(ctx) {
            let Some(tree) = tree else { continue };
            let id = tree.decode(input)?;
            if id != UNK {
                let word = self
                    .vocab
                    .get(id as usize - 1)
                    .ok_or(NGramError::Corrupt("word id outside vocabulary"))?;
                out.extend_from_slice(word);
                return Ok(id);
            }
        }
        let before = out.len();
        loop {
            let s = self.chars.decode(input)?;
            if s == END_OF_WORD {
                break;
            }
            out.push(s as u8);
        }
        if out.len() == before {
            return Err(NGramError::Corrupt("empty word"));
        }
        Ok(UNK)
    }

    fn decode_space(&self, input: &mut BitReader<'_>, out: &mut Vec<u8>) -> Result<(), NGramError> {
        let id = self.space_unigram.decode(input)?;
        if id != UNK {
            let run = self
                .space_vocab
                .get(id as usize - 1)
                .ok_or(NGramError::Corrupt("whitespace id outside vocabulary"))?;
            out.extend_from_slice(run);
            return Ok(());
        }
        loop {
            let s = self.space_chars.decode(input)?;
            if s == END_OF_SPACE {
                return Ok(());
            }
            out.push(SPACE_BYTES[s as usize]);
        }
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        write_strings(&mut out, &self.vocab);
        write_strings(&mut out, &self.space_vocab);
        write_code(&mut out, &self.chars);
        write_code(&mut out, &self.space_chars);
        write_code(&mut out, &self.space_unigram);
        write_code(&mut out, &self.unigram);
        write_varint(&mut out, self.bigram.len() as u64);
        for (&c, code) in &self.bigram {
            write_varint(&mut out, c as u64);
            write_code(&mut out, code);
        }
        write_varint(&mut out, self.trigram.len() as u64);
        for (&(a, b), code) in &self.trigram {
            write_varint(&mut out, a as u64);
            write_varint(&mut out, b as u64);
            write_code(&mut out, code);
        }
        out
    }

    pub fn serialized_size_bytes(&self) -> u64 {
        self.serialize().len() as u64
    }

    pub fn deserialize(input: &[u8]) -> Result<Self, NGramError> {
        if input.len() < 5 || &input[..4] != MAGIC {
            return Err(NGramError::BadModel("missing NGHM magic"));
        }
        if input[4] != FORMAT_VERSION {
            return Err(NGramError::BadModel("unsupported version"));
        }
        let mut r = Cursor { input, pos: 5 };
        let vocab = r.strings()?;
        let space_vocab = r.strings()?;
        if space_vocab.iter().any(|s| s.iter().any(|&b| !is_space(b))) {
            return Err(NGramError::BadModel("whitespace vocabulary holds other bytes"));
        }
        let chars = r.code()?;
        let space_chars = r.code()?;
        let space_unigram = r.code()?;
        let unigram = r.code()?;
        if chars.len() != END_OF_WORD as usize + 1 || space_chars.len() != END_OF_SPACE as usize + 1 {
            return Err(NGramError::BadModel("character tables must cover their alphabet"));
        }
        let start = vocab.len() as u32 + 1;
        let mut bigram = BTreeMap::new();
        for _ in 0..r.varint()? {
            let c = r.varint()? as u32;
            if c > start || bigram.keys().next_back().is_some_and(|&p| p >= c) {
                return Err(NGramError::BadModel("bigram contexts out of order"));
            }
            bigram.insert(c, r.code()?);
        }
        let mut trigram = BTreeMap::new();
        for _ in 0..r.varint()? {
            let k = (r.varint()? as u32, r.varint()? as u32);
            if k.0 > start || k.1 > start || trigram.keys().next_back().is_some_and(|&p| p >= k) {
                return Err(NGramError::BadModel("trigram contexts out of order"));
            }
            trigram.insert(k, r.code()?);
        }
        if r.pos != input.len() {
            return Err(NGramError::BadModel("trailing bytes"));
        }
        let model = Self {
            vocab,
            space_vocab,
            trigram,
            bigram,
            unigram,
            chars,
            space_unigram,
            space_chars,
        };
        let word_trees = model.trigram.values().chain(model.bigram.values()).chain([&model.unigram]);
        for tree in word_trees {
            if !tree.contains(UNK) || tree.lengths().any(|(s, _)| s > model.vocab.len() as u32) {
                return Err(NGramError::BadModel("word tree lacks UNK or names unknown words"));
            }
        }
        if !model.space_unigram.contains(UNK)
            || model.space_unigram.lengths().any(|(s, _)| s > model.space_vocab.len() as u32)
        {
            return Err(NGramError::BadModel("whitespace tree lacks UNK or names unknown runs"));
        }
        Ok(model)
    }
}

fn write_strings(out: &mut Vec<u8>, items: &[Vec<u8>]) {
    write_varint(out, items.len() as u64);
    for s in items {
        write_varint(out, s.len() as u64);
        out.extend_from_slice(s);
    }
}

/// Symbol count, then per symbol the gap to the previous symbol and its length.
fn write_code(out: &mut Vec<u8>, code: &CanonicalCode) {
    write_varint(out, code.len() as u64);
    let mut prev = 0u32;
    for (i, (s, l)) in code.lengths().enumerate() {
        write_varint(out, (s - if i == 0 { 0 } else { prev + 1 }) as u64);
        out.push(l);
        prev = s;
    }
}

struct Cursor<'a> {
    input: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn varint(&mut self) -> Result<u64, NGramError> {
        let (v, n) = read_varint(&self.input[self.pos..])?;
        self.pos += n;
        Ok(v)
    }

    fn bytes(&mut self, n: usize) -> Result<&[u8], NGramError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.input.len());
        let end = end.ok_or(NGramError::BadModel("truncated"))?;
        let s = &self.input[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn strings(&mut self) -> Result<Vec<Vec<u8>>, NGramError> {
        let n = self.varint()?;
        let mut items: Vec<Vec<u8>> = Vec::new();
        for _ in 0..n {
            let len = self.varint()? as usize;
            let s = self.bytes(len)?.to_vec();
            if items.last().is_some_and(|p| *p >= s) {
                return Err(NGramError::BadModel("vocabulary not sorted"));
            }
            items.push(s);
        }
        Ok(items)
    }

    fn code(&mut self) -> Result<CanonicalCode, NGramError> {
        let n = self.varint()?;
        let mut lengths = Vec::new();
        let mut next = 0u64;
        for _ in 0..n {
            let s = next + self.varint()?;
            if s > u32::MAX as u64 {
                return Err(NGramError::BadModel("symbol out of range"));
            }
            let l = self.bytes(1)?[0];
            lengths.push((s as u32, l));
            next = s + 1;
        }
        Ok(CanonicalCode::from_lengths(&lengths)?)
    }
}
