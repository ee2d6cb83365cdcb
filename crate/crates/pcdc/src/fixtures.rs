//! Deterministic synthetic corpora and the fixture vocabulary.
//!
//! The English-like generator draws words from a Zipf-distributed lexicon and
//! chains them with a sparse bigram preference, so both short-context models
//! and word n-grams find structure, and more training text keeps helping.

use std::collections::{BTreeMap, HashMap};

use pcdc_core::tokenizers::byte_token_name;
use rand::distributions::{Distribution as _, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Id of byte-fallback token `<0x00>`; byte `b` maps to `BYTE_TOKEN_BASE + b`.
pub const BYTE_TOKEN_BASE: u32 = 200;
pub const LEXICON_SIZE: usize = 20_000;

pub const ENGLISH_SEED: u64 = 1;
pub const NGRAM_TRAIN_SEED: u64 = 2;
pub const CODE_SEED: u64 = 3;
pub const PDF_PROSE_SEED: u64 = 5;
pub const VOCAB_SEED: u64 = 11;
pub const NGRAM_HELD_OUT_SEED: u64 = 99;
pub const VOCAB_WORD_PIECES: usize = 1000;

const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "to", "a", "in", "is", "that", "for", "it", "as", "was", "with", "be", "by", "on", "not", "he",
    "this", "are", "or", "his", "from", "at", "which", "but", "have", "an", "had", "they", "you", "were", "their",
    "one", "all", "we", "can", "her", "has", "there", "been", "if", "more", "when", "will", "would", "who", "so", "no",
];

const ONSETS: &[&str] = &[
    "", "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "st", "tr", "pr", "ch",
    "sh", "th", "bl", "gr", "pl", "cr", "str",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ea", "ou", "ai", "io", "y"];
const CODAS: &[&str] = &["", "", "n", "r", "s", "t", "l", "m", "nd", "st", "ng", "ck", "rt", "ll"];

struct Lexicon {
    words: Vec<String>,
    zipf: WeightedIndex<f64>,
    successors: Vec<Vec<u32>>,
}

fn syllable(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    s.push_str(ONSETS.choose(rng).unwrap());
    s.push_str(VOWELS.choose(rng).unwrap());
    s.push_str(CODAS.choose(rng).unwrap());
    s
}

impl Lexicon {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut words: Vec<String> = FUNCTION_WORDS.iter().map(|s| s.to_string()).collect();
        let mut seen: std::collections::HashSet<String> = words.iter().cloned().collect();
        while words.len() < LEXICON_SIZE {
            // Frequent ranks get shorter words, as in natural language.
            let rank = words.len();
            let max_syll = if rank < 500 { 2 } else if rank < 5000 { 3 } else { 4 };
            let n = rng.gen_range(1..=max_syll);
            let w: String = (0..n).map(|_| syllable(rng)).collect();
            if w.len() > 1 && seen.insert(w.clone()) {
                words.push(w);
            }
        }
        let weights: Vec<f64> = (0..LEXICON_SIZE).map(|r| 1.0 / (r as f64 + 2.7).powf(1.05)).collect();
        let zipf = WeightedIndex::new(&weights).expect("positive weights");
        let successors = (0..LEXICON_SIZE)
            .map(|_| (0..6).map(|_| zipf.sample(rng) as u32).collect())
            .collect();
        Self { words, zipf, successors }
    }

    fn next_word(&self, prev: Option<u32>, rng: &mut ChaCha8Rng) -> u32 {
        match prev {
            Some(p) if rng.gen_bool(0.55) => {
                let succ = &self.successors[p as usize];
                // Earlier successors are preferred.
                let i = (rng.gen::<f64>().powi(2) * succ.len() as f64) as usize;
                succ[i.min(succ.len() - 1)]
            }
            _ => self.zipf.sample(rng) as u32,
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

/// About `len` bytes of paragraphs of English-like prose. Output for a given
/// seed is a prefix of the output for any larger `len`.
pub fn english_like(seed: u64, len: usize) -> Vec<u8> {
    let mut lex_rng = ChaCha8Rng::seed_from_u64(0x1e81c0);
    let lex = Lexicon::new(&mut lex_rng);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(len + 256);
    let mut prev = None;
    while out.len() < len {
        let sentences = rng.gen_range(3..8);
        for s in 0..sentences {
            let n = rng.gen_range(6..24);
            for i in 0..n {
                let id = lex.next_word(prev, &mut rng);
                prev = Some(id);
                let w = &lex.words[id as usize];
                if i == 0 {
                    out.push_str(&capitalize(w));
                } else {
                    out.push_str(w);
                }
                if i + 1 < n {
                    if rng.gen_bool(0.07) {
                        out.push(',');
                    }
                    out.push(' ');
                }
            }
            out.push(if rng.gen_bool(0.9) { '.' } else { '?' });
            if s + 1 < sentences {
                out.push(' ');
            }
        }
        out.push_str("\n\n");
    }
    out.truncate(len);
    out.into_bytes()
}

const KEYWORDS: &[&str] = &["fn", "let", "if", "else", "for", "while", "return", "match", "struct", "impl", "pub", "mut"];
const TYPES: &[&str] = &["u8", "u32", "u64", "usize", "f64", "bool", "String", "Vec<u32>", "Option<usize>"];

/// About `len` bytes of brace-structured, indented pseudo source code.
pub fn code_like(seed: u64, len: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idents: Vec<String> = (0..400)
        .map(|i| {
            let parts: Vec<String> = (0..rng.gen_range(1..4)).map(|_| syllable(&mut rng)).collect();
            if i % 5 == 0 {
                parts.iter().map(|p| capitalize(p)).collect()
            } else {
                parts.join("_")
            }
        })
        .collect();
    let weights: Vec<f64> = (0..idents.len()).map(|r| 1.0 / (r as f64 + 1.0)).collect();
    let pick = WeightedIndex::new(&weights).unwrap();
    let mut out = String::with_capacity(len + 256);
    while out.len() < len {
        let name = &idents[pick.sample(&mut rng)];
        let ty = TYPES.choose(&mut rng).unwrap();
        out.push_str(&format!("pub fn {name}(x: {ty}, n: usize) -> {ty} {{\n"));
        let mut depth = 1;
        for _ in 0..rng.gen_range(3..15) {
            let indent = "    ".repeat(depth);
            let a = &idents[pick.sample(&mut rng)];
            let b = &idents[pick.sample(&mut rng)];
            match rng.gen_range(0..6) {
                0 => out.push_str(&format!("{indent}let {a} = {b}(x, {});\n", rng.gen_range(0..100))),
                1 if depth < 4 => {
                    let kw = KEYWORDS[2 + rng.gen_range(0..3)];
                    out.push_str(&format!("{indent}{kw} {a} < n {{\n"));
                    depth += 1;
                }
                2 if depth > 1 => {
                    depth -= 1;
                    out.push_str(&format!("{}}}\n", "    ".repeat(depth)));
                }
                3 => out.push_str(&format!("{indent}// {} {}\n", b.replace('_', " "), a.replace('_', " "))),
                _ => out.push_str(&format!("{indent}{a}.{b}({a} + {});\n", rng.gen_range(1..10))),
            }
        }
        while depth > 1 {
            depth -= 1;
            out.push_str(&format!("{}}}\n", "    ".repeat(depth)));
        }
        out.push_str("    x\n}\n\n");
    }
    out.truncate(len);
    out.into_bytes()
}

/// Short multilingual sample with two- to four-byte UTF-8 sequences.
pub const NON_ASCII_SAMPLE: &str = "Ça va? Grüße aus Köln, señor. Ελληνικά κείμενα. Русский текст. \
日本語のテキスト。中文文本。한국어 텍스트. Emoji: 😀🚀✨. Ærøskøbing, Þórsmörk, naïve café.\n";

/// Builds the fixture vocabulary: single printable ASCII characters and a
/// few Latin-1 letters, then the most frequent words of `corpus` (bare and
/// with a leading space), with byte tokens `<0xHH>` at ids 200..=455.
/// Text pieces fill ids below 200 first, then continue from 456.
pub fn build_vocab(corpus: &[u8], word_pieces: usize) -> BTreeMap<String, u32> {
    let mut pieces: Vec<String> = (0x20u8..0x7F).map(|b| (b as char).to_string()).collect();
    pieces.extend(["\n", "\n\n", "  ", "    "].iter().map(|s| s.to_string()));
    pieces.extend("éèàüöäñçßøåÉÜ".chars().map(|c| c.to_string()));
    let mut counts: HashMap<&[u8], u64> = HashMap::new();
    for w in corpus.split(|b| !b.is_ascii_alphabetic()).filter(|w| w.len() > 1) {
        *counts.entry(w).or_default() += 1;
    }
    let mut ranked: Vec<(&[u8], u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    for (w, _) in ranked.into_iter().take(word_pieces) {
        let w = String::from_utf8_lossy(w).into_owned();
        pieces.push(format!(" {w}"));
        pieces.push(w);
    }
    let mut vocab = BTreeMap::new();
    for b in 0..=255u8 {
        vocab.insert(byte_token_name(b), BYTE_TOKEN_BASE + b as u32);
    }
    let mut next = 0u32;
    for p in pieces {
        if vocab.contains_key(&p) {
            continue;
        }
        if next == BYTE_TOKEN_BASE {
            next += 256;
        }
        vocab.insert(p, next);
        next += 1;
    }
    vocab
}

/// The bundled vocabulary file, as written by `pcdc fixtures`.
pub fn fixture_vocab_json() -> String {
    let vocab = build_vocab(&english_like(VOCAB_SEED, 1 << 20), VOCAB_WORD_PIECES);
    serde_json::to_string_pretty(&vocab).expect("string map serializes") + "\n"
}
