//! Allocation-only core of the `pcdc` compression toolkit.
//!
//! Everything in this crate is pure computation over byte and token slices:
//! a finite-precision range coder driven by per-step [`Distribution`]s, the
//! [`Predictor`] abstraction with adaptive context models, a word-level
//! n-gram chain with per-context Huffman codes, rank and prefix-code token
//! codecs, byte-stream tokenization strategies, GPTQ/HQQ/RTN weight
//! quantizers, and compression-rate accounting. File formats, transports and
//! the command line live in the `pcdc` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod bits;
pub mod codecs;
pub mod coder;
pub mod huffman;
pub mod metrics;
pub mod ngram;
pub mod predictor;
pub mod quant;
pub mod tokenizers;

pub use coder::{entropy, CoderError, Decoder, Distribution, Encoder, TOTAL};
pub use metrics::{adjusted_rate, raw_rate, CompressionReport};
pub use ngram::NGramModel;
pub use predictor::{quantize_probabilities, ContextModel, ContextModelConfig, PredictError, Predictor};
pub use quant::{Matrix, QuantConfig, QuantizedMatrix};
