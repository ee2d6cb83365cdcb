//! Quantizing a predictor's parameters and measuring what that costs in
//! compression.
//!
//! The predictor is [`StaticContextModel`]: a fixed table of next-byte
//! log-probabilities, one row per hashed order-k context. Its table is the
//! weight matrix handed to the quantizers; GPTQ is calibrated with the
//! model's own next-byte distributions at positions sampled from the corpus.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::{gptq_quantize, hqq_quantize, packed_bytes, rtn_quantize, GptqConfig, HqqConfig, Matrix, QuantConfig, QuantError};
use crate::codecs::{ac_encode, CodecError};
use crate::coder::Distribution;
use crate::metrics::{CompressionReport, MetricsError};
use crate::predictor::{quantize_probabilities, PredictError, Predictor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

const ALPHABET: usize = 256;
/// Bits per unquantized parameter (16-bit floats).
pub const FULL_PRECISION_BITS: u8 = 16;

/// Fixed next-byte model backed by a `rows x 256` log-probability table.
#[derive(Debug, Clone)]
pub struct StaticContextModel {
    order: usize,
    table: Matrix,
    dists: Vec<Distribution>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl StaticContextModel {
    /// Counts next-byte frequencies per hashed context; each row holds
    /// `ln((count + 1/2) / (total + 128))`.
    pub fn train(corpus: &[u8], order: usize, rows: usize) -> Result<Self, EvalError> {
        if !rows.is_power_of_two() || order == 0 || order > 4 {
            return Err(QuantError::Config("rows must be a power of two and order in 1..=4").into());
        }
        let mut counts = Matrix::zeros(rows, ALPHABET);
        let mut history: Vec<u32> = Vec::with_capacity(order);
        for &b in corpus {
            let r = row_index(&history, order, rows);
            counts[(r, b as usize)] += 1.0;
            push_history(&mut history, b as u32, order);
        }
        for r in 0..rows {
            let total: f64 = counts.row(r).iter().sum();
            for v in counts.row_mut(r) {
                *v = libm::log((*v + 0.5) / (total + 0.5 * ALPHABET as f64));
            }
        }
        Self::from_table(order, counts)
    }

    pub fn from_table(order: usize, table: Matrix) -> Result<Self, EvalError> {
        if table.cols() != ALPHABET || !table.rows().is_power_of_two() {
            return Err(QuantError::Shape("table must be (power of two) x 256").into());
        }
        if !table.is_finite() {
            return Err(QuantError::NonFinite.into());
        }
        let dists = (0..table.rows())
            .map(|r| quantize_probabilities(&softmax(table.row(r))))
            .collect::<Result<_, _>>()?;
        Ok(Self { order, table, dists })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn table(&self) -> &Matrix {
        &self.table
    }

    pub fn parameter_count(&self) -> u64 {
        (self.table.rows() * self.table.cols()) as u64
    }

    /// Model distributions at `samples` evenly spaced corpus positions, one
    /// column each.
    pub fn calibration(&self, corpus: &[u8], samples: usize) -> Matrix {
        let samples = samples.max(1);
        let mut x = Matrix::zeros(ALPHABET, samples);
        let tokens: Vec<u32> = corpus.iter().map(|&b| b as u32).collect();
        for k in 0..samples {
            let pos = if tokens.is_empty() { 0 } else { k * tokens.len() / samples };
            let row = self.table.row(row_index(&tokens[..pos], self.order, self.table.rows()));
            for (i, p) in softmax(row).into_iter().enumerate() {
                x[(i, k)] = p;
            }
        }
        x
    }
}

fn push_history(history: &mut Vec<u32>, token: u32, order: usize) {
    if history.len() == order {
        history.remove(0);
    }
    history.push(token);
}

fn row_index(context: &[u32], order: usize, rows: usize) -> usize {
    let mut key: u64 = 0;
    for k in 0..order {
        let t = if k < context.len() { context[context.len() - 1 - k] as u64 + 1 } else { 0 };
        key = (key << 9) | t;
    }
    let h = key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    (h >> (64 - rows.trailing_zeros().max(1))) as usize & (rows - 1)
}

impl Predictor for StaticContextModel {
    fn alphabet_size(&self) -> usize {
        ALPHABET
    }

    fn next_distribution(&mut self, context: &[u32]) -> Result<Distribution, PredictError> {
        Ok(self.dists[row_index(context, self.order, self.table.rows())].clone())
    }

    fn update(&mut self, _: &[u32], _: u32) -> Result<(), PredictError> {
        Ok(())
    }

    fn model_size_bytes(&self) -> u64 {
        packed_bytes(self.parameter_count(), FULL_PRECISION_BITS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantizer {
    Rtn,
    Gptq(GptqConfig),
    Hqq(HqqConfig),
}

impl Quantizer {
    pub fn name(&self) -> &'static str {
        match self {
            Quantizer::Rtn => "rtn",
            Quantizer::Gptq(_) => "gptq",
            Quantizer::Hqq(_) => "hqq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub quantizer: Quantizer,
    /// 16 bits leaves the table untouched.
    pub grid: QuantConfig,
    pub calibration_samples: usize,
}

/// Quantizes the model's table, compresses `corpus` with the result and
/// reports the rates. Model bytes are the packed codes plus grid metadata,
/// or 16 bits per parameter when unquantized.
pub fn quantized_predictor_eval(
    model: &StaticContextModel,
    cfg: &EvalConfig,
    corpus: &[u8],
    corpus_id: &str,
) -> Result<CompressionReport, EvalError> {
    let (quantized, model_bytes, label): (StaticContextModel, u64, String) = if cfg.grid.bits >= FULL_PRECISION_BITS {
        (model.clone(), model.model_size_bytes(), String::from("fp16"))
    } else {
        let table = model.table();
        let q = match cfg.quantizer {
            Quantizer::Rtn => rtn_quantize(table, &cfg.grid)?,
            Quantizer::Gptq(g) => gptq_quantize(table, &model.calibration(corpus, cfg.calibration_samples), &cfg.grid, &g)?,
            Quantizer::Hqq(h) => hqq_quantize(table, &cfg.grid, &h)?,
        };
        let m = StaticContextModel::from_table(model.order, q.dequantize())?;
        (m, q.storage_bytes(), format!("{}-{}bit", cfg.quantizer.name(), cfg.grid.bits))
    };
    let tokens: Vec<u32> = corpus.iter().map(|&b| b as u32).collect();
    let compressed = ac_encode(quantized, &tokens)?;
    let method = format!("static-o{}/{}", model.order, label);
    Ok(CompressionReport::new(
        corpus_id,
        method,
        corpus.len() as u64,
        compressed.len() as u64,
        model_bytes,
    )?)
}
