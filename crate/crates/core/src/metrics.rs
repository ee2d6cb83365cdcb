//! Raw and adjusted compression rates.
//!
//! `gamma_r = compressed / original` and
//! `gamma_a = (compressed + model) / original`. Values near zero are good, one
//! means nothing was gained, and anything above one is a failed compression.

use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("original size is zero; compression rate is undefined")]
    EmptyOriginal,
}

pub fn raw_rate(compressed_bytes: u64, original_bytes: u64) -> Result<f64, MetricsError> {
    if original_bytes == 0 {
        return Err(MetricsError::EmptyOriginal);
    }
    Ok(compressed_bytes as f64 / original_bytes as f64)
}

pub fn adjusted_rate(compressed_bytes: u64, model_bytes: u64, original_bytes: u64) -> Result<f64, MetricsError> {
    raw_rate(compressed_bytes + model_bytes, original_bytes)
}

/// True when a rate shows the output grew.
pub fn is_failed(rate: f64) -> bool {
    rate > 1.0
}

/// Byte counts and derived rates for one (corpus, method) pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressionReport {
    pub corpus: String,
    pub method: String,
    pub original_bytes: u64,
    pub compressed_bytes: u64,
    pub model_bytes: u64,
    pub gamma_r: f64,
    pub gamma_a: f64,
    pub bits_per_byte: f64,
}

impl CompressionReport {
    pub fn new(
        corpus: impl Into<String>,
        method: impl Into<String>,
        original_bytes: u64,
        compressed_bytes: u64,
        model_bytes: u64,
    ) -> Result<Self, MetricsError> {
        let gamma_r = raw_rate(compressed_bytes, original_bytes)?;
        let gamma_a = adjusted_rate(compressed_bytes, model_bytes, original_bytes)?;
        Ok(Self {
            corpus: corpus.into(),
            method: method.into(),
            original_bytes,
            compressed_bytes,
            model_bytes,
            gamma_r,
            gamma_a,
            bits_per_byte: 8.0 * gamma_r,
        })
    }

    pub fn failed(&self) -> bool {
        is_failed(self.gamma_r)
    }

    /// Largest deviation between the stored rates and those recomputed from
    /// the stored byte counts.
    pub fn rate_drift(&self) -> f64 {
        let r = self.compressed_bytes as f64 / self.original_bytes as f64;
        let a = (self.compressed_bytes + self.model_bytes) as f64 / self.original_bytes as f64;
        (self.gamma_r - r)
            .abs()
            .max((self.gamma_a - a).abs())
            .max((self.bits_per_byte - 8.0 * r).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        assert_eq!(raw_rate(1, 0), Err(MetricsError::EmptyOriginal));
        assert_eq!(raw_rate(777, 777).unwrap(), 1.0);
        let r = raw_rate(1_100, 1_000).unwrap();
        assert!((r - 1.1).abs() < 1e-15);
        assert!(is_failed(r));
        assert!(!is_failed(1.0));
        assert_eq!(adjusted_rate(5, 0, 10).unwrap(), raw_rate(5, 10).unwrap());
    }

    #[test]
    fn report_invariants() {
        let rep = CompressionReport::new("c", "m", 1000, 300, 50).unwrap();
        assert!(rep.gamma_a >= rep.gamma_r);
        assert_eq!(rep.bits_per_byte, 8.0 * rep.gamma_r);
        assert!(rep.rate_drift() < 1e-12);
        assert!(CompressionReport::new("c", "m", 0, 0, 0).is_err());
    }
}
