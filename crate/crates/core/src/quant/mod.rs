//! Post-training weight quantization: round-to-nearest, GPTQ and HQQ over a
//! per-group affine grid, plus an evaluation path that quantizes a static
//! predictor's tables and measures the compression it still achieves.
//!
//! Codes are `round(w / s + z)` clamped to `[0, 2^bits - 1]` and dequantize to
//! `s * (code - z)`. Groups are runs of `group_size` consecutive columns
//! within a row, each with its own `(s, z)`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub mod eval;
pub mod gptq;
pub mod hqq;

pub use gptq::{gptq_quantize, GptqConfig};
pub use hqq::{hqq_quantize, hqq_quantize_traced, HqqConfig, HqqTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("matrix holds a non-finite value")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("Hessian is not positive definite; increase the damping")]
    NotPositiveDefinite,
    #[error("invalid quantizer configuration: {0}")]
    Config(&'static str),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub type WeightMatrix = Matrix;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, QuantError> {
        if data.len() != rows * cols {
            return Err(QuantError::Shape("data length differs from rows * cols"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, QuantError> {
        if self.cols != other.rows {
            return Err(QuantError::Shape("inner dimensions differ"));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(r).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * self^T`.
    pub fn gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, QuantError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(QuantError::Shape("operands differ in shape"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Lower-triangular `L` with `self = L L^T`.
    pub fn cholesky(&self) -> Result<Matrix, QuantError> {
        if self.rows != self.cols {
            return Err(QuantError::Shape("Cholesky needs a square matrix"));
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(QuantError::NotPositiveDefinite);
            }
            let d = libm::sqrt(d);
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut v = self[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Ok(l)
    }

    /// Inverse of a symmetric positive definite matrix.
    pub fn spd_inverse(&self) -> Result<Matrix, QuantError> {
        let l = self.cholesky()?;
        let n = self.rows;
        // L^{-1} by forward substitution, then (L^{-1})^T L^{-1}.
        let mut linv = Matrix::zeros(n, n);
        for c in 0..n {
            for i in c..n {
                let mut v = if i == c { 1.0 } else { 0.0 };
                for k in c..i {
                    v -= l[(i, k)] * linv[(k, c)];
                }
                linv[(i, c)] = v / l[(i, i)];
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut v = 0.0;
                for k in i..n {
                    v += linv[(k, i)] * linv[(k, j)];
                }
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        Ok(inv)
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Bit width and grouping of the quantization grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantConfig {
    pub bits: u8,
    pub group_size: usize,
}

impl QuantConfig {
    pub fn new(bits: u8) -> Self {
        Self { bits, group_size: 64 }
    }

    pub fn with_group_size(mut self, group_size: usize) -> Self {
        self.group_size = group_size;
        self
    }

    pub fn validate(&self) -> Result<(), QuantError> {
        if !(1..=16).contains(&self.bits) {
            return Err(QuantError::Config("bits must be between 1 and 16"));
        }
        if self.group_size == 0 {
            return Err(QuantError::Config("group size must be positive"));
        }
        Ok(())
    }

    pub fn max_code(&self) -> f64 {
        ((1u32 << self.bits) - 1) as f64
    }

    pub fn groups_per_row(&self, cols: usize) -> usize {
        cols.div_ceil(self.group_size)
    }
}

/// Scale and zero-point of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupParams {
    pub scale: f64,
    pub zero: f64,
}

impl GroupParams {
    /// Min-max parameters: `s = (max - min) / (2^b - 1)`, `z = -min / s`. A
    /// constant group gets `s = 1`, `z = -min`, so every code is 0 and
    /// dequantizes exactly.
    pub fn min_max(values: &[f64], cfg: &QuantConfig) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == min {
            return Self { scale: 1.0, zero: -min };
        }
        let scale = (max - min) / cfg.max_code();
        Self {
            scale,
            zero: -min / scale,
        }
    }

    pub fn code(&self, w: f64, max_code: f64) -> u16 {
        libm::round(w / self.scale + self.zero).clamp(0.0, max_code) as u16
    }

    pub fn dequant(&self, code: u16) -> f64 {
        self.scale * (code as f64 - self.zero)
    }
}

/// Integer codes with per-group scale and zero-point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub config: QuantConfig,
    pub codes: Vec<u16>,
    /// Indexed by `row * groups_per_row + group`.
    pub groups: Vec<GroupParams>,
}

impl QuantizedMatrix {
    pub fn group_of(&self, r: usize, c: usize) -> &GroupParams {
        &self.groups[r * self.config.groups_per_row(self.cols) + c / self.config.group_size]
    }

    pub fn code(&self, r: usize, c: usize) -> u16 {
        self.codes[r * self.cols + c]
    }

    pub fn dequantize(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |r, c| self.group_of(r, c).dequant(self.code(r, c)))
    }

    /// Stored size: packed codes plus 4 bytes (two 16-bit floats) per group.
    pub fn storage_bytes(&self) -> u64 {
        packed_bytes(self.codes.len() as u64, self.config.bits) + 4 * self.groups.len() as u64
    }
}

pub fn packed_bytes(params: u64, bits: u8) -> u64 {
    (params * bits as u64).div_ceil(8)
}

/// Round-to-nearest onto the min-max grid of each group.
pub fn rtn_quantize(w: &Matrix, cfg: &QuantConfig) -> Result<QuantizedMatrix, QuantError> {
    cfg.validate()?;
    if !w.is_finite() {
        return Err(QuantError::NonFinite);
    }
    let gpr = cfg.groups_per_row(w.cols);
    let mut codes = Vec::with_capacity(w.rows * w.cols);
    let mut groups = Vec::with_capacity(w.rows * gpr);
    let max_code = cfg.max_code();
    for r in 0..w.rows {
        for chunk in w.row(r).chunks(cfg.group_size) {
            let g = GroupParams::min_max(chunk, cfg);
            codes.extend(chunk.iter().map(|&v| g.code(v, max_code)));
            groups.push(g);
        }
    }
    Ok(QuantizedMatrix {
        rows: w.rows,
        cols: w.cols,
        config: *cfg,
        codes,
        groups,
    })
}

/// `||W X - W' X||_F^2`.
pub fn layer_objective(w: &Matrix, quantized: &Matrix, x: &Matrix) -> Result<f64, QuantError> {
    Ok(w.sub(quantized)?.matmul(x)?.frobenius_sq())
}

/// Sum of `|e|^p` over the weight error.
pub fn lp_loss(w: &Matrix, quantized: &Matrix, p: f64) -> Result<f64, QuantError> {
    Ok(w.sub(quantized)?.data.iter().map(|e| libm::pow(libm::fabs(*e), p)).sum())
}
