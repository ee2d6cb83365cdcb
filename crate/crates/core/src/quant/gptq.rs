//! GPTQ: column-by-column quantization with error feedback through the
//! Cholesky factor of the inverse Hessian `H = 2 X X^T + lambda I`.

use alloc::vec::Vec;

use super::{GroupParams, Matrix, QuantConfig, QuantError, QuantizedMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GptqConfig {
    pub block_size: usize,
    /// `lambda = damp_ratio * mean(diag(2 X X^T))`.
    pub damp_ratio: f64,
}

impl Default for GptqConfig {
    fn default() -> Self {
        Self {
            block_size: 128,
            damp_ratio: 0.01,
        }
    }
}

/// Damped Hessian `2 X X^T + lambda I` for calibration inputs `x`
/// (one column per sample, one row per input feature).
pub fn hessian(x: &Matrix, damp_ratio: f64) -> Matrix {
    let mut h = x.gram();
    let n = h.rows();
    for v in h.data.iter_mut() {
        *v *= 2.0;
    }
    let mean_diag = (0..n).map(|i| h[(i, i)]).sum::<f64>() / n.max(1) as f64;
    let lambda = damp_ratio * mean_diag;
    for i in 0..n {
        h[(i, i)] += lambda;
    }
    h
}

/// Quantizes `w` (rows x cols) given calibration inputs `x` (cols x samples).
///
/// Group parameters are taken from the error-updated weights when the first
/// column of each group is reached.
pub fn gptq_quantize(
    w: &Matrix,
    x: &Matrix,
    cfg: &QuantConfig,
    gptq: &GptqConfig,
) -> Result<QuantizedMatrix, QuantError> {
    cfg.validate()?;
    if gptq.block_size == 0 || !(gptq.damp_ratio >= 0.0) {
        return Err(QuantError::Config("block size must be positive and damping non-negative"));
    }
    if !w.is_finite() || !x.is_finite() {
        return Err(QuantError::NonFinite);
    }
    if x.rows() != w.cols() {
        return Err(QuantError::Shape("calibration rows must equal weight columns"));
    }
    let (rows, cols) = (w.rows(), w.cols());
    let h = hessian(x, gptq.damp_ratio);
    // Upper factor U of H^-1 = U^T U.
    let u = h.spd_inverse()?.cholesky()?.transpose();

    let mut w = w.clone();
    let gpr = cfg.groups_per_row(cols);
    let max_code = cfg.max_code();
    let mut codes = alloc::vec![0u16; rows * cols];
    let mut groups = alloc::vec![GroupParams { scale: 1.0, zero: 0.0 }; rows * gpr];
    let b = gptq.block_size;
    let mut err = Matrix::zeros(rows, b);

    let mut i = 0;
    while i < cols {
        let end = (i + b).min(cols);
        for j in i..end {
            if j % cfg.group_size == 0 {
                let g_end = (j + cfg.group_size).min(cols);
                for r in 0..rows {
                    groups[r * gpr + j / cfg.group_size] = GroupParams::min_max(&w.row(r)[j..g_end], cfg);
                }
            }
            let d = u[(j, j)];
            for r in 0..rows {
                let g = groups[r * gpr + j / cfg.group_size];
                let code = g.code(w[(r, j)], max_code);
                codes[r * cols + j] = code;
                let e = (w[(r, j)] - g.dequant(code)) / d;
                err[(r, j - i)] = e;
                let row = w.row_mut(r);
                for k in j..end {
                    row[k] -= e * u[(j, k)];
                }
            }
        }
        for r in 0..rows {
            let e_row: Vec<f64> = err.row(r)[..end - i].to_vec();
            let row = w.row_mut(r);
            for (t, &e) in e_row.iter().enumerate() {
                if e == 0.0 {
                    continue;
                }
                let u_row = &u.row(i + t)[end..];
                for (v, &uu) in row[end..].iter_mut().zip(u_row) {
                    *v -= e * uu;
                }
            }
        }
        i = end;
    }
    Ok(QuantizedMatrix {
        rows,
        cols,
        config: *cfg,
        codes,
        groups,
    })
}
