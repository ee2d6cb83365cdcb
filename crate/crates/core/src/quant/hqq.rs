//! HQQ: calibration-free zero-point optimization by half-quadratic splitting.
//!
//! With the scale frozen at its min-max value, each group alternates
//!
//! * `W_e <- argmin |W_e|_p^p + beta/2 ||W_e - (W - deq(q(W)))||^2`
//!   (solved exactly per element),
//! * `z <- mean(q(W) - (W - W_e) / s)`, kept only if it does not raise the
//!   objective,
//! * `beta <- alpha * beta`.
//!
//! The reported objective is the split objective divided by `beta`. It has the
//! same minimizers at every step and, unlike the raw value, cannot grow when
//! `beta` is raised, so it is non-increasing over the run. The returned grid
//! uses, per group, the zero-point with the lowest `sum |W - deq|^p` seen,
//! starting from the min-max one.

use alloc::vec;
use alloc::vec::Vec;

use super::{GroupParams, Matrix, QuantConfig, QuantError, QuantizedMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HqqConfig {
    pub p: f64,
    pub beta0: f64,
    pub alpha: f64,
    pub iters: usize,
}

impl Default for HqqConfig {
    fn default() -> Self {
        Self {
            p: 0.7,
            beta0: 10.0,
            alpha: 1.1,
            iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HqqTrace {
    /// Split objective over `beta`, before the first iteration and after each one.
    pub objective: Vec<f64>,
    /// `sum |W - deq|^p` at the same points.
    pub lp_loss: Vec<f64>,
}

fn pow_abs(x: f64, p: f64) -> f64 {
    libm::pow(libm::fabs(x), p)
}

/// `argmin_x |x|^p + beta/2 (x - r)^2`.
pub fn lp_prox(r: f64, beta: f64, p: f64) -> f64 {
    let a = libm::fabs(r);
    if a == 0.0 {
        return 0.0;
    }
    let g = |x: f64| pow_abs(x, p) + 0.5 * beta * (x - a) * (x - a);
    let h = |x: f64| p * libm::pow(x, p - 1.0) + beta * (x - a);
    let x = if p < 1.0 {
        // h is convex on (0, inf) with its minimum at x0; a root exists only
        // if h(x0) <= 0, and Newton from the right converges to the larger one.
        let x0 = libm::pow(p * (1.0 - p) / beta, 1.0 / (2.0 - p));
        if x0 >= a || h(x0) > 0.0 {
            0.0
        } else {
            let mut x = a;
            for _ in 0..100 {
                let d = p * (p - 1.0) * libm::pow(x, p - 2.0) + beta;
                let next = x - h(x) / d;
                if !(next > x0) || (x - next).abs() <= 1e-15 * a {
                    x = next.max(x0);
                    break;
                }
                x = next;
            }
            if g(x) < g(0.0) {
                x
            } else {
                0.0
            }
        }
    } else if p == 1.0 {
        (a - 1.0 / beta).max(0.0)
    } else {
        // h is increasing with h(0) < 0 < h(a).
        let (mut lo, mut hi) = (0.0, a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    libm::copysign(x, r)
}

struct Group<'a> {
    values: &'a [f64],
    scale: f64,
    max_code: f64,
    p: f64,
}

impl Group<'_> {
    fn params(&self, zero: f64) -> GroupParams {
        GroupParams { scale: self.scale, zero }
    }

    fn residual(&self, zero: f64, i: usize) -> f64 {
        let g = self.params(zero);
        let v = self.values[i];
        v - g.dequant(g.code(v, self.max_code))
    }

    fn objective(&self, we: &[f64], zero: f64, beta: f64) -> f64 {
        let mut phi = 0.0;
        let mut quad = 0.0;
        for (i, &e) in we.iter().enumerate() {
            phi += pow_abs(e, self.p);
            let d = e - self.residual(zero, i);
            quad += d * d;
        }
        phi / beta + 0.5 * quad
    }

    fn lp_loss(&self, zero: f64) -> f64 {
        (0..self.values.len()).map(|i| pow_abs(self.residual(zero, i), self.p)).sum()
    }
}

pub fn hqq_quantize(w: &Matrix, cfg: &QuantConfig, hqq: &HqqConfig) -> Result<QuantizedMatrix, QuantError> {
    hqq_quantize_traced(w, cfg, hqq).map(|(q, _)| q)
}

pub fn hqq_quantize_traced(
    w: &Matrix,
    cfg: &QuantConfig,
    hqq: &HqqConfig,
) -> Result<(QuantizedMatrix, HqqTrace), QuantError> {
    cfg.validate()?;
    if !(hqq.p > 0.0) || !(hqq.beta0 > 0.0) || !(hqq.alpha > 1.0) {
        return Err(QuantError::Config("need p > 0, beta0 > 0 and alpha > 1"));
    }
    if !w.is_finite() {
        return Err(QuantError::NonFinite);
    }
    let max_code = cfg.max_code();
    let mut trace = HqqTrace {
        objective: vec![0.0; hqq.iters + 1],
        lp_loss: vec![0.0; hqq.iters + 1],
    };
    let mut codes = Vec::with_capacity(w.rows() * w.cols());
    let mut groups = Vec::new();
    for r in 0..w.rows() {
        for values in w.row(r).chunks(cfg.group_size) {
            let init = GroupParams::min_max(values, cfg);
            let group = Group {
                values,
                scale: init.scale,
                max_code,
                p: hqq.p,
            };
            let mut zero = init.zero;
            let mut we = vec![0.0; values.len()];
            let mut beta = hqq.beta0;
            let mut best = (group.lp_loss(zero), zero);
            trace.objective[0] += group.objective(&we, zero, beta);
            trace.lp_loss[0] += best.0;
            for t in 1..=hqq.iters {
                for (i, e) in we.iter_mut().enumerate() {
                    *e = lp_prox(group.residual(zero, i), beta, hqq.p);
                }
                let g = group.params(zero);
                let candidate = values
                    .iter()
                    .zip(&we)
                    .map(|(&v, &e)| g.code(v, max_code) as f64 - (v - e) / group.scale)
                    .sum::<f64>()
                    / values.len() as f64;
                if group.objective(&we, candidate, beta) <= group.objective(&we, zero, beta) {
                    zero = candidate;
                }
                beta *= hqq.alpha;
                let loss = group.lp_loss(zero);
                if loss < best.0 {
                    best = (loss, zero);
                }
                trace.objective[t] += group.objective(&we, zero, beta);
                trace.lp_loss[t] += loss;
            }
            let g = group.params(best.1);
            codes.extend(values.iter().map(|&v| g.code(v, max_code)));
            groups.push(g);
        }
    }
    let q = QuantizedMatrix {
        rows: w.rows(),
        cols: w.cols(),
        config: *cfg,
        codes,
        groups,
    };
    Ok((q, trace))
}
