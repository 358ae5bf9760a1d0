//! Two-time correlators of product involutions and the Leggett-Garg
//! combination `C₁₂ + C₂₃ + C₃₄ - C₁₄`.

use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{build_isometry, Mat2, ModelParams};
use crate::error::{Error, Result};

/// Involution `Q = aX + bY + cZ` tuned to the delay `t_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LGConfig {
    pub t_m: u32,
    pub epsilon: f64,
    pub abc: [f64; 3],
}

impl LGConfig {
    pub fn new(params: &ModelParams, t_m: u32) -> Self {
        let rate = std::f64::consts::SQRT_2.max(2.0 * params.theta.cos()).ln();
        let epsilon = (-(t_m as f64) * rate).exp();
        let (s, c) = epsilon.sin_cos();
        let (sh, ch) = (0.5 * params.theta).sin_cos();
        LGConfig {
            t_m,
            epsilon,
            abc: [c, s * ch, s * sh],
        }
    }

    pub fn operator(&self) -> Mat2 {
        let [a, b, c] = self.abc;
        Mat2::pauli_x().scale_re(a) + Mat2::pauli_y().scale_re(b) + Mat2::pauli_z().scale_re(c)
    }
}

/// Tolerance on `Q² = I`.
pub const INVOLUTION_TOL: f64 = 1e-10;

/// `Re tr(𝗏^s[Q 𝗏^{t-s}[Q]])/2` for `s ≤ t`.
pub fn keldysh_correlator(params: &ModelParams, s: u32, t: u32, q: &Mat2) -> Result<f64> {
    if s > t {
        return Err(Error::InvalidWindow { tau: s as usize, t: t as usize });
    }
    let err = (*q * *q).dist(&Mat2::identity());
    if err > INVOLUTION_TOL {
        return Err(Error::NotInvolution(err));
    }
    let v = build_isometry(params);
    let mut inner = *q;
    for _ in s..t {
        inner = v.v_super_fast(&inner);
    }
    let mut outer = *q * inner;
    for _ in 0..s {
        outer = v.v_super_fast(&outer);
    }
    Ok(0.5 * outer.trace().re)
}

pub fn lg_value(params: &ModelParams, times: [u32; 4], q: &Mat2) -> Result<f64> {
    Ok(lg_row(params, times, q)?.lg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LgRow {
    pub t: u32,
    pub c12: f64,
    pub c23: f64,
    pub c34: f64,
    pub c14: f64,
    pub lg: f64,
}

fn lg_row(params: &ModelParams, times: [u32; 4], q: &Mat2) -> Result<LgRow> {
    if !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(format!("times must increase strictly: {times:?}")));
    }
    let [t1, t2, t3, t4] = times;
    let c12 = keldysh_correlator(params, t1, t2, q)?;
    let c23 = keldysh_correlator(params, t2, t3, q)?;
    let c34 = keldysh_correlator(params, t3, t4, q)?;
    let c14 = keldysh_correlator(params, t1, t4, q)?;
    Ok(LgRow {
        t: t1,
        c12,
        c23,
        c34,
        c14,
        lg: c12 + c23 + c34 - c14,
    })
}

/// Leggett-Garg values on the windows `(t, t+1, t+2, t+3)`.
pub fn lg_scan(params: &ModelParams, t_m: u32, t_range: RangeInclusive<u32>) -> Result<Vec<LgRow>> {
    let q = LGConfig::new(params, t_m).operator();
    let ts: Vec<u32> = t_range.collect();
    ts.par_iter().map(|&t| lg_row(params, [t, t + 1, t + 2, t + 3], &q)).collect()
}

/// Start of the window with the largest value.
pub fn peak(rows: &[LgRow]) -> Option<LgRow> {
    rows.iter().copied().max_by(|a, b| a.lg.total_cmp(&b.lg))
}

pub const CSV_HEADER: [&str; 6] = ["t", "C12", "C23", "C34", "C14", "LG"];

pub fn write_csv<W: Write>(out: W, rows: &[LgRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let vals = [r.c12, r.c23, r.c34, r.c14, r.lg].map(|x| format!("{x:e}"));
        w.write_record(std::iter::once(r.t.to_string()).chain(vals))?;
    }
    w.flush()?;
    Ok(())
}
