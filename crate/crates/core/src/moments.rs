//! Closed-form one- and two-point functions of the magnetization
//! `𝒪_t = Σ_j Z_j`, including sums restricted to a fraction of the leaves.
//!
//! Finite-depth values are exact geometric sums. Pair correlations decay by
//! `g = 2^{1-2x}` per extra level of common ancestry, and all powers are
//! handled in log-space.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::algebra::{pair_expectation, Mat2, ModelParams, ScalingData};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionMode {
    Full,
    CompactSubtree,
    Dilute,
}

/// Selects `f = 2^{-t0}` of the leaves: one subtree of depth `t - t0`
/// (compact) or every `2^{t0}`-th leaf in depth-first order (dilute).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionSpec {
    pub mode: FractionMode,
    pub t0: u32,
}

impl FractionSpec {
    pub fn full() -> Self {
        FractionSpec { mode: FractionMode::Full, t0: 0 }
    }

    pub fn fraction(&self) -> f64 {
        if self.mode == FractionMode::Full {
            1.0
        } else {
            (-(self.t0 as f64) * LN_2).exp()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Apparatus,
    Encoding,
}

/// `ln(Σ_{r=a}^{b-1} g^r)` with `ln g = lg`, for `b > a`.
fn ln_geometric(lg: f64, a: u32, b: u32) -> f64 {
    debug_assert!(b > a);
    let n = (b - a) as f64;
    let base = a as f64 * lg;
    if lg.abs() < 1e-14 {
        return base + n.ln();
    }
    // Σ_{r<n} g^r = (g^n - 1)/(g - 1), written to stay finite for huge n.
    let num = if lg > 0.0 {
        n * lg + (-(-n * lg).exp()).ln_1p()
    } else {
        (-(n * lg).exp_m1()).ln()
    };
    let den = if lg > 0.0 { lg.exp_m1().ln() } else { (-lg.exp_m1()).ln() };
    base + num - den
}

/// `ln(e^a + e^b)`.
fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn ln_g(params: &ModelParams) -> f64 {
    (1.0 - 2.0 * params.x) * LN_2
}

/// Connected pair weight `cos²(θ/2)` multiplying the geometric sums.
fn pair_weight(params: &ModelParams) -> f64 {
    (0.5 * params.theta).cos().powi(2)
}

/// `ln η_t²` for any `t ≥ 0` (with `η_0² = 1`).
pub(crate) fn ln_eta_squared(params: &ModelParams, t: u32) -> f64 {
    let diag = t as f64 * LN_2;
    if t == 0 {
        return 0.0;
    }
    let pairs = diag + pair_weight(params).ln() + ln_geometric(ln_g(params), 0, t);
    ln_add(diag, pairs)
}

/// `η_t` for any `t ≥ 0`.
pub(crate) fn eta_at(params: &ModelParams, t: u32) -> f64 {
    (0.5 * ln_eta_squared(params, t)).exp()
}

/// Variance of the magnetization after `t ≥ 1` layers.
pub fn eta_squared(params: &ModelParams, t: u32) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidDepth("eta_squared requires t >= 1".into()));
    }
    Ok(ln_eta_squared(params, t).exp())
}

/// `log2 η_t²`, finite for depths where `η_t²` itself overflows.
pub fn log2_eta_squared(params: &ModelParams, t: u32) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidDepth("eta_squared requires t >= 1".into()));
    }
    Ok(ln_eta_squared(params, t) / LN_2)
}

/// Leading large-`t` behaviour of `η_t²`.
pub fn eta_squared_asymptotic(params: &ModelParams, t: u32) -> f64 {
    let g = ln_g(params).exp();
    let w = pair_weight(params);
    let t = t as f64;
    if params.is_apparatus() {
        w / (g - 1.0) * ((2.0 - 2.0 * params.x) * t * LN_2).exp()
    } else {
        (1.0 + w / (1.0 - g)) * (t * LN_2).exp()
    }
}

/// Signal `⟨O'_S 𝒪_t⟩` for a system probe `O'`.
pub fn mu(params: &ModelParams, t: u32, probe: &Mat2) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidDepth("mu requires t >= 1".into()));
    }
    let s = ScalingData::new(params);
    let pe = pair_expectation(probe, &s.o_x).re;
    Ok(params.coupling() * pe * ((1.0 - params.x) * t as f64 * LN_2).exp())
}

/// Signal-to-noise ratio `μ_t/η_t`.
pub fn signal_to_noise(params: &ModelParams, t: u32, probe: &Mat2) -> Result<f64> {
    Ok(mu(params, t, probe)? / eta_squared(params, t)?.sqrt())
}

/// `(μ_{t,f}, η²_{t,f})` for the magnetization summed over a leaf fraction.
pub fn fraction_moments(params: &ModelParams, t: u32, frac: &FractionSpec, probe: &Mat2) -> Result<(f64, f64)> {
    if frac.mode == FractionMode::Full || frac.t0 == 0 {
        return Ok((mu(params, t, probe)?, eta_squared(params, t)?));
    }
    if t <= frac.t0 {
        return Err(Error::InvalidDepth(format!("fraction needs t > t0, got t = {t}, t0 = {}", frac.t0)));
    }
    let t0 = frac.t0;
    let mu_f = frac.fraction() * mu(params, t, probe)?;
    let w = pair_weight(params).ln();
    let ln_eta = match frac.mode {
        FractionMode::CompactSubtree => ln_eta_squared(params, t - t0),
        FractionMode::Dilute => {
            if !params.is_apparatus() {
                return Err(Error::UnsupportedRegime(
                    "dilute fraction moments are only available for x < 1/2".into(),
                ));
            }
            let diag = (t - t0) as f64 * LN_2;
            let pairs = (t as f64 - 2.0 * t0 as f64) * LN_2 + w + ln_geometric(ln_g(params), t0, t);
            ln_add(diag, pairs)
        }
        FractionMode::Full => unreachable!(),
    };
    Ok((mu_f, ln_eta.exp()))
}

pub fn classify_phase(params: &ModelParams) -> Phase {
    if params.is_apparatus() {
        Phase::Apparatus
    } else {
        Phase::Encoding
    }
}
