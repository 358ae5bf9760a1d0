//! Gaussian-weighted Fourier inversion on a centred grid.
//!
//! With `w_k = (k - N/2)dw`, `n_j = (j - N/2)dn` and `dw·dn = 2π/N`, the
//! integral `(1/2π)∫dw e^{-Γ²w²/2 - iwn} F(w)` becomes one forward FFT with
//! alternating signs on both sides (N a multiple of 4).

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::algebra::Mat2;

fn alternating(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Inverts one scalar channel.
pub fn invert_scalar(values: &[C64], dw: f64, gamma: f64, w_of: impl Fn(usize) -> f64) -> Vec<C64> {
    let n = values.len();
    let mut buf: Vec<C64> = values
        .iter()
        .enumerate()
        .map(|(k, f)| f * (alternating(k) * (-0.5 * gamma * gamma * w_of(k).powi(2)).exp()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let pref = dw / (2.0 * std::f64::consts::PI);
    buf.iter().enumerate().map(|(j, z)| z * (pref * alternating(j))).collect()
}

/// Inverts each matrix entry.
pub fn invert_matrices(values: &[Mat2], dw: f64, gamma: f64, w_of: impl Fn(usize) -> f64 + Copy) -> Vec<Mat2> {
    let mut out = vec![Mat2::zero(); values.len()];
    for e in 0..4 {
        let ch: Vec<C64> = values.iter().map(|m| m.e[e]).collect();
        for (o, z) in out.iter_mut().zip(invert_scalar(&ch, dw, gamma, w_of)) {
            o.e[e] = z;
        }
    }
    out
}

/// Probabilities of `s = 0..M-1` from `G_k = Σ_s P_s e^{-2πiks/M}`.
pub fn inverse_dft_real(g: &[C64]) -> Vec<f64> {
    let m = g.len();
    let mut buf = g.to_vec();
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    buf.iter().map(|z| z.re / m as f64).collect()
}
