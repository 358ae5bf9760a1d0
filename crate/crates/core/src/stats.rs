//! Linearized flow of the history kernel and the closed-form laws of
//! measured histories in both phases.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{build_isometry, Mat2, ModelParams, ScalingData};
use crate::error::{Error, Result};
use crate::fourier::invert_scalar;
use crate::histories::{DistributionTable, GridSpec, TableMeta};
use crate::moments::eta_at;
use crate::montecarlo::sample_rng;

/// Kernel ansatz `Q_t ≈ (1 + a/η_t²) I + (b/η_t) O_x`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LinearFlowState {
    pub a: C64,
    pub b: C64,
    pub b_prime: C64,
}

impl LinearFlowState {
    /// The operator represented by the state at depth `t`.
    pub fn operator(&self, params: &ModelParams, t: u32) -> Mat2 {
        let eta = eta_at(params, t);
        let o_x = ScalingData::new(params).o_x;
        Mat2::identity().scale(1.0 + self.a / (eta * eta)) + o_x.scale(self.b / eta)
    }
}

/// Runs the linearized recursion from `(a_T, b_T) = (0, 0)` down to `τ - 1`;
/// `w_fields[k]` is the field at `t = τ + k`.
pub fn linear_flow(params: &ModelParams, tau: u32, t_final: u32, w_fields: &[f64]) -> Result<LinearFlowState> {
    if tau < 1 || tau > t_final {
        return Err(Error::InvalidWindow { tau: tau as usize, t: t_final as usize });
    }
    if w_fields.len() != (t_final - tau + 1) as usize {
        return Err(Error::InvalidArgument("one field per time in the window is required".into()));
    }
    let k = params.coupling();
    let ch = (0.5 * params.theta).cos();
    let cc = params.theta.cos();
    let mut s = LinearFlowState::default();
    for t in (tau..=t_final).rev() {
        let w = w_fields[(t - tau) as usize];
        let ratio = eta_at(params, t - 1) / eta_at(params, t);
        let bp = s.b + C64::new(0.0, w * k);
        let a = ratio * ratio * (2.0 * s.a + C64::new(0.0, 2.0 * w * ch) * s.b + cc * cc * bp * bp - w * w);
        s = LinearFlowState {
            a,
            b: ratio * 2.0 * cc * bp,
            b_prime: bp,
        };
    }
    Ok(s)
}

/// Predicted scale of ‖Δ‖₁ for window start `τ` and length `L`.
pub fn predict_delta_scaling(params: &ModelParams, tau: u32, l: u32) -> Result<f64> {
    let x = params.x;
    if (x - 0.5).abs() < 1e-12 {
        return Err(Error::UnsupportedRegime("x = 1/2 has logarithmic corrections".into()));
    }
    let (tau, l) = (tau as f64, l as f64);
    let log2 = if x < 0.5 {
        -2.0 * tau * (1.0 - x)
    } else if x < 1.0 {
        -tau + l * (1.0 - 2.0 * x)
    } else {
        -tau - l
    };
    Ok((log2 * LN_2).exp())
}

/// Stationary covariance `E[m_t m_{t+dt}]` of encoding-phase histories.
pub fn encoding_covariance(params: &ModelParams, dt: u32) -> Result<f64> {
    if params.is_apparatus() {
        return Err(Error::UnsupportedRegime("encoding covariance requires x > 1/2".into()));
    }
    let ch2 = (0.5 * params.theta).cos().powi(2);
    let lam = params.lambda;
    let geo = lam.powi(dt as i32);
    let c = if dt == 0 {
        1.0 + ch2 / (1.0 - lam * lam)
    } else {
        ch2 * geo / (1.0 - lam * lam) + ch2 / params.theta.cos() * geo
    };
    let noise = if dt == 0 { params.gamma * params.gamma } else { 0.0 };
    Ok(c / params.c + noise)
}

/// Grid used for the law of the frozen outcome.
pub fn freezing_grid() -> GridSpec {
    GridSpec { n_w: 4096, w_max: 128.0 }
}

const FREEZING_TOL: f64 = 1e-8;
const FREEZING_MAX_DEPTH: u32 = 60;

/// Characteristic function of the frozen outcome at depth `s` for `w ≥ 0`.
fn freezing_characteristic(params: &ModelParams, ws: &[f64], s: u32) -> Vec<f64> {
    let v = build_isometry(params);
    let o_x = ScalingData::new(params).o_x;
    let scale = params.coupling() / eta_at(params, s);
    ws.par_iter()
        .map(|&w| {
            let mut d = Mat2::exp_involution_minus_one(scale * w, &o_x);
            for _ in 0..s {
                d = v.v_super_dev(&d);
            }
            1.0 + 0.5 * d.trace().re
        })
        .collect()
}

/// Density of the frozen outcome of apparatus-phase histories.
///
/// The characteristic function is iterated in depth until it changes by less
/// than 1e-8. When it has not decayed at the grid edge (near-repetition
/// codes), the density is resolved with a Gaussian of width `7.5/w_max`,
/// recorded as `meta.gamma`.
pub fn freezing_distribution(params: &ModelParams, grid: &GridSpec) -> Result<DistributionTable> {
    if !params.is_apparatus() {
        return Err(Error::UnsupportedRegime("freezing law requires x < 1/2".into()));
    }
    if !grid.n_w.is_power_of_two() || grid.n_w < 8 || !(grid.w_max > 0.0) {
        return Err(Error::InvalidGrid(format!("{grid:?}")));
    }
    let ks: Vec<usize> = (grid.n_w / 2..grid.n_w).collect();
    let ws: Vec<f64> = ks.iter().map(|&k| grid.w(k)).collect();
    let mut prev = freezing_characteristic(params, &ws, 1);
    let mut converged = None;
    for s in 2..=FREEZING_MAX_DEPTH {
        let cur = freezing_characteristic(params, &ws, s);
        let change = cur.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = cur;
        if change < FREEZING_TOL {
            converged = Some(s);
            break;
        }
    }
    let depth = converged.ok_or_else(|| {
        Error::NonConvergence(format!("characteristic function not converged by depth {FREEZING_MAX_DEPTH}"))
    })?;
    let edge = prev[prev.len() - 8..].iter().map(|x| x.abs()).fold(0.0, f64::max);
    let resolution = if edge > 1e-10 { 7.5 / grid.w_max } else { 0.0 };
    // φ is even: fill negative frequencies and the k = 0 endpoint.
    let mut phi = vec![C64::new(0.0, 0.0); grid.n_w];
    for (k, v) in ks.iter().zip(&prev) {
        phi[*k] = C64::new(*v, 0.0);
    }
    for k in 1..grid.n_w / 2 {
        phi[k] = phi[grid.n_w - k];
    }
    phi[0] = C64::new(freezing_characteristic(params, &[grid.w_max], depth)[0], 0.0);
    let density: Vec<f64> = invert_scalar(&phi, grid.dw(), resolution, |k| grid.w(k))
        .iter()
        .map(|z| z.re)
        .collect();
    Ok(DistributionTable {
        n_values: grid.n_values(),
        q_matrices: density.iter().map(|&p| Mat2::identity().scale_re(p)).collect(),
        density,
        stderr: None,
        meta: TableMeta {
            theta: params.theta,
            tau: None,
            t_final: depth,
            gamma: resolution,
            seed: None,
            samples: 0,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryLaw {
    Frozen,
    Gaussian,
}

/// Reusable sampler of measured histories.
pub struct HistorySampler {
    params: ModelParams,
    length: usize,
    kind: SamplerKind,
}

enum SamplerKind {
    Frozen { nodes: Vec<f64>, cdf: Vec<f64> },
    Gaussian { chol: DMatrix<f64> },
}

impl HistorySampler {
    pub fn new(params: &ModelParams, length: usize) -> Result<Self> {
        let kind = if params.is_apparatus() {
            let table = freezing_distribution(params, &freezing_grid())?;
            let mut cdf = table.cdf();
            let total = *cdf.last().unwrap();
            cdf.iter_mut().for_each(|c| *c /= total);
            SamplerKind::Frozen { nodes: table.n_values, cdf }
        } else {
            let cov = DMatrix::from_fn(length, length, |i, j| {
                encoding_covariance(params, i.abs_diff(j) as u32).unwrap_or(f64::NAN)
            });
            let chol = cov
                .cholesky()
                .ok_or_else(|| Error::NonConvergence("covariance matrix is not positive definite".into()))?;
            SamplerKind::Gaussian { chol: chol.l() }
        };
        Ok(HistorySampler {
            params: *params,
            length,
            kind,
        })
    }

    pub fn law(&self) -> HistoryLaw {
        match self.kind {
            SamplerKind::Frozen { .. } => HistoryLaw::Frozen,
            SamplerKind::Gaussian { .. } => HistoryLaw::Gaussian,
        }
    }

    /// History number `index` of the stream `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = sample_rng(seed, index);
        match &self.kind {
            SamplerKind::Frozen { nodes, cdf } => {
                let u: f64 = rng.random();
                let frozen = inverse_cdf(nodes, cdf, u);
                (0..self.length)
                    .map(|_| {
                        let xi: f64 = rng.sample(StandardNormal);
                        frozen + self.params.gamma * xi
                    })
                    .collect()
            }
            SamplerKind::Gaussian { chol } => {
                let xi = nalgebra::DVector::from_fn(self.length, |_, _| rng.sample::<f64, _>(StandardNormal));
                (chol * xi).iter().copied().collect()
            }
        }
    }
}

/// Linear interpolation of the inverse of a monotone CDF.
pub(crate) fn inverse_cdf(nodes: &[f64], cdf: &[f64], u: f64) -> f64 {
    let j = cdf.partition_point(|&c| c < u).clamp(1, cdf.len() - 1);
    let (c0, c1) = (cdf[j - 1], cdf[j]);
    let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
    nodes[j - 1] + f * (nodes[j] - nodes[j - 1])
}

/// One measured history of the given length.
pub fn sample_history(params: &ModelParams, length: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(HistorySampler::new(params, length)?.sample(seed, 0))
}
