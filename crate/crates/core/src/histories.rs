//! Outcome distributions of the coarse magnetization `𝒪_t/η_t` and the
//! decoherence probe ‖Δ‖₁.
//!
//! The characteristic function of the outcome at time `T` is the
//! superoperator chain `𝗏^T[e^{iwZ/η_T}]` applied to the initial qubit.
//! Integrating out earlier measurements turns each Kraus operator into a
//! Gaussian average of symmetric twists `k_{z/2,z/2}`, which is sampled by
//! Monte Carlo. Chains are propagated in deviation form `Q - I` to keep
//! relative precision over many layers.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{build_isometry, conjugate_phase, kraus_twist, v_super, Isometry, Mat2, ModelParams};
use crate::error::{Error, Result};
use crate::fourier::{invert_matrices, invert_scalar, inverse_dft_real};
use crate::moments::eta_at;
use crate::montecarlo::{block_ranges, jackknife_stderr, sample_rng};

/// Frequency grid; the outcome axis follows from `dw·dn = 2π/n_w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_w: usize,
    pub w_max: f64,
}

impl GridSpec {
    /// Default grid: `dn = Γ/4`, `w_max = 4π/Γ`, outcome range at least 48.
    pub fn for_gamma(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidGrid(format!("a positive imprecision is required, got {gamma}")));
        }
        let n_w = ((192.0 / gamma).ceil() as usize).next_power_of_two().max(64);
        Ok(GridSpec {
            n_w,
            w_max: 4.0 * std::f64::consts::PI / gamma,
        })
    }

    pub fn validate(&self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidGrid(format!("a positive imprecision is required, got {gamma}")));
        }
        if !self.n_w.is_power_of_two() || self.n_w < 8 {
            return Err(Error::InvalidGrid(format!("n_w = {} must be a power of two >= 8", self.n_w)));
        }
        if !(self.w_max.is_finite() && self.w_max * gamma >= 8.0) {
            return Err(Error::InvalidGrid(format!(
                "w_max = {} leaves a non-negligible Gaussian tail (need w_max >= 8/gamma)",
                self.w_max
            )));
        }
        if self.dn() > gamma / 4.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "outcome step {} exceeds gamma/4 = {}",
                self.dn(),
                gamma / 4.0
            )));
        }
        Ok(())
    }

    pub fn dw(&self) -> f64 {
        2.0 * self.w_max / self.n_w as f64
    }

    pub fn dn(&self) -> f64 {
        std::f64::consts::PI / self.w_max
    }

    pub fn w(&self, k: usize) -> f64 {
        (k as f64 - (self.n_w / 2) as f64) * self.dw()
    }

    pub fn n(&self, j: usize) -> f64 {
        (j as f64 - (self.n_w / 2) as f64) * self.dn()
    }

    pub fn n_values(&self) -> Vec<f64> {
        (0..self.n_w).map(|j| self.n(j)).collect()
    }

    pub fn refined(&self) -> GridSpec {
        GridSpec {
            n_w: self.n_w * 4,
            w_max: self.w_max * 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub theta: f64,
    pub tau: Option<u32>,
    pub t_final: u32,
    pub gamma: f64,
    pub seed: Option<u64>,
    pub samples: usize,
}

/// Outcome density with the non-normalized conditional operators `Q(n)`.
#[derive(Clone, Debug)]
pub struct DistributionTable {
    pub n_values: Vec<f64>,
    pub q_matrices: Vec<Mat2>,
    pub density: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub meta: TableMeta,
}

impl DistributionTable {
    pub fn dn(&self) -> f64 {
        self.n_values[1] - self.n_values[0]
    }

    pub fn total_probability(&self) -> f64 {
        trapezoid(&self.density, self.dn())
    }

    /// Trapezoid cumulative distribution on the outcome nodes.
    pub fn cdf(&self) -> Vec<f64> {
        let dn = self.dn();
        let mut c = Vec::with_capacity(self.density.len());
        let mut acc = 0.0;
        c.push(0.0);
        for w in self.density.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dn;
            c.push(acc);
        }
        c
    }

    /// Linear interpolation of `Q` and `p` at `m`.
    pub fn interpolate(&self, m: f64) -> Option<(Mat2, f64)> {
        let n0 = self.n_values[0];
        let dn = self.dn();
        let last = (self.n_values.len() - 1) as f64;
        let pos = (m - n0) / dn;
        if !(-1e-9..=last + 1e-9).contains(&pos) {
            return None;
        }
        let pos = pos.clamp(0.0, last);
        let i = (pos.floor() as usize).min(self.n_values.len() - 2);
        let f = pos - i as f64;
        let q = self.q_matrices[i].scale_re(1.0 - f) + self.q_matrices[i + 1].scale_re(f);
        let p = self.density[i] * (1.0 - f) + self.density[i + 1] * f;
        Some((q, p))
    }

    /// Density at `m` by linear interpolation, zero outside the table.
    pub fn density_at(&self, m: f64) -> f64 {
        self.interpolate(m).map_or(0.0, |(_, p)| p)
    }
}

pub(crate) fn trapezoid(y: &[f64], h: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
}

/// Hubbard-Stratonovich fields `u_t`, `v_t` for `t = τ..=T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryKernelInput {
    pub u_fields: Vec<f64>,
    pub v_fields: Vec<f64>,
}

fn check_window(tau: u32, t_final: u32, strict: bool) -> Result<()> {
    if tau < 1 || tau > t_final || (strict && tau == t_final) {
        return Err(Error::InvalidWindow { tau: tau as usize, t: t_final as usize });
    }
    Ok(())
}

/// `Q_{τ-1}` of the backward recursion `Q_{t-1} = 𝗏[k^t_{u_t,v_t}(Q_t)]`, `Q_T = I`.
pub fn window_operator(params: &ModelParams, tau: u32, t_final: u32, fields: &HistoryKernelInput) -> Result<Mat2> {
    check_window(tau, t_final, false)?;
    let len = (t_final - tau + 1) as usize;
    if fields.u_fields.len() != len || fields.v_fields.len() != len {
        return Err(Error::InvalidArgument(format!("expected {len} fields per side")));
    }
    let v = build_isometry(params);
    let mut q = Mat2::identity();
    for t in (tau..=t_final).rev() {
        let k = (t - tau) as usize;
        let twisted = kraus_twist(&q, fields.u_fields[k], fields.v_fields[k], eta_at(params, t));
        q = v_super(&v, &twisted);
    }
    Ok(q)
}

/// History kernel `𝗏^{τ-1}[Q_{τ-1}]`, an operator on the initial apparatus qubit.
pub fn history_kernel(params: &ModelParams, tau: u32, t_final: u32, fields: &HistoryKernelInput) -> Result<Mat2> {
    let mut q = window_operator(params, tau, t_final, fields)?;
    let v = build_isometry(params);
    for _ in 1..tau {
        q = v_super(&v, &q);
    }
    Ok(q)
}

/// `𝗏_dev` applied `n` times.
fn propagate(v: &Isometry, mut d: Mat2, n: u32) -> Mat2 {
    for _ in 0..n {
        d = v.v_super_dev(&d);
    }
    d
}

/// Deviation chain with symmetric twists `phases[k]` at `t = τ + k`, starting
/// from `base = 𝗏_dev[e^{iαZ} - I]`.
#[inline]
fn twisted_chain(v: &Isometry, base: &Mat2, phases: &[f64], tau: u32, sign: f64) -> Mat2 {
    let mut d = *base;
    for &p in phases.iter().rev() {
        d = conjugate_phase(&d, sign * p);
        d = v.v_super_dev(&d);
    }
    propagate(v, d, tau - 1)
}

fn chain_bases(v: &Isometry, alphas: &[f64]) -> Vec<Mat2> {
    alphas.iter().map(|&a| v.v_super_dev(&Mat2::exp_iz_minus_one(a))).collect()
}

/// Per-block sums of antithetic-pair averages of the twisted chains.
struct BlockSums {
    counts: Vec<usize>,
    sums: Vec<Vec<Mat2>>,
}

impl BlockSums {
    fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn mean(&self) -> Vec<Mat2> {
        let n = self.total() as f64;
        let mut out = vec![Mat2::zero(); self.sums[0].len()];
        for s in &self.sums {
            for (o, x) in out.iter_mut().zip(s) {
                *o += *x;
            }
        }
        out.iter().map(|m| m.scale_re(1.0 / n)).collect()
    }

    /// Means with block `b` removed.
    fn leave_out(&self, b: usize) -> Vec<Mat2> {
        let n = (self.total() - self.counts[b]) as f64;
        let mut out = vec![Mat2::zero(); self.sums[0].len()];
        for (i, s) in self.sums.iter().enumerate() {
            if i == b {
                continue;
            }
            for (o, x) in out.iter_mut().zip(s) {
                *o += *x;
            }
        }
        out.iter().map(|m| m.scale_re(1.0 / n)).collect()
    }
}

fn sample_blocks(v: &Isometry, bases: &[Mat2], phase_sd: &[f64], tau: u32, samples: usize, seed: u64) -> BlockSums {
    let blocks: Vec<(usize, Vec<Mat2>)> = block_ranges(samples)
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![Mat2::zero(); bases.len()];
            let mut phases = vec![0.0; phase_sd.len()];
            for i in range.clone() {
                let mut rng = sample_rng(seed, i as u64);
                for (p, sd) in phases.iter_mut().zip(phase_sd) {
                    let z: f64 = rng.sample(StandardNormal);
                    *p = z * sd;
                }
                for (a, b) in acc.iter_mut().zip(bases) {
                    let plus = twisted_chain(v, b, &phases, tau, 1.0);
                    let minus = twisted_chain(v, b, &phases, tau, -1.0);
                    *a += (plus + minus).scale_re(0.5);
                }
            }
            (range.len(), acc)
        })
        .collect();
    let (counts, sums) = blocks.into_iter().unzip();
    BlockSums { counts, sums }
}

/// Indices evaluated explicitly: `k = 0` and the non-negative frequencies.
fn half_indices(n_w: usize) -> Vec<usize> {
    std::iter::once(0).chain(n_w / 2..n_w).collect()
}

fn flip(m: &Mat2) -> Mat2 {
    Mat2::new(m.e[3], m.e[2], m.e[1], m.e[0])
}

/// Restores negative frequencies from `F(-w) = X F(w) X`.
fn expand_symmetric(half: &[Mat2], n_w: usize) -> Vec<Mat2> {
    let mut full = vec![Mat2::zero(); n_w];
    full[0] = half[0];
    full[n_w / 2..].copy_from_slice(&half[1..]);
    for k in 1..n_w / 2 {
        full[k] = flip(&full[n_w - k]);
    }
    full
}

fn coarse_alphas(grid: &GridSpec, eta_t: f64) -> Vec<f64> {
    half_indices(grid.n_w).iter().map(|&k| grid.w(k) / eta_t).collect()
}

fn table_from_deviation(dev: &[Mat2], grid: &GridSpec, gamma: f64, meta: TableMeta) -> DistributionTable {
    let f: Vec<Mat2> = dev.iter().map(|d| *d + Mat2::identity()).collect();
    let q = invert_matrices(&f, grid.dw(), gamma, |k| grid.w(k));
    let density = q.iter().map(|m| 0.5 * m.trace().re).collect();
    DistributionTable {
        n_values: grid.n_values(),
        q_matrices: q,
        density,
        stderr: None,
        meta,
    }
}

fn density_from_deviation(dev: &[Mat2], grid: &GridSpec, gamma: f64) -> Vec<f64> {
    let tr: Vec<C64> = dev.iter().map(|d| 1.0 + 0.5 * d.trace()).collect();
    invert_scalar(&tr, grid.dw(), gamma, |k| grid.w(k)).iter().map(|z| z.re).collect()
}

fn single_time_deviation(params: &ModelParams, t_final: u32, grid: &GridSpec) -> Vec<Mat2> {
    let v = build_isometry(params);
    let bases = chain_bases(&v, &coarse_alphas(grid, eta_at(params, t_final)));
    let half: Vec<Mat2> = bases.par_iter().map(|b| propagate(&v, *b, t_final - 1)).collect();
    expand_symmetric(&half, grid.n_w)
}

/// Exact outcome density at time `T` with conditional operators.
pub fn single_time_distribution(params: &ModelParams, t_final: u32, grid: &GridSpec) -> Result<DistributionTable> {
    if t_final < 1 {
        return Err(Error::InvalidDepth("T must be at least 1".into()));
    }
    grid.validate(params.gamma)?;
    let dev = single_time_deviation(params, t_final, grid);
    let meta = TableMeta {
        theta: params.theta,
        tau: None,
        t_final,
        gamma: params.gamma,
        seed: None,
        samples: 0,
    };
    Ok(table_from_deviation(&dev, grid, params.gamma, meta))
}

struct MarginalRun {
    blocks: BlockSums,
}

fn marginal_run(params: &ModelParams, tau: u32, t_final: u32, grid: &GridSpec, samples: usize, seed: u64) -> Result<MarginalRun> {
    check_window(tau, t_final, true)?;
    grid.validate(params.gamma)?;
    if samples < 2 {
        return Err(Error::TooFewSamples(samples));
    }
    let v = build_isometry(params);
    let bases = chain_bases(&v, &coarse_alphas(grid, eta_at(params, t_final)));
    let sd: Vec<f64> = (tau..t_final).map(|t| 0.5 / (params.gamma * eta_at(params, t))).collect();
    Ok(MarginalRun {
        blocks: sample_blocks(&v, &bases, &sd, tau, samples, seed),
    })
}

/// Outcome density at `T` with measurements at `τ..T-1` integrated out.
pub fn marginal_distribution(
    params: &ModelParams,
    tau: u32,
    t_final: u32,
    grid: &GridSpec,
    samples: usize,
    seed: u64,
) -> Result<DistributionTable> {
    let run = marginal_run(params, tau, t_final, grid, samples, seed)?;
    let mean = expand_symmetric(&run.blocks.mean(), grid.n_w);
    let meta = TableMeta {
        theta: params.theta,
        tau: Some(tau),
        t_final,
        gamma: params.gamma,
        seed: Some(seed),
        samples,
    };
    let mut table = table_from_deviation(&mean, grid, params.gamma, meta);
    let loo: Vec<Vec<f64>> = (0..run.blocks.counts.len())
        .map(|b| density_from_deviation(&expand_symmetric(&run.blocks.leave_out(b), grid.n_w), grid, params.gamma))
        .collect();
    let stderr = (0..grid.n_w)
        .map(|j| jackknife_stderr(&loo.iter().map(|p| p[j]).collect::<Vec<_>>()))
        .collect();
    table.stderr = Some(stderr);
    Ok(table)
}

/// `‖Δ‖₁` between the single-time and marginal densities, with jackknife error.
pub fn delta_probe(params: &ModelParams, tau: u32, t_final: u32, grid: &GridSpec, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let run = marginal_run(params, tau, t_final, grid, samples, seed)?;
    let single = density_from_deviation(&single_time_deviation(params, t_final, grid), grid, params.gamma);
    let l1_of = |dev: Vec<Mat2>| {
        let p = density_from_deviation(&expand_symmetric(&dev, grid.n_w), grid, params.gamma);
        let diff: Vec<f64> = single.iter().zip(&p).map(|(a, b)| (a - b).abs()).collect();
        trapezoid(&diff, grid.dn())
    };
    let l1 = l1_of(run.blocks.mean());
    let loo: Vec<f64> = (0..run.blocks.counts.len()).map(|b| l1_of(run.blocks.leave_out(b))).collect();
    Ok((l1, jackknife_stderr(&loo)))
}

/// `‖Δ‖₁` for measurements of fixed absolute precision `γ` on the raw
/// magnetization (relative imprecision `γ/η_t` at every step).
///
/// The raw magnetization takes values `N - 2s`, so its law is recovered
/// exactly from `N + 1` frequencies by a discrete Fourier transform.
pub fn fine_grained_probe(
    params: &ModelParams,
    tau: u32,
    t_final: u32,
    gamma_absolute: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_window(tau, t_final, true)?;
    if !(gamma_absolute > 0.0 && gamma_absolute.is_finite()) {
        return Err(Error::InvalidGamma(gamma_absolute));
    }
    if samples < 2 {
        return Err(Error::TooFewSamples(samples));
    }
    if t_final > 20 {
        return Err(Error::InvalidDepth(format!("fine-grained probe limited to T <= 20, got {t_final}")));
    }
    let v = build_isometry(params);
    let leaves = 1usize << t_final;
    let m = leaves + 1;
    let omegas: Vec<f64> = (0..m).map(|k| std::f64::consts::PI * k as f64 / m as f64).collect();
    let bases = chain_bases(&v, &omegas);
    let law = |dev: &[Mat2]| -> Vec<f64> {
        let g: Vec<C64> = dev
            .iter()
            .zip(&omegas)
            .map(|(d, &w)| (1.0 + 0.5 * d.trace()) * C64::from_polar(1.0, -w * leaves as f64))
            .collect();
        inverse_dft_real(&g)
    };
    let single: Vec<Mat2> = bases.par_iter().map(|b| propagate(&v, *b, t_final - 1)).collect();
    let p_single = law(&single);
    let sd = vec![0.5 / gamma_absolute; (t_final - tau) as usize];
    let blocks = sample_blocks(&v, &bases, &sd, tau, samples, seed);
    let l1_of = |dev: Vec<Mat2>| {
        let diff: Vec<f64> = p_single.iter().zip(law(&dev)).map(|(a, b)| a - b).collect();
        smeared_l1(&diff, leaves, gamma_absolute)
    };
    let l1 = l1_of(blocks.mean());
    let loo: Vec<f64> = (0..blocks.counts.len()).map(|b| l1_of(blocks.leave_out(b))).collect();
    Ok((l1, jackknife_stderr(&loo)))
}

/// `∫|Σ_s diff_s N(x; N - 2s, γ)| dx`.
fn smeared_l1(diff: &[f64], leaves: usize, gamma: f64) -> f64 {
    if gamma <= 0.125 {
        // Neighbouring outcomes are 16 standard deviations apart.
        return diff.iter().map(|d| d.abs()).sum();
    }
    let h = gamma / 8.0;
    let lo = -(leaves as f64) - 10.0 * gamma;
    let n = ((2.0 * (leaves as f64 + 10.0 * gamma)) / h).ceil() as usize + 1;
    let norm = 1.0 / (gamma * (2.0 * std::f64::consts::PI).sqrt());
    let reach = (10.0 * gamma / 2.0).ceil() as i64 + 1;
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let x = lo + i as f64 * h;
            let s_mid = ((leaves as f64 - x) / 2.0).round() as i64;
            let mut acc = 0.0;
            for s in (s_mid - reach).max(0)..=(s_mid + reach).min(leaves as i64) {
                let o = leaves as f64 - 2.0 * s as f64;
                acc += diff[s as usize] * norm * (-(x - o).powi(2) / (2.0 * gamma * gamma)).exp();
            }
            acc.abs()
        })
        .collect();
    trapezoid(&y, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(t: f64, g: f64) -> ModelParams {
        ModelParams::new(t * PI, g).unwrap()
    }

    #[test]
    fn default_grid_satisfies_invariants() {
        for g in [0.5, 0.1, 0.05, 0.025] {
            let grid = GridSpec::for_gamma(g).unwrap();
            grid.validate(g).unwrap();
            assert!(grid.n_w as f64 * grid.dn() >= 48.0);
        }
        assert!(GridSpec { n_w: 4096, w_max: 80.0 }.validate(0.1).is_err());
        assert!(GridSpec { n_w: 1000, w_max: 200.0 }.validate(0.1).is_err());
    }

    #[test]
    fn zero_fields_give_identity() {
        let p = params(0.3, 0.1);
        let f = HistoryKernelInput { u_fields: vec![0.0; 3], v_fields: vec![0.0; 3] };
        assert!(history_kernel(&p, 2, 4, &f).unwrap().dist(&Mat2::identity()) < 1e-13);
    }

    #[test]
    fn one_step_kernel_by_hand() {
        let p = params(0.3, 0.1);
        let f = HistoryKernelInput { u_fields: vec![0.4], v_fields: vec![-0.2] };
        let v = build_isometry(&p);
        let eta = eta_at(&p, 1);
        let hand = v_super(&v, &kraus_twist(&Mat2::identity(), 0.4, -0.2, eta));
        assert!(history_kernel(&p, 1, 1, &f).unwrap().dist(&hand) < 1e-15);
    }

    #[test]
    fn repetition_code_density_is_two_gaussians() {
        let p = params(0.0, 0.1);
        let grid = GridSpec::for_gamma(0.1).unwrap();
        let t = single_time_distribution(&p, 3, &grid).unwrap();
        let norm = 1.0 / (0.1 * (2.0 * PI).sqrt());
        for (n, d) in t.n_values.iter().zip(&t.density) {
            let g = |c: f64| norm * (-(n - c).powi(2) / 0.02).exp();
            assert!((d - 0.5 * g(1.0) - 0.5 * g(-1.0)).abs() < 1e-4);
        }
        assert!((t.total_probability() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_windows() {
        let p = params(0.3, 0.1);
        let grid = GridSpec::for_gamma(0.1).unwrap();
        assert!(marginal_distribution(&p, 3, 3, &grid, 10, 1).is_err());
        assert!(marginal_distribution(&p, 0, 3, &grid, 10, 1).is_err());
        assert!(marginal_distribution(&p, 1, 3, &grid, 1, 1).is_err());
    }

    #[test]
    fn symmetric_expansion_matches_direct_evaluation() {
        let p = params(0.3, 0.5);
        let grid = GridSpec::for_gamma(0.5).unwrap();
        let v = build_isometry(&p);
        let eta = eta_at(&p, 3);
        let full = single_time_deviation(&p, 3, &grid);
        for k in [1usize, 7, grid.n_w / 2 - 1] {
            let direct = propagate(&v, v.v_super_dev(&Mat2::exp_iz_minus_one(grid.w(k) / eta)), 2);
            assert!(direct.dist(&full[k]) < 1e-14);
        }
    }

    #[test]
    fn fine_grained_repetition_code_is_exact() {
        let p = params(0.0, 0.1);
        let (l1, _) = fine_grained_probe(&p, 2, 4, 0.1, 4, 3).unwrap();
        assert!(l1 < 1e-10);
        let (l1, _) = fine_grained_probe(&p, 2, 4, 0.7, 4, 3).unwrap();
        assert!(l1 < 1e-10);
    }

    #[test]
    fn smeared_l1_limits_agree() {
        let diff = [0.1, -0.3, 0.05, 0.15];
        let narrow = smeared_l1(&diff, 3, 0.125);
        let sum: f64 = diff.iter().map(|d| d.abs()).sum();
        assert!((narrow - sum).abs() < 1e-14);
        let broad = smeared_l1(&diff, 3, 0.13);
        assert!((broad - sum).abs() < 1e-6);
    }
}
