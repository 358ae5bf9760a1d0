//! Pointer-state ensembles: conditional states of the system given a
//! coarse apparatus outcome, sampled with their Born weights.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Mat2, ModelParams};
use crate::error::{Error, Result};
use crate::histories::{single_time_distribution, DistributionTable, GridSpec};
use crate::montecarlo::sample_rng;
use crate::stats::inverse_cdf;

/// Minimal density for which a conditional state is reported.
pub const MIN_DENSITY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerSample {
    pub m: f64,
    pub p: f64,
    pub rho: Mat2,
    pub bloch: [f64; 3],
    /// Bloch-vector length removed to restore positivity.
    pub clip: f64,
}

impl PointerSample {
    pub fn purity(&self) -> f64 {
        let r2: f64 = self.bloch.iter().map(|b| b * b).sum();
        0.5 * (1.0 + r2)
    }

    /// Operator-norm distance `‖ρ - I/2‖ = |r|/2`.
    pub fn deviation_from_mixed(&self) -> f64 {
        0.5 * self.bloch.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

/// `ρ_m = Q(m)ᵀ/tr Q(m)`, symmetrized and clipped to a valid state.
pub fn conditional_state(table: &DistributionTable, m: f64) -> Result<PointerSample> {
    let (q, p) = table
        .interpolate(m)
        .ok_or_else(|| Error::InvalidArgument(format!("m = {m} outside the tabulated range")))?;
    if !(p > MIN_DENSITY) {
        return Err(Error::UndefinedState { m, p });
    }
    let rho = q.transpose().hermitian_part();
    let rho = rho.scale_re(1.0 / rho.trace().re);
    let mut bloch = rho.bloch();
    let r = bloch.iter().map(|b| b * b).sum::<f64>().sqrt();
    let clip = (r - 1.0).max(0.0);
    if clip > 0.0 {
        bloch.iter_mut().for_each(|b| *b /= r);
    }
    let rho = (Mat2::identity()
        + Mat2::pauli_x().scale_re(bloch[0])
        + Mat2::pauli_y().scale_re(bloch[1])
        + Mat2::pauli_z().scale_re(bloch[2]))
    .scale_re(0.5);
    Ok(PointerSample { m, p, rho, bloch, clip })
}

fn normalized_cdf(table: &DistributionTable) -> Vec<f64> {
    let mut cdf = table.cdf();
    let total = *cdf.last().unwrap();
    cdf.iter_mut().for_each(|c| *c /= total);
    cdf
}

/// Outcome at probability level `u`.
pub fn quantile(table: &DistributionTable, u: f64) -> f64 {
    inverse_cdf(&table.n_values, &normalized_cdf(table), u)
}

/// States at the fixed probability levels `(i + 1/2)/count`.
pub fn quantile_ensemble(table: &DistributionTable, count: usize) -> Result<Vec<PointerSample>> {
    let cdf = normalized_cdf(table);
    (0..count)
        .map(|i| conditional_state(table, inverse_cdf(&table.n_values, &cdf, (i as f64 + 0.5) / count as f64)))
        .collect()
}

/// `count` states with outcomes drawn from the table density.
pub fn ensemble_from_table(table: &DistributionTable, count: usize, seed: u64) -> Result<Vec<PointerSample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let cdf = normalized_cdf(table);
    let mut rng = sample_rng(seed, 0);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            conditional_state(table, inverse_cdf(&table.n_values, &cdf, u))
        })
        .collect()
}

/// Pointer ensemble at depth `t`, reproducible by seed.
pub fn ensemble_sample(params: &ModelParams, t: u32, grid: &GridSpec, count: usize, seed: u64) -> Result<Vec<PointerSample>> {
    let table = single_time_distribution(params, t, grid)?;
    ensemble_from_table(&table, count, seed)
}

/// `max |∫ p(m) ρ_m dm - I/2|` entrywise.
pub fn completeness_check(table: &DistributionTable) -> f64 {
    let dn = table.dn();
    let n = table.q_matrices.len();
    let mut acc = Mat2::zero();
    for (j, q) in table.q_matrices.iter().enumerate() {
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        acc += q.transpose().scale_re(0.5 * w * dn);
    }
    acc.dist(&Mat2::identity().scale_re(0.5))
}

/// Largest `‖ρ_m - I/2‖` over outcomes between the probability levels
/// `tail` and `1 - tail`.
pub fn max_deviation_from_mixed(table: &DistributionTable, tail: f64) -> Result<f64> {
    let lo = quantile(table, tail);
    let hi = quantile(table, 1.0 - tail);
    let mut worst = 0.0f64;
    for (j, &m) in table.n_values.iter().enumerate() {
        if m < lo || m > hi || table.density[j] <= MIN_DENSITY {
            continue;
        }
        worst = worst.max(conditional_state(table, m)?.deviation_from_mixed());
    }
    Ok(worst)
}

/// Number of probability levels compared between ensembles.
pub const ENSEMBLE_LEVELS: usize = 999;

/// Sup over probability levels of the Bloch-vector distance between two
/// ensembles. Levels that land on a zero-density outcome in either table
/// are skipped.
pub fn ensemble_distance(a: &DistributionTable, b: &DistributionTable) -> Result<f64> {
    let (ca, cb) = (normalized_cdf(a), normalized_cdf(b));
    let mut worst = 0.0f64;
    for i in 0..ENSEMBLE_LEVELS {
        let u = (i as f64 + 0.5) / ENSEMBLE_LEVELS as f64;
        let sa = conditional_state(a, inverse_cdf(&a.n_values, &ca, u));
        let sb = conditional_state(b, inverse_cdf(&b.n_values, &cb, u));
        let (x, y) = match (sa, sb) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(Error::UndefinedState { .. }), _) | (_, Err(Error::UndefinedState { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let d = x.bloch.iter().zip(&y.bloch).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(d);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitStep {
    pub t_from: u32,
    pub t_to: u32,
    pub gamma_from: f64,
    pub gamma_to: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    /// Successive depths at the first imprecision.
    pub depth_steps: Vec<LimitStep>,
    /// Successive imprecisions at the last depth.
    pub gamma_steps: Vec<LimitStep>,
}

impl LimitReport {
    pub fn monotone(&self) -> bool {
        let dec = |s: &[LimitStep]| s.windows(2).all(|w| w[1].distance <= w[0].distance);
        dec(&self.depth_steps) && dec(&self.gamma_steps)
    }
}

/// Convergence of pointer ensembles as depth grows and imprecision shrinks.
/// Each imprecision uses its default grid.
pub fn limit_study(params: &ModelParams, t_list: &[u32], gamma_list: &[f64]) -> Result<LimitReport> {
    if t_list.is_empty() || gamma_list.is_empty() {
        return Err(Error::InvalidArgument("depth and imprecision lists must be non-empty".into()));
    }
    let table = |t: u32, g: f64| -> Result<DistributionTable> {
        let p = params.with_gamma(g)?;
        single_time_distribution(&p, t, &GridSpec::for_gamma(g)?)
    };
    let g0 = gamma_list[0];
    let t_last = *t_list.last().unwrap();
    let mut depth_steps = Vec::new();
    for w in t_list.windows(2) {
        depth_steps.push(LimitStep {
            t_from: w[0],
            t_to: w[1],
            gamma_from: g0,
            gamma_to: g0,
            distance: ensemble_distance(&table(w[0], g0)?, &table(w[1], g0)?)?,
        });
    }
    let mut gamma_steps = Vec::new();
    for w in gamma_list.windows(2) {
        gamma_steps.push(LimitStep {
            t_from: t_last,
            t_to: t_last,
            gamma_from: w[0],
            gamma_to: w[1],
            distance: ensemble_distance(&table(t_last, w[0])?, &table(t_last, w[1])?)?,
        });
    }
    Ok(LimitReport { depth_steps, gamma_steps })
}

pub const CSV_HEADER: [&str; 6] = ["m", "p", "bloch_x", "bloch_y", "bloch_z", "purity"];

/// Writes samples with header `m, p, bloch_x, bloch_y, bloch_z, purity`.
pub fn write_csv<W: Write>(out: W, samples: &[PointerSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in samples {
        w.write_record([s.m, s.p, s.bloch[0], s.bloch[1], s.bloch[2], s.purity()].map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}
