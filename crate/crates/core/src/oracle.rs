//! Brute-force statevector simulation of the system qubit plus the full
//! apparatus register, for depths up to 4 (17 qubits).
//!
//! Basis index layout: the system qubit is the most significant bit, then
//! apparatus leaves in depth-first order (leaf `j` splits into `2j`, `2j+1`),
//! so every subtree is a contiguous block of leaves.

use num_complex::Complex64 as C64;

use crate::algebra::{build_isometry, Isometry, Mat2, ModelParams};
use crate::error::{Error, Result};

pub const MAX_ORACLE_DEPTH: u32 = 4;

#[derive(Clone, Debug)]
pub struct OracleState {
    pub theta: f64,
    pub t: u32,
    pub amplitudes: Vec<C64>,
    pub norm: f64,
}

fn leaves(t: u32) -> usize {
    1usize << t
}

/// Magnetization `Σ_j z_j` of the apparatus part of a basis index.
fn magnetization(t: u32, index: usize) -> i64 {
    let n = leaves(t);
    let bits = index & ((1usize << n) - 1);
    n as i64 - 2 * bits.count_ones() as i64
}

/// Spin `z_j = ±1` of leaf `j` (bit 0 ↦ +1).
fn leaf_spin(t: u32, index: usize, j: usize) -> f64 {
    let n = leaves(t);
    if (index >> (n - 1 - j)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl OracleState {
    fn from_amplitudes(theta: f64, t: u32, amplitudes: Vec<C64>) -> Self {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        OracleState { theta, t, amplitudes, norm }
    }

    /// Bell pair between the system and a single apparatus qubit.
    pub fn initial(theta: f64) -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        OracleState::from_amplitudes(theta, 0, vec![h, z, z, h])
    }

    pub fn n_leaves(&self) -> usize {
        leaves(self.t)
    }

    /// One layer: every leaf is replaced by two through the isometry.
    pub fn layer(&self, v: &Isometry) -> Result<OracleState> {
        if self.t >= MAX_ORACLE_DEPTH {
            return Err(Error::InvalidDepth(format!("oracle depth limited to {MAX_ORACLE_DEPTH}")));
        }
        let n = self.n_leaves();
        let mut psi = self.amplitudes.clone();
        // Expand leaves from last to first so earlier bit positions stay put.
        for j in (0..n).rev() {
            let low = 2 * (n - 1 - j);
            let lo_mask = (1usize << low) - 1;
            let mut out = vec![C64::new(0.0, 0.0); psi.len() * 2];
            for (idx, &a) in psi.iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let lo = idx & lo_mask;
                let b = (idx >> low) & 1;
                let hi = idx >> (low + 1);
                for (c, row) in v.v.iter().enumerate() {
                    out[(hi << (low + 2)) | (c << low) | lo] += row[b] * a;
                }
            }
            psi = out;
        }
        Ok(OracleState::from_amplitudes(self.theta, self.t + 1, psi))
    }

    /// `(Q ⊗ … ⊗ Q)` on every apparatus leaf.
    pub fn apply_product(&self, q: &Mat2) -> OracleState {
        let n = self.n_leaves();
        let mut psi = self.amplitudes.clone();
        for j in 0..n {
            let bit = n - 1 - j;
            let mut out = vec![C64::new(0.0, 0.0); psi.len()];
            for (idx, &a) in psi.iter().enumerate() {
                let b = (idx >> bit) & 1;
                for r in 0..2 {
                    out[(idx & !(1 << bit)) | (r << bit)] += q.get(r, b) * a;
                }
            }
            psi = out;
        }
        OracleState::from_amplitudes(self.theta, self.t, psi)
    }

    /// `exp(-iu𝒪/η)` with `𝒪` the apparatus magnetization.
    pub fn apply_field(&self, u: f64, eta: f64) -> OracleState {
        let t = self.t;
        let psi = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a * C64::from_polar(1.0, -u * magnetization(t, i) as f64 / eta))
            .collect();
        OracleState::from_amplitudes(self.theta, t, psi)
    }

    /// Reduced (unnormalized) density matrix of the system qubit.
    pub fn reduced_system(&self) -> Mat2 {
        let half = self.amplitudes.len() / 2;
        let (a0, a1) = self.amplitudes.split_at(half);
        let mut rho = Mat2::zero();
        for (x, y) in a0.iter().zip(a1) {
            rho.e[0] += x * x.conj();
            rho.e[1] += x * y.conj();
            rho.e[2] += y * x.conj();
            rho.e[3] += y * y.conj();
        }
        rho
    }

    /// `⟨ψ| P_S ⊗ Σ_{j∈members} Z_j |ψ⟩`.
    pub fn system_and_sum(&self, probe: &Mat2, members: &[usize]) -> C64 {
        let half = self.amplitudes.len() / 2;
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..half {
            let m: f64 = members.iter().map(|&j| leaf_spin(self.t, a, j)).sum();
            for s in 0..2 {
                for sp in 0..2 {
                    acc += self.amplitudes[s * half + a].conj() * probe.get(s, sp) * self.amplitudes[sp * half + a] * m;
                }
            }
        }
        acc
    }

    /// `⟨ψ| (Σ_{j∈members} Z_j)² |ψ⟩`.
    pub fn sum_squared(&self, members: &[usize]) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let m: f64 = members.iter().map(|&j| leaf_spin(self.t, i, j)).sum();
                a.norm_sqr() * m * m
            })
            .sum()
    }

    pub fn inner(&self, other: &OracleState) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Evolves the Bell pair through `t_final` layers.
pub fn oracle_evolve(theta: f64, t_final: u32) -> Result<OracleState> {
    if t_final > MAX_ORACLE_DEPTH {
        return Err(Error::InvalidDepth(format!("oracle depth limited to {MAX_ORACLE_DEPTH}, got {t_final}")));
    }
    let v = oracle_isometry(theta)?;
    let mut s = OracleState::initial(theta);
    for _ in 0..t_final {
        s = s.layer(&v)?;
    }
    Ok(s)
}

fn oracle_isometry(theta: f64) -> Result<Isometry> {
    Ok(build_isometry(&ModelParams::new(theta, 0.0)?))
}

/// `⟨𝒪_t²⟩` by direct summation over the statevector.
pub fn oracle_eta_squared(theta: f64, t: u32) -> Result<f64> {
    let s = oracle_evolve(theta, t)?;
    let all: Vec<usize> = (0..s.n_leaves()).collect();
    Ok(s.sum_squared(&all))
}

/// Smeared Kraus operator at outcome `m`; the squared norm of the result is
/// the outcome density.
pub fn oracle_kraus(state: &OracleState, m: f64, gamma: f64) -> Result<OracleState> {
    if state.t == 0 {
        return Err(Error::InvalidDepth("Kraus operator needs depth >= 1".into()));
    }
    let eta = oracle_eta_squared(state.theta, state.t)?.sqrt();
    let pref = (2.0 * std::f64::consts::PI * gamma * gamma).powf(-0.25);
    let t = state.t;
    let psi = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let d = magnetization(t, i) as f64 / eta - m;
            a * (pref * (-d * d / (4.0 * gamma * gamma)).exp())
        })
        .collect();
    Ok(OracleState::from_amplitudes(state.theta, t, psi))
}

/// Joint density of outcomes `m_seq[k]` measured at times `τ + k`, and the
/// normalized conditional state of the system.
pub fn oracle_history(theta: f64, tau: u32, t_final: u32, gamma: f64, m_seq: &[f64]) -> Result<(f64, Mat2)> {
    if tau < 1 || tau > t_final {
        return Err(Error::InvalidWindow { tau: tau as usize, t: t_final as usize });
    }
    if t_final > MAX_ORACLE_DEPTH {
        return Err(Error::InvalidDepth(format!("oracle depth limited to {MAX_ORACLE_DEPTH}, got {t_final}")));
    }
    if m_seq.len() != (t_final - tau + 1) as usize {
        return Err(Error::InvalidArgument("one outcome per measured time is required".into()));
    }
    let v = oracle_isometry(theta)?;
    let mut s = oracle_evolve(theta, tau)?;
    for (k, &m) in m_seq.iter().enumerate() {
        if k > 0 {
            s = s.layer(&v)?;
        }
        s = oracle_kraus(&s, m, gamma)?;
    }
    let p = s.norm * s.norm;
    let rho = s.reduced_system().scale_re(1.0 / p);
    Ok((p, rho))
}

/// `⟨A_u Ψ| B_S |A_v Ψ⟩` with `A_u = e^{-iu_T𝒪_T/η_T} V ⋯ e^{-iu_τ𝒪_τ/η_τ} V_{τ,0}`.
pub fn oracle_field_overlap(theta: f64, tau: u32, t_final: u32, u: &[f64], v_field: &[f64], probe: &Mat2) -> Result<C64> {
    if tau < 1 || tau > t_final || t_final > MAX_ORACLE_DEPTH {
        return Err(Error::InvalidWindow { tau: tau as usize, t: t_final as usize });
    }
    let iso = oracle_isometry(theta)?;
    let base = oracle_evolve(theta, tau)?;
    let run = |fields: &[f64]| -> Result<OracleState> {
        let mut s = base.clone();
        for (k, &f) in fields.iter().enumerate() {
            if k > 0 {
                s = s.layer(&iso)?;
            }
            let eta = oracle_eta_squared(theta, s.t)?.sqrt();
            s = s.apply_field(f, eta);
        }
        Ok(s)
    };
    let a = run(u)?;
    let b = run(v_field)?;
    let half = a.amplitudes.len() / 2;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..half {
        for s in 0..2 {
            for sp in 0..2 {
                acc += a.amplitudes[s * half + i].conj() * probe.get(s, sp) * b.amplitudes[sp * half + i];
            }
        }
    }
    Ok(acc)
}

/// Two-time correlator `Re⟨Q_s Q_t⟩` of product involutions, with
/// `⟨Q_s Q_t⟩ = ⟨V_{t,s} Q^{⊗} ψ_s | Q^{⊗} V_{t,s} ψ_s⟩`.
pub fn oracle_two_time(theta: f64, s: u32, t: u32, q: &Mat2) -> Result<f64> {
    if s > t || t > MAX_ORACLE_DEPTH {
        return Err(Error::InvalidWindow { tau: s as usize, t: t as usize });
    }
    let iso = oracle_isometry(theta)?;
    let psi_s = oracle_evolve(theta, s)?;
    let mut phi1 = psi_s.apply_product(q);
    let mut phi2 = psi_s;
    for _ in s..t {
        phi1 = phi1.layer(&iso)?;
        phi2 = phi2.layer(&iso)?;
    }
    let phi2 = phi2.apply_product(q);
    Ok(phi1.inner(&phi2).re)
}

/// Oracle outcome density at depth `t` on a list of outcomes.
pub fn oracle_density(theta: f64, t: u32, gamma: f64, ms: &[f64]) -> Result<Vec<f64>> {
    let s = oracle_evolve(theta, t)?;
    ms.iter()
        .map(|&m| oracle_kraus(&s, m, gamma).map(|k| k.norm * k.norm))
        .collect()
}

/// Uniform outcome grid used for oracle integrals.
pub fn oracle_grid() -> Vec<f64> {
    let n = 2048;
    (0..n).map(|i| -6.0 + 12.0 * i as f64 / (n - 1) as f64).collect()
}
