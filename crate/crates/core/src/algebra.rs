//! Exact building blocks: 2×2 complex matrices, the tree isometry, its
//! superoperators, scaling operators and Bell-pair expectations.
//!
//! The isometry maps one apparatus qubit to two,
//! `v = Σ_k (R|k⟩)⊗(R|k⟩)⟨k|R` with `R = exp(-iXθ/4)`. The superoperator
//! `𝗏[Q] = v†(Q⊗Q)v` is the Heisenberg image of a product operator under
//! one layer of the tree.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I_UNIT: C64 = C64::new(0.0, 1.0);

/// Dense 2×2 complex matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat2 {
    pub e: [C64; 4],
}

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2 { e: [a, b, c, d] }
    }

    pub const fn zero() -> Self {
        Mat2::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Mat2::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn pauli_x() -> Self {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub const fn pauli_y() -> Self {
        Mat2::new(ZERO, C64::new(0.0, -1.0), I_UNIT, ZERO)
    }

    pub const fn pauli_z() -> Self {
        Mat2::new(ONE, ZERO, ZERO, C64::new(-1.0, 0.0))
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, d)
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.e[2 * r + c]
    }

    pub fn scale(&self, s: C64) -> Self {
        Mat2 { e: self.e.map(|z| z * s) }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Mat2 { e: self.e.map(|z| z * s) }
    }

    pub fn adjoint(&self) -> Self {
        let [a, b, c, d] = self.e;
        Mat2::new(a.conj(), c.conj(), b.conj(), d.conj())
    }

    pub fn transpose(&self) -> Self {
        let [a, b, c, d] = self.e;
        Mat2::new(a, c, b, d)
    }

    pub fn trace(&self) -> C64 {
        self.e[0] + self.e[3]
    }

    pub fn det(&self) -> C64 {
        self.e[0] * self.e[3] - self.e[1] * self.e[2]
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.e.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn dist(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_re(0.5)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.dist(&self.adjoint()) <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let h = self.hermitian_part();
        let a = h.e[0].re;
        let d = h.e[3].re;
        let b = h.e[1].norm();
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mid - rad, mid + rad]
    }

    /// Bloch components `tr(Mσ_i)` for i = x, y, z (real parts).
    pub fn bloch(&self) -> [f64; 3] {
        [
            (*self * Mat2::pauli_x()).trace().re,
            (*self * Mat2::pauli_y()).trace().re,
            (*self * Mat2::pauli_z()).trace().re,
        ]
    }

    /// `exp(iφZ)` in closed form.
    pub fn exp_iz(phi: f64) -> Self {
        Mat2::diag(C64::from_polar(1.0, phi), C64::from_polar(1.0, -phi))
    }

    /// `exp(iφZ) - I`, accurate for small φ.
    pub fn exp_iz_minus_one(phi: f64) -> Self {
        Mat2::diag(expm1_i(phi), expm1_i(-phi))
    }

    /// `exp(-iφX)` in closed form.
    pub fn exp_mix(phi: f64) -> Self {
        let c = C64::new(phi.cos(), 0.0);
        let s = C64::new(0.0, -phi.sin());
        Mat2::new(c, s, s, c)
    }

    /// `exp(iα P) - I` for an involution `P` (`P² = I`).
    pub fn exp_involution_minus_one(alpha: f64, p: &Mat2) -> Self {
        let s = (0.5 * alpha).sin();
        Mat2::identity().scale_re(-2.0 * s * s) + p.scale(C64::new(0.0, alpha.sin()))
    }
}

/// `exp(iφ) - 1` without cancellation.
pub fn expm1_i(phi: f64) -> C64 {
    let s = (0.5 * phi).sin();
    C64::new(-2.0 * s * s, phi.sin())
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut e = self.e;
        for (x, y) in e.iter_mut().zip(o.e) {
            *x += y;
        }
        Mat2 { e }
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        for (x, y) in self.e.iter_mut().zip(o.e) {
            *x += y;
        }
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let mut e = self.e;
        for (x, y) in e.iter_mut().zip(o.e) {
            *x -= y;
        }
        Mat2 { e }
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        Mat2 { e: self.e.map(|z| -z) }
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, o: Mat2) -> Mat2 {
        let [a, b, c, d] = self.e;
        let [p, q, r, s] = o.e;
        Mat2::new(a * p + b * r, a * q + b * s, c * p + d * r, c * q + d * s)
    }
}

/// Model parameters and all constants derived from the mixing angle.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    /// Scaling dimension `-log2 cos θ`.
    pub x: f64,
    pub theta_c: f64,
    /// `√2 cos θ`.
    pub lambda: f64,
    /// Encoding-phase variance constant `1 - cos²(θ/2)/cos 2θ`.
    pub c: f64,
    /// Inverse correlation time `(x - 1/2) ln 2`.
    pub kappa: f64,
    /// Relative measurement imprecision.
    pub gamma: f64,
}

impl ModelParams {
    /// Accepts θ in `[0, π/2)` except the threshold `π/4`, and `Γ ≥ 0`.
    pub fn new(theta: f64, gamma: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..FRAC_PI_2).contains(&theta) || (theta - FRAC_PI_4).abs() < 1e-9 {
            return Err(Error::InvalidTheta(theta));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidGamma(gamma));
        }
        let x = -theta.cos().log2();
        let ch = (0.5 * theta).cos();
        Ok(ModelParams {
            theta,
            x,
            theta_c: FRAC_PI_4,
            lambda: std::f64::consts::SQRT_2 * theta.cos(),
            c: 1.0 - ch * ch / (2.0 * theta).cos(),
            kappa: (x - 0.5) * LN_2,
            gamma,
        })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        ModelParams::new(self.theta, gamma)
    }

    /// `cos(θ/2)/cos θ`, the coupling of a field to the scaling operator.
    pub fn coupling(&self) -> f64 {
        (0.5 * self.theta).cos() / self.theta.cos()
    }

    pub fn is_apparatus(&self) -> bool {
        self.x < 0.5
    }
}

/// The 4×2 isometry, rows indexed by the two-qubit basis `2·k + k'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry {
    pub v: [[C64; 2]; 4],
    /// Column `b` reshaped as a 2×2 matrix `V_b[k][k'] = v[2k+k'][b]`.
    cols: [Mat2; 2],
}

impl Isometry {
    pub fn from_matrix(v: [[C64; 2]; 4]) -> Self {
        let col = |b: usize| Mat2::new(v[0][b], v[1][b], v[2][b], v[3][b]);
        Isometry {
            v,
            cols: [col(0), col(1)],
        }
    }

    /// `v†v`.
    pub fn gram(&self) -> Mat2 {
        let mut g = Mat2::zero();
        for a in 0..2 {
            for b in 0..2 {
                g.e[2 * a + b] = (0..4).map(|r| self.v[r][a].conj() * self.v[r][b]).sum();
            }
        }
        g
    }

    /// Product `v·M` as a 4×2 matrix.
    pub fn right_mul(&self, m: &Mat2) -> [[C64; 2]; 4] {
        let mut out = [[ZERO; 2]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (b, x) in row.iter_mut().enumerate() {
                *x = self.v[r][0] * m.get(0, b) + self.v[r][1] * m.get(1, b);
            }
        }
        out
    }

    /// Product `(A⊗B)·v` as a 4×2 matrix.
    pub fn left_mul_kron(&self, a: &Mat2, b: &Mat2) -> [[C64; 2]; 4] {
        let k = kron(a, b);
        let mut out = [[ZERO; 2]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = (0..4).map(|s| k[r][s] * self.v[s][c]).sum();
            }
        }
        out
    }

    /// `v†(A⊗B)v` through the explicit 4×4 Kronecker product.
    pub fn sandwich(&self, a: &Mat2, b: &Mat2) -> Mat2 {
        let kv = self.left_mul_kron(a, b);
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.e[2 * i + j] = (0..4).map(|r| self.v[r][i].conj() * kv[r][j]).sum();
            }
        }
        out
    }

    /// Deviation form of the superoperator: for `Q = I + D` returns
    /// `𝗏[Q] - I = v†(D⊗I + I⊗D + D⊗D)v`, without forming `I + D`.
    #[inline]
    pub fn v_super_dev(&self, d: &Mat2) -> Mat2 {
        let dt = d.transpose();
        let mut out = Mat2::zero();
        for b in 0..2 {
            let vb = self.cols[b];
            let dv = *d * vb;
            let y = dv + vb * dt + dv * dt;
            for a in 0..2 {
                let va = self.cols[a];
                out.e[2 * a + b] = (0..4).map(|k| va.e[k].conj() * y.e[k]).sum();
            }
        }
        out
    }

    /// Factored form of `v†(Q⊗Q)v` used in inner loops.
    #[inline]
    pub fn v_super_fast(&self, q: &Mat2) -> Mat2 {
        let qt = q.transpose();
        let mut out = Mat2::zero();
        for b in 0..2 {
            let y = *q * self.cols[b] * qt;
            for a in 0..2 {
                let va = self.cols[a];
                out.e[2 * a + b] = (0..4).map(|k| va.e[k].conj() * y.e[k]).sum();
            }
        }
        out
    }
}

/// 4×4 Kronecker product, row index `2i + k`.
pub fn kron(a: &Mat2, b: &Mat2) -> [[C64; 4]; 4] {
    let mut k = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    k[2 * i + p][2 * j + q] = a.get(i, j) * b.get(p, q);
                }
            }
        }
    }
    k
}

pub fn build_isometry(params: &ModelParams) -> Isometry {
    let r = Mat2::exp_mix(params.theta / 4.0);
    let mut v = [[ZERO; 2]; 4];
    for k in 0..2 {
        // R|k⟩ is column k of R; ⟨k|R is row k of R.
        let col = [r.get(0, k), r.get(1, k)];
        for i in 0..2 {
            for j in 0..2 {
                for (b, x) in v[2 * i + j].iter_mut().enumerate() {
                    *x += col[i] * col[j] * r.get(k, b);
                }
            }
        }
    }
    Isometry::from_matrix(v)
}

/// `v†(Q⊗Q)v` via the explicit Kronecker product.
pub fn v_super(v: &Isometry, q: &Mat2) -> Mat2 {
    v.sandwich(q, q)
}

/// `exp(iuZ/η) Q exp(-i v_field Z/η)`.
pub fn kraus_twist(q: &Mat2, u: f64, v_field: f64, eta: f64) -> Mat2 {
    let l = [C64::from_polar(1.0, u / eta), C64::from_polar(1.0, -u / eta)];
    let r = [C64::from_polar(1.0, -v_field / eta), C64::from_polar(1.0, v_field / eta)];
    let mut out = *q;
    for i in 0..2 {
        for j in 0..2 {
            out.e[2 * i + j] *= l[i] * r[j];
        }
    }
    out
}

/// Symmetric twist `exp(iφZ) D exp(-iφZ)`; leaves the diagonal untouched, so it
/// acts identically on `Q` and on its deviation `Q - I`.
#[inline]
pub fn conjugate_phase(d: &Mat2, phi: f64) -> Mat2 {
    let p = C64::from_polar(1.0, 2.0 * phi);
    Mat2::new(d.e[0], d.e[1] * p, d.e[2] * p.conj(), d.e[3])
}

/// `⟨Ψ|A_S ⊗ B_A|Ψ⟩ = tr(A Bᵀ)/2` for the Bell pair `(|00⟩ + |11⟩)/√2`.
pub fn pair_expectation(a: &Mat2, b: &Mat2) -> C64 {
    (*a * b.transpose()).trace() * 0.5
}

/// OPE coefficients among the operators of infinite dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpeTable {
    pub iota_iota_eps: f64,
    pub iota_eps_iota: f64,
    pub eps_eps_eps: f64,
}

/// Scaling operators of the superoperator and their fusion data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingData {
    pub o_x: Mat2,
    pub x: f64,
    /// Identity component of `𝗏` applied to `O_x⊗O_x`.
    pub c_xx_0: f64,
    pub o_eps: Mat2,
    pub o_iota: Mat2,
    pub ope: OpeTable,
}

impl ScalingData {
    pub fn new(params: &ModelParams) -> Self {
        let (s, c) = (0.5 * params.theta).sin_cos();
        let y = Mat2::pauli_y();
        let z = Mat2::pauli_z();
        ScalingData {
            o_x: z.scale_re(c) + y.scale_re(s),
            x: params.x,
            c_xx_0: params.theta.cos().powi(2),
            o_eps: Mat2::pauli_x(),
            o_iota: z.scale_re(s) + y.scale_re(c),
            ope: OpeTable {
                iota_iota_eps: -1.0,
                iota_eps_iota: 1.0,
                eps_eps_eps: 1.0,
            },
        }
    }

    /// Coefficients of `m` in the basis `(I, O_x, O_ε, O_ι)`.
    pub fn decompose(&self, m: &Mat2) -> [C64; 4] {
        let basis = [Mat2::identity(), self.o_x, self.o_eps, self.o_iota];
        let mut re = Matrix4::<f64>::zeros();
        let mut im = Matrix4::<f64>::zeros();
        for (col, b) in basis.iter().enumerate() {
            for k in 0..4 {
                re[(k, col)] = b.e[k].re;
                im[(k, col)] = b.e[k].im;
            }
        }
        // Complex 4×4 solve written as the real 8×8 block system.
        let mut big = nalgebra::SMatrix::<f64, 8, 8>::zeros();
        big.fixed_view_mut::<4, 4>(0, 0).copy_from(&re);
        big.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-im));
        big.fixed_view_mut::<4, 4>(4, 0).copy_from(&im);
        big.fixed_view_mut::<4, 4>(4, 4).copy_from(&re);
        let rhs_re = Vector4::from_iterator(m.e.iter().map(|z| z.re));
        let rhs_im = Vector4::from_iterator(m.e.iter().map(|z| z.im));
        let mut rhs = nalgebra::SVector::<f64, 8>::zeros();
        rhs.fixed_rows_mut::<4>(0).copy_from(&rhs_re);
        rhs.fixed_rows_mut::<4>(4).copy_from(&rhs_im);
        let sol = big.lu().solve(&rhs).unwrap_or_else(nalgebra::SVector::zeros);
        [0, 1, 2, 3].map(|k| C64::new(sol[k], sol[k + 4]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn repetition_code_at_zero_angle() {
        let p = ModelParams::new(0.0, 0.1).unwrap();
        let v = build_isometry(&p);
        assert!((v.v[0][0] - ONE).norm() < 1e-15);
        assert!((v.v[3][1] - ONE).norm() < 1e-15);
        assert!(v.v[1][0].norm() + v.v[2][0].norm() + v.v[0][1].norm() < 1e-15);
    }

    #[test]
    fn rejects_threshold_angle() {
        assert!(ModelParams::new(PI / 4.0, 0.1).is_err());
        assert!(ModelParams::new(PI / 2.0, 0.1).is_err());
        assert!(ModelParams::new(-0.1, 0.1).is_err());
        assert!(ModelParams::new(0.3, -1.0).is_err());
    }

    #[test]
    fn superoperator_examples() {
        for &t in &[0.0, 0.15 * PI, 0.3 * PI] {
            let v = build_isometry(&ModelParams::new(t, 0.1).unwrap());
            assert!(v_super(&v, &Mat2::identity()).dist(&Mat2::identity()) < 1e-14);
            assert!(v_super(&v, &Mat2::pauli_x()).dist(&Mat2::pauli_x()) < 1e-14);
        }
        let v0 = build_isometry(&ModelParams::new(0.0, 0.1).unwrap());
        assert!(v_super(&v0, &Mat2::pauli_z()).dist(&Mat2::identity()) < 1e-14);
    }

    #[test]
    fn fast_forms_agree_with_kronecker() {
        let v = build_isometry(&ModelParams::new(0.3 * PI, 0.1).unwrap());
        let q = Mat2::new(
            C64::new(0.3, 0.1),
            C64::new(-0.7, 0.2),
            C64::new(0.05, -0.4),
            C64::new(1.1, 0.0),
        );
        let exact = v_super(&v, &q);
        assert!(v.v_super_fast(&q).dist(&exact) < 1e-14);
        let d = q - Mat2::identity();
        assert!((v.v_super_dev(&d) + Mat2::identity()).dist(&exact) < 1e-14);
    }

    #[test]
    fn twist_matches_dense_exponentials() {
        let q = Mat2::pauli_x();
        let (u, w, eta) = (0.7, -0.4, 1.3);
        let dense = Mat2::exp_iz(u / eta) * q * Mat2::exp_iz(-w / eta);
        assert!(kraus_twist(&q, u, w, eta).dist(&dense) < 1e-15);
        assert!(kraus_twist(&Mat2::identity(), 0.3, 0.3, 1.0).dist(&Mat2::identity()) < 1e-15);
        let sym = conjugate_phase(&q, 0.25);
        assert!(sym.dist(&kraus_twist(&q, 0.25, 0.25, 1.0)) < 1e-15);
    }

    #[test]
    fn pair_expectation_examples() {
        let z = Mat2::pauli_z();
        assert!((pair_expectation(&z, &z) - ONE).norm() < 1e-15);
        assert!(pair_expectation(&z, &Mat2::pauli_y()).norm() < 1e-15);
        let p = ModelParams::new(0.3 * PI, 0.1).unwrap();
        let s = ScalingData::new(&p);
        let got = pair_expectation(&z, &s.o_x);
        assert!((got.re - (0.15 * PI).cos()).abs() < 1e-15);
    }

    #[test]
    fn decomposition_recovers_basis() {
        let p = ModelParams::new(0.2, 0.1).unwrap();
        let s = ScalingData::new(&p);
        let m = Mat2::identity().scale_re(0.5) + s.o_iota.scale(C64::new(0.0, 2.0)) - s.o_eps;
        let c = s.decompose(&m);
        assert!((c[0] - C64::new(0.5, 0.0)).norm() < 1e-13);
        assert!(c[1].norm() < 1e-13);
        assert!((c[2] + ONE).norm() < 1e-13);
        assert!((c[3] - C64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn exp_involution_matches_closed_form() {
        let p = ModelParams::new(0.4, 0.1).unwrap();
        let s = ScalingData::new(&p);
        let a: f64 = 0.37;
        let dense = Mat2::identity().scale_re(a.cos()) + s.o_x.scale(C64::new(0.0, a.sin()));
        let d = Mat2::exp_involution_minus_one(a, &s.o_x);
        assert!((d + Mat2::identity()).dist(&dense) < 1e-15);
    }
}
