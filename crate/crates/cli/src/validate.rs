//! Cross-checks of the fast paths against the statevector oracle at small
//! depth, plus the algebraic identities of the isometry.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use treehist::algebra::{build_isometry, v_super, Mat2, ModelParams, ScalingData};
use treehist::histories::{marginal_distribution, single_time_distribution, GridSpec};
use treehist::leggett_garg::{keldysh_correlator, LGConfig};
use treehist::moments::{eta_squared, mu};
use treehist::oracle::{oracle_density, oracle_evolve, oracle_grid, oracle_history, oracle_kraus, oracle_two_time};
use treehist::pointer::conditional_state;

use crate::args::ValidateArgs;
use crate::error::CliResult;

pub const DETERMINISTIC_TOL: f64 = 1e-6;
pub const CORRELATOR_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const MC_SIGMAS: f64 = 3.0;
const MAX_DEPTH: u32 = 4;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: String, value: f64, tolerance: f64) -> Self {
        Check { name, value, tolerance, pass: value <= tolerance }
    }
}

fn oracle_checks(a: &ValidateArgs, theta: f64, out: &mut Vec<Check>) -> CliResult<()> {
    let label = format!("theta={:.4}pi", theta / PI);
    let fast = ModelParams::new(theta + a.perturb_theta, a.gamma)?;
    let grid = GridSpec::for_gamma(a.gamma)?;
    let (mut dens, mut states, mut moments, mut corr) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for t in 1..=MAX_DEPTH {
        let table = single_time_distribution(&fast, t, &grid)?;
        let step = if t == MAX_DEPTH { 24 } else { 6 };
        let idx: Vec<usize> = (0..table.n_values.len())
            .filter(|&j| table.n_values[j].abs() <= 2.5)
            .step_by(step)
            .collect();
        let ms: Vec<f64> = idx.iter().map(|&j| table.n_values[j]).collect();
        for (&j, b) in idx.iter().zip(oracle_density(theta, t, a.gamma, &ms)?) {
            dens = dens.max((table.density[j] - b).abs());
        }
        let state = oracle_evolve(theta, t)?;
        for &j in idx.iter().step_by(4) {
            if table.density[j] < 1e-2 {
                continue;
            }
            let k = oracle_kraus(&state, table.n_values[j], a.gamma)?;
            let rho = k.reduced_system().scale_re(1.0 / (k.norm * k.norm));
            states = states.max(conditional_state(&table, table.n_values[j])?.rho.dist(&rho));
        }
        let leaves: Vec<usize> = (0..state.n_leaves()).collect();
        let e2 = eta_squared(&fast, t)?;
        moments = moments.max((state.sum_squared(&leaves) - e2).abs() / e2);
        let m = mu(&fast, t, &Mat2::pauli_z())?;
        moments = moments.max((state.system_and_sum(&Mat2::pauli_z(), &leaves).re - m).abs() / m.abs());
        let q = LGConfig::new(&fast, 8).operator();
        for s in 0..t {
            corr = corr.max((keldysh_correlator(&fast, s, t, &q)? - oracle_two_time(theta, s, t, &q)?).abs());
        }
    }
    out.push(Check::new(format!("{label} single-time density"), dens, DETERMINISTIC_TOL));
    out.push(Check::new(format!("{label} conditional states"), states, DETERMINISTIC_TOL));
    out.push(Check::new(format!("{label} moments (relative)"), moments, DETERMINISTIC_TOL));
    out.push(Check::new(format!("{label} two-time correlators"), corr, CORRELATOR_TOL));

    let m_grid = oracle_grid();
    let dm = m_grid[1] - m_grid[0];
    for (tau, t) in [(1u32, 2u32), (2, 3)] {
        let table = marginal_distribution(&fast, tau, t, &grid, a.samples, a.seed)?;
        let se = table.stderr.clone().unwrap_or_default();
        let mut worst = 0.0f64;
        for target in [-1.2, -0.7, -0.3, 0.0, 0.35, 0.8, 1.3] {
            let j = table.n_values.partition_point(|&n| n < target);
            let m_t = table.n_values[j];
            let joint = m_grid
                .iter()
                .map(|&m| oracle_history(theta, tau, t, a.gamma, &[m, m_t]).map(|r| r.0))
                .collect::<treehist::Result<Vec<f64>>>()?;
            let brute = dm * (joint.iter().sum::<f64>() - 0.5 * (joint[0] + joint[joint.len() - 1]));
            worst = worst.max((table.density[j] - brute).abs() / se[j]);
        }
        out.push(Check::new(format!("{label} marginal tau={tau} T={t} (standard errors)"), worst, MC_SIGMAS));
    }
    Ok(())
}

fn algebra_checks(out: &mut Vec<Check>) -> CliResult<()> {
    let mut worst = [0.0f64; 4];
    for k in 0..20 {
        let theta = (k as f64 + 0.5) * PI / 40.0;
        let p = ModelParams::new(theta, 0.1)?;
        let v = build_isometry(&p);
        let s = ScalingData::new(&p);
        let id = Mat2::identity();
        let scaled = s.o_x.scale_re(theta.cos());
        worst[0] = worst[0].max(v.sandwich(&s.o_x, &id).dist(&scaled).max(v.sandwich(&id, &s.o_x).dist(&scaled)));
        for o in [s.o_eps, s.o_iota] {
            worst[1] = worst[1].max(v.sandwich(&o, &id).max_abs().max(v.sandwich(&id, &o).max_abs()));
        }
        let ope = v
            .sandwich(&s.o_iota, &s.o_iota)
            .dist(&s.o_eps.scale_re(s.ope.iota_iota_eps))
            .max(v.sandwich(&s.o_eps, &s.o_eps).dist(&s.o_eps.scale_re(s.ope.eps_eps_eps)));
        worst[2] = worst[2].max(ope);
        let lhs = v.right_mul(&Mat2::pauli_x());
        let rhs = v.left_mul_kron(&Mat2::pauli_x(), &Mat2::pauli_x());
        let z2 = lhs.iter().flatten().zip(rhs.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let fast = v.v_super_fast(&Mat2::pauli_z()).dist(&v_super(&v, &Mat2::pauli_z()));
        worst[3] = worst[3].max(z2).max(fast);
    }
    let names = ["scaling eigen-relation", "annihilation", "fusion coefficients", "bit-flip symmetry and fast channel"];
    for (n, w) in names.iter().zip(worst) {
        out.push(Check::new(n.to_string(), w, IDENTITY_TOL));
    }
    Ok(())
}

pub fn run(a: &ValidateArgs) -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    for theta in &a.theta {
        oracle_checks(a, theta.0, &mut checks)?;
    }
    algebra_checks(&mut checks)?;
    Ok(checks)
}

pub fn print_report<W: Write>(mut w: W, checks: &[Check]) -> std::io::Result<()> {
    for c in checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        writeln!(w, "{tag} {:<55} {:>10.3e}  (tolerance {:.0e})", c.name, c.value, c.tolerance)?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    writeln!(w, "{} checks, {failed} failed", checks.len())
}

pub fn write_csv<W: Write>(w: W, checks: &[Check]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(w);
    for c in checks {
        w.serialize(c)?;
    }
    w.flush().map_err(|e| crate::error::CliError::io("validation table", e))?;
    Ok(())
}
