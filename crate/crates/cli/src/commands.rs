//! One function per subcommand; each writes its tables and returns the
//! summary stored in the sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use treehist::algebra::{Mat2, ModelParams};
use treehist::histories::{delta_probe, fine_grained_probe, single_time_distribution, GridSpec};
use treehist::leggett_garg::{self, lg_scan, peak, LGConfig};
use treehist::moments::{classify_phase, eta_squared, fraction_moments, mu, signal_to_noise};
use treehist::pointer::{self, completeness_check, conditional_state, ensemble_from_table};
use treehist::stats::{encoding_covariance, freezing_distribution, freezing_grid, predict_delta_scaling, HistorySampler};

use crate::args::{require_theta, DeltaArgs, LgArgs, MomentsArgs, PointerArgs, Probe, StatsArgs, StatsKind};
use crate::error::{CliError, CliResult};

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

/// Shortest representation that parses back to the same double.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn grid_for(gamma: f64, n_w: Option<usize>, w_max: Option<f64>) -> CliResult<GridSpec> {
    let mut grid = GridSpec::for_gamma(gamma)?;
    if let Some(n) = n_w {
        grid.n_w = n;
    }
    if let Some(w) = w_max {
        grid.w_max = w;
    }
    grid.validate(gamma)?;
    Ok(grid)
}

/// Sibling of `out` with `suffix` inserted before the extension.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    out.with_file_name(name)
}

pub fn delta(a: &DeltaArgs, out: &Path) -> CliResult<Value> {
    let params = ModelParams::new(require_theta(a.theta)?, a.gamma)?;
    let grid = grid_for(a.gamma, a.n_w, a.w_max)?;
    let mut w = csv_writer(out)?;
    w.write_record(["tau", "L", "l1", "stderr", "prediction"])?;
    for &tau in &a.tau.0 {
        for &l in &a.l.0 {
            let t_final = tau + l;
            let (l1, se) = match a.fine_grained {
                Some(g) => fine_grained_probe(&params, tau, t_final, g, a.samples, a.seed)?,
                None => delta_probe(&params, tau, t_final, &grid, a.samples, a.seed)?,
            };
            let pred = predict_delta_scaling(&params, tau, l)?;
            w.write_record([tau.to_string(), l.to_string(), num(l1), num(se), num(pred)])?;
        }
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    Ok(json!({ "phase": classify_phase(&params), "x": params.x, "grid": grid }))
}

pub fn pointer(a: &PointerArgs, out: &Path) -> CliResult<Value> {
    let params = ModelParams::new(require_theta(a.theta)?, a.gamma)?;
    let grid = grid_for(a.gamma, a.n_w, a.w_max)?;
    let table = single_time_distribution(&params, a.t, &grid)?;
    let samples = ensemble_from_table(&table, a.count, a.seed)?;
    pointer::write_csv(create(out)?, &samples)?;

    let residual = completeness_check(&table);
    let density_path = sibling(out, "_density");
    let mut w = csv_writer(&density_path)?;
    w.write_record(["m", "p", "bloch_x", "bloch_y", "bloch_z", "completeness_residual"])?;
    for (&m, &p) in table.n_values.iter().zip(&table.density) {
        let bloch = match conditional_state(&table, m) {
            Ok(s) => s.bloch.map(num),
            Err(treehist::Error::UndefinedState { .. }) => [String::new(), String::new(), String::new()],
            Err(e) => return Err(e.into()),
        };
        let [x, y, z] = bloch;
        w.write_record([num(m), num(p), x, y, z, num(residual)])?;
    }
    w.flush().map_err(|e| CliError::io(&density_path, e))?;
    let max_clip = samples.iter().map(|s| s.clip).fold(0.0, f64::max);
    Ok(json!({
        "density_csv": density_path,
        "completeness_residual": residual,
        "max_clip": max_clip,
        "phase": classify_phase(&params),
        "grid": grid,
    }))
}

pub fn lg(a: &LgArgs, out: &Path) -> CliResult<Value> {
    let params = ModelParams::new(require_theta(a.theta)?, 0.0)?;
    let mut rows = Vec::with_capacity(a.t.0.len());
    for &t in &a.t.0 {
        rows.extend(lg_scan(&params, a.t_m, t..=t)?);
    }
    leggett_garg::write_csv(create(out)?, &rows)?;
    let best = peak(&rows).expect("at least one window");
    Ok(json!({
        "lg_config": LGConfig::new(&params, a.t_m),
        "peak_t": best.t,
        "peak_lg": best.lg,
        "violated": best.lg > 2.0,
    }))
}

pub fn stats(a: &StatsArgs, out: &Path) -> CliResult<Value> {
    let params = ModelParams::new(require_theta(a.theta)?, a.gamma)?;
    let mut w = csv_writer(out)?;
    match a.kind {
        StatsKind::Covariance => {
            w.write_record(["dt", "covariance"])?;
            for &dt in &a.dt.0 {
                w.write_record([dt.to_string(), num(encoding_covariance(&params, dt)?)])?;
            }
        }
        StatsKind::Freezing => {
            let table = freezing_distribution(&params, &freezing_grid())?;
            w.write_record(["m", "p"])?;
            for (&m, &p) in table.n_values.iter().zip(&table.density) {
                w.write_record([num(m), num(p)])?;
            }
        }
        StatsKind::Histories => {
            let sampler = HistorySampler::new(&params, a.length)?;
            w.write_record(["history", "t", "m"])?;
            for i in 0..a.count {
                for (t, m) in sampler.sample(a.seed, i as u64).into_iter().enumerate() {
                    w.write_record([i.to_string(), t.to_string(), num(m)])?;
                }
            }
        }
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    Ok(json!({ "phase": classify_phase(&params), "x": params.x }))
}

pub fn moments(a: &MomentsArgs, out: &Path) -> CliResult<Value> {
    let params = ModelParams::new(require_theta(a.theta)?, 0.0)?;
    let probe = match a.probe {
        Probe::X => Mat2::pauli_x(),
        Probe::Y => Mat2::pauli_y(),
        Probe::Z => Mat2::pauli_z(),
    };
    let mut w = csv_writer(out)?;
    w.write_record(["t", "eta_squared", "mu", "snr", "fraction", "mu_f", "eta_f_squared"])?;
    for &t in &a.t.0 {
        let (mu_f, eta_f) = fraction_moments(&params, t, &a.fraction.0, &probe)?;
        w.write_record([
            t.to_string(),
            num(eta_squared(&params, t)?),
            num(mu(&params, t, &probe)?),
            num(signal_to_noise(&params, t, &probe)?),
            num(a.fraction.0.fraction()),
            num(mu_f),
            num(eta_f),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    Ok(json!({ "phase": classify_phase(&params), "x": params.x }))
}

/// Writes `<out>.json` next to the table.
pub fn write_sidecar(out: &Path, command: &str, config: &Value, threads: usize, wall: f64, results: Value) -> CliResult<PathBuf> {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    let path = PathBuf::from(name);
    let doc = json!({
        "command": command,
        "config": config,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": threads,
        "wall_time_s": wall,
        "results": results,
    });
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, &doc)?;
    writeln!(f).and_then(|_| f.flush()).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
