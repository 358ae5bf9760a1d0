//! Reproducible random streams and block-jackknife error estimates.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Upper bound on jackknife blocks.
pub const MAX_BLOCKS: usize = 32;

/// Independent stream for sample `index`; identical for any thread schedule.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Splits `0..samples` into at most `MAX_BLOCKS` contiguous, near-equal blocks.
pub fn block_ranges(samples: usize) -> Vec<Range<usize>> {
    let b = samples.clamp(1, MAX_BLOCKS);
    (0..b).map(|i| (i * samples / b)..((i + 1) * samples / b)).collect()
}

/// Jackknife standard error from leave-one-block-out estimates.
pub fn jackknife_stderr(leave_out: &[f64]) -> f64 {
    let b = leave_out.len() as f64;
    if leave_out.len() < 2 {
        return f64::NAN;
    }
    let mean = leave_out.iter().sum::<f64>() / b;
    let ss: f64 = leave_out.iter().map(|x| (x - mean) * (x - mean)).sum();
    ((b - 1.0) / b * ss).sqrt()
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
