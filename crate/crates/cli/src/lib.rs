//! Verification and benchmark commands behind the `slabfft` binary.

pub mod args;
pub mod bench;
pub mod compare;
pub mod verify;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabfft::layout::GlobalGrid;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] slabfft::Error),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 0 pass, 1 check failure, 2 usage or configuration problem.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Core(slabfft::Error::Config(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Usage(_) | CliError::Io(_) | CliError::Csv(_) => 2,
        }
    }
}

/// Deterministic input field in `[-1, 1)`.
pub fn seeded_field(grid: &GlobalGrid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.real_len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

pub(crate) fn rel_rms(got: &[f64], want: &[f64]) -> f64 {
    let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm: f64 = want.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        diff.sqrt()
    } else {
        (diff / norm).sqrt()
    }
}
