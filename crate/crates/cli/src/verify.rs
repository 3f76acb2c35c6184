//! The `verify` suite: every check over grids × process counts × strategies.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabfft::dfft::{distributed_forward, distributed_round_trip};
use slabfft::exchange::{ExchangePlan, Strategy};
use slabfft::layout::{validate, GlobalGrid, PlaneSlab, SlabShape};
use slabfft::oracle::{dft3d_r2c_naive, dft3d_r2c_separable, exchange_reference_for};
use slabfft::transport::{run_ranks, CommPattern, Communicator, Mode};

use crate::args::VerifyArgs;
use crate::bench::ROUND_TRIP_TOL;
use crate::{rel_rms, seeded_field, CliError};

/// Largest cube edge the oracle is run on.
pub const MAX_VERIFY_SIZE: usize = 32;

/// Grids up to this many points use the triple-sum oracle; larger ones
/// use the per-axis direct sum.
const TRIPLE_SUM_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Oracle,
    RoundTrip,
    Permutation,
    StrategyEquivalence,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Oracle => "oracle",
            Check::RoundTrip => "round-trip",
            Check::Permutation => "permutation",
            Check::StrategyEquivalence => "strategy-equivalence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub grid: GlobalGrid,
    pub p: usize,
    /// `None` for checks comparing strategies against each other.
    pub strategy: Option<Strategy>,
    pub check: Check,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig<'a> {
    pub max_size: usize,
    pub procs: &'a [usize],
    pub strategies: &'a [Strategy],
    pub pattern: CommPattern,
    pub mode: Mode,
    pub seed: u64,
}

/// Oracle tolerance: 1e-10 up to 8³, then linear in the point count.
pub fn oracle_tolerance(grid: &GlobalGrid) -> f64 {
    1e-10 * (grid.real_len() as f64 / 512.0).max(1.0)
}

fn max_abs(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Bitwise comparison reported as a max-abs error, infinite on length or
/// NaN mismatch so that any difference fails a zero tolerance.
fn bitwise_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let same = a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits());
    if same {
        0.0
    } else {
        let e = max_abs(a, b);
        if e > 0.0 { e } else { f64::INFINITY }
    }
}

/// Sends random planes through the forward exchange and compares every
/// rank's logical view with the reference redistribution.
fn permutation_error(grid: &GlobalGrid, p: usize, strategy: Strategy, cfg: &VerifyConfig) -> Result<f64, CliError> {
    let shape = SlabShape::new(grid.n0, grid.n1, grid.n2c(), p, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let global: Vec<Complex64> = (0..shape.global_len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let reference = exchange_reference_for(&shape, &global);
    let views = run_ranks(p, cfg.mode, |ep| {
        let me = shape.with_rank(ep.rank());
        let part = global[me.rank * me.local_len()..(me.rank + 1) * me.local_len()].to_vec();
        let mut plan = ExchangePlan::new(me, strategy, cfg.pattern)?;
        Ok(plan.forward(ep, PlaneSlab::new(me, part)?)?.logical())
    })?;
    Ok(views
        .iter()
        .zip(&reference)
        .map(|(v, r)| bitwise_error(v, r))
        .fold(0.0, f64::max))
}

/// Runs the full suite; errors only on configuration problems, check
/// failures are reported in the returned results.
pub fn run_verify(cfg: &VerifyConfig) -> Result<Vec<CheckResult>, CliError> {
    if cfg.max_size < 2 || cfg.max_size > MAX_VERIFY_SIZE {
        return Err(CliError::Usage(format!(
            "--max-size must be between 2 and {MAX_VERIFY_SIZE}, got {}",
            cfg.max_size
        )));
    }
    if cfg.procs.is_empty() || cfg.strategies.is_empty() {
        return Err(CliError::Usage("nothing to verify".into()));
    }
    let sizes: Vec<usize> = (1..).map(|e| 1usize << e).take_while(|&n| n <= cfg.max_size).collect();
    let largest = GlobalGrid::cube(*sizes.last().expect("max_size >= 2"))?;
    for &p in cfg.procs {
        validate(&largest, p)?;
    }

    let mut results = Vec::new();
    for &n in &sizes {
        let grid = GlobalGrid::cube(n)?;
        let field = seeded_field(&grid, cfg.seed);
        let expected = if grid.real_len() <= TRIPLE_SUM_LIMIT {
            dft3d_r2c_naive(&grid, &field)
        } else {
            dft3d_r2c_separable(&grid, &field)
        };
        for &p in cfg.procs.iter().filter(|&&p| p <= n) {
            let mut spectra = Vec::new();
            for &strategy in cfg.strategies {
                let mut push = |check, max_error, tolerance| {
                    results.push(CheckResult { grid, p, strategy: Some(strategy), check, max_error, tolerance })
                };
                let spectrum = distributed_forward(grid, p, strategy, cfg.pattern, cfg.mode, &field)?;
                push(Check::Oracle, max_abs(&spectrum, &expected), oracle_tolerance(&grid));
                let back = distributed_round_trip(grid, p, strategy, cfg.pattern, cfg.mode, &field)?;
                push(Check::RoundTrip, rel_rms(&back, &field), ROUND_TRIP_TOL);
                push(Check::Permutation, permutation_error(&grid, p, strategy, cfg)?, 0.0);
                spectra.push(spectrum);
            }
            if spectra.len() == 2 {
                results.push(CheckResult {
                    grid,
                    p,
                    strategy: None,
                    check: Check::StrategyEquivalence,
                    max_error: bitwise_error(&spectra[0], &spectra[1]),
                    tolerance: 0.0,
                });
            }
        }
    }
    Ok(results)
}

pub fn write_report(out: &mut dyn Write, results: &[CheckResult]) -> std::io::Result<()> {
    writeln!(out, "{:>10} {:>3} {:>10} {:>21} {:>12} {:>10} result", "grid", "p", "strategy", "check", "max_error", "tol")?;
    for r in results {
        let strategy = r.strategy.map_or("both".to_string(), |s| format!("{s:?}").to_lowercase());
        writeln!(
            out,
            "{:>10} {:>3} {:>10} {:>21} {:>12.3e} {:>10.1e} {}",
            r.grid.to_string(),
            r.p,
            strategy,
            r.check.name(),
            r.max_error,
            r.tolerance,
            if r.passed() { "PASS" } else { "FAIL" }
        )?;
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    writeln!(out, "{} checks, {} passed, {} failed", results.len(), results.len() - failed, failed)
}

/// The `verify` subcommand.
pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<Vec<CheckResult>, CliError> {
    let strategies = args.strategy.strategies();
    let cfg = VerifyConfig {
        max_size: args.max_size,
        procs: &args.procs,
        strategies: &strategies,
        pattern: args.comm.into(),
        mode: args.mode.into(),
        seed: args.seed,
    };
    let results = run_verify(&cfg)?;
    write_report(out, &results)?;
    if let Some(bad) = results.iter().find(|r| !r.passed()) {
        return Err(CliError::CheckFailed(format!(
            "{} p={} {:?} {}: max_error {:e} > {:e}",
            bad.grid,
            bad.p,
            bad.strategy,
            bad.check.name(),
            bad.max_error,
            bad.tolerance
        )));
    }
    Ok(results)
}
