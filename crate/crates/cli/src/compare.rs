//! The `compare` subcommand: both strategies back to back on one input.

use std::io::Write;

use slabfft::exchange::Strategy;
use slabfft::layout::validate;

use crate::args::CompareArgs;
use crate::bench::{check_run, copy_ratio, run_bench, BenchConfig, BenchRun};
use crate::{seeded_field, CliError};

#[derive(Debug, Clone)]
pub struct Comparison {
    pub transpose: BenchRun,
    pub strided: BenchRun,
    /// `None` when p = 1 and neither strategy moves any data.
    pub copy_ratio: Option<f64>,
    pub spectra_equal: bool,
}

impl Comparison {
    /// How much faster STRIDED is, as a percentage of the TRANSPOSE median.
    /// Informational only.
    pub fn percent_faster(&self) -> f64 {
        let t = self.transpose.median_total_us();
        100.0 * (t - self.strided.median_total_us()) / t
    }
}

pub fn run_compare(base: &BenchConfig) -> Result<Comparison, CliError> {
    let field = seeded_field(&base.grid, base.seed);
    let transpose = run_bench(&BenchConfig { strategy: Strategy::Transpose, ..*base }, &field)?;
    let strided = run_bench(&BenchConfig { strategy: Strategy::Strided, ..*base }, &field)?;
    Ok(Comparison {
        copy_ratio: copy_ratio(&transpose, &strided),
        spectra_equal: transpose.spectrum == strided.spectrum,
        transpose,
        strided,
    })
}

pub fn write_summary(out: &mut dyn Write, c: &Comparison) -> std::io::Result<()> {
    let cfg = &c.transpose.config;
    writeln!(out, "grid {} p={} {:?} {:?}, {} iterations", cfg.grid, cfg.p, cfg.pattern, cfg.mode, cfg.iters)?;
    writeln!(out, "{:>10} {:>16} {:>16} {:>14}", "strategy", "median_total_us", "median_exch_us", "exchange_bytes")?;
    for (name, run) in [("transpose", &c.transpose), ("strided", &c.strided)] {
        writeln!(
            out,
            "{:>10} {:>16.1} {:>16.1} {:>14}",
            name,
            run.median_total_us(),
            run.median_exchange_us(),
            run.pair_counters().exchange_bytes()
        )?;
    }
    writeln!(out, "strided vs transpose: {:+.1}% (wall clock, informational)", c.percent_faster())?;
    match c.copy_ratio {
        Some(r) => writeln!(out, "copy-byte ratio transpose/strided: {r:.3}")?,
        None => writeln!(out, "copy-byte ratio transpose/strided: n/a (no exchange traffic)")?,
    }
    writeln!(out, "spectra bitwise equal: {}", if c.spectra_equal { "yes" } else { "NO" })
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<Comparison, CliError> {
    let grid = args.run.grid()?;
    validate(&grid, args.procs)?;
    let base = BenchConfig {
        grid,
        p: args.procs,
        strategy: Strategy::Strided,
        pattern: args.run.comm.into(),
        mode: args.run.mode.into(),
        iters: args.run.iters,
        warmup: args.run.warmup,
        seed: args.run.seed,
    };
    let c = run_compare(&base)?;
    write_summary(out, &c)?;
    check_run(&c.transpose)?;
    check_run(&c.strided)?;
    if !c.spectra_equal {
        return Err(CliError::CheckFailed("transpose and strided spectra differ".into()));
    }
    Ok(c)
}
