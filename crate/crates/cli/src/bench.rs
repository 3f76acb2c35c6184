//! Per-iteration timing of forward+inverse pairs.

use std::io::Write;
use std::time::Duration;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use slabfft::dfft::{gather_spectral, scatter_real, FftPlan, StageTimings};
use slabfft::exchange::Strategy;
use slabfft::layout::GlobalGrid;
use slabfft::transport::{run_ranks, CommPattern, Communicator, CopyCounter, Mode};

use crate::args::{BenchArgs, PatternName, StrategyName};
use crate::{median, seeded_field, CliError};

/// Round trips must reproduce the input to this relative rms.
pub const ROUND_TRIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub grid: GlobalGrid,
    pub p: usize,
    pub strategy: Strategy,
    pub pattern: CommPattern,
    pub mode: Mode,
    pub iters: usize,
    pub warmup: usize,
    pub seed: u64,
}

/// One CSV row: a forward+inverse pair. Times are the slowest rank's,
/// byte counters are summed over ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub grid_n0: usize,
    pub grid_n1: usize,
    pub grid_n2: usize,
    pub p: usize,
    pub strategy: StrategyName,
    pub comm_pattern: PatternName,
    pub iter: usize,
    pub t_total_us: f64,
    pub t_stage1_us: f64,
    pub t_exchange_us: f64,
    pub t_stage3_us: f64,
    pub bytes_packed: u64,
    pub bytes_wire: u64,
    pub bytes_unpacked: u64,
}

pub const CSV_HEADER: &str = "grid_n0,grid_n1,grid_n2,p,strategy,comm_pattern,iter,t_total_us,t_stage1_us,t_exchange_us,t_stage3_us,bytes_packed,bytes_wire,bytes_unpacked";

impl BenchRow {
    pub fn counters(&self) -> CopyCounter {
        CopyCounter {
            bytes_packed: self.bytes_packed,
            bytes_wire: self.bytes_wire,
            bytes_unpacked: self.bytes_unpacked,
            bytes_local: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    /// Gathered spectrum of the last forward transform.
    pub spectrum: Vec<Complex64>,
    /// Relative rms error of the last round trip.
    pub round_trip_error: f64,
}

impl BenchRun {
    pub fn median_total_us(&self) -> f64 {
        median(&mut self.rows.iter().map(|r| r.t_total_us).collect::<Vec<_>>())
    }

    pub fn median_exchange_us(&self) -> f64 {
        median(&mut self.rows.iter().map(|r| r.t_exchange_us).collect::<Vec<_>>())
    }

    /// Counters of one forward+inverse pair (identical for every iteration).
    pub fn pair_counters(&self) -> CopyCounter {
        self.rows.first().map(BenchRow::counters).unwrap_or_default()
    }
}

struct IterSample {
    forward: StageTimings,
    inverse: StageTimings,
    counters: CopyCounter,
}

struct RankOutcome {
    samples: Vec<IterSample>,
    spectrum: slabfft::layout::SpectralSlab,
    sq_err: f64,
    sq_norm: f64,
}

fn us(d: Duration) -> f64 {
    d.as_nanos() as f64 / 1e3
}

/// Runs `warmup + iters` forward+inverse pairs and records the last `iters`.
pub fn run_bench(cfg: &BenchConfig, field: &[f64]) -> Result<BenchRun, CliError> {
    if cfg.iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }
    let slabs = scatter_real(cfg.grid, cfg.p, field)?;
    let outcomes = run_ranks(cfg.p, cfg.mode, |ep| {
        let input = &slabs[ep.rank()];
        let mut plan = FftPlan::new(cfg.grid, cfg.p, ep.rank(), cfg.strategy, cfg.pattern)?;
        let mut samples = Vec::with_capacity(cfg.iters);
        let mut last = None;
        for it in 0..cfg.warmup + cfg.iters {
            let before = plan.counters();
            let spectrum = plan.forward(ep, input)?;
            let forward = plan.forward_timings();
            let keep = (it + 1 == cfg.warmup + cfg.iters).then(|| spectrum.clone());
            let back = plan.inverse(ep, spectrum)?;
            let inverse = plan.inverse_timings();
            if it >= cfg.warmup {
                samples.push(IterSample { forward, inverse, counters: plan.counters() - before });
            }
            if let Some(spectrum) = keep {
                let sq_err = back.data().iter().zip(input.data()).map(|(a, b)| (a - b) * (a - b)).sum();
                let sq_norm = input.data().iter().map(|v| v * v).sum();
                last = Some((spectrum, sq_err, sq_norm));
            }
        }
        let (spectrum, sq_err, sq_norm) = last.expect("at least one iteration");
        Ok(RankOutcome { samples, spectrum, sq_err, sq_norm })
    })?;

    let mut rows = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        let mut t = [0.0f64; 4];
        let mut counters = CopyCounter::default();
        for rank in &outcomes {
            let s = &rank.samples[it];
            let stage = |f: fn(&StageTimings) -> Duration| us(f(&s.forward) + f(&s.inverse));
            t[0] = t[0].max(us(s.forward.total() + s.inverse.total()));
            t[1] = t[1].max(stage(|x| x.stage1));
            t[2] = t[2].max(stage(|x| x.exchange));
            t[3] = t[3].max(stage(|x| x.stage3));
            counters += s.counters;
        }
        rows.push(BenchRow {
            grid_n0: cfg.grid.n0,
            grid_n1: cfg.grid.n1,
            grid_n2: cfg.grid.n2,
            p: cfg.p,
            strategy: cfg.strategy.into(),
            comm_pattern: cfg.pattern.into(),
            iter: it,
            t_total_us: t[0],
            t_stage1_us: t[1],
            t_exchange_us: t[2],
            t_stage3_us: t[3],
            bytes_packed: counters.bytes_packed,
            bytes_wire: counters.bytes_wire,
            bytes_unpacked: counters.bytes_unpacked,
        });
    }
    let sq_err: f64 = outcomes.iter().map(|o| o.sq_err).sum();
    let sq_norm: f64 = outcomes.iter().map(|o| o.sq_norm).sum();
    let round_trip_error = if sq_norm == 0.0 { sq_err.sqrt() } else { (sq_err / sq_norm).sqrt() };
    let spectra: Vec<_> = outcomes.into_iter().map(|o| o.spectrum).collect();
    Ok(BenchRun {
        config: *cfg,
        rows,
        spectrum: gather_spectral(&spectra)?,
        round_trip_error,
    })
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<BenchRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<BenchRow>, _>>()?)
}

/// TRANSPOSE over STRIDED exchange bytes for one forward+inverse pair, if
/// both ran and the strided side moved anything.
pub fn copy_ratio(transpose: &BenchRun, strided: &BenchRun) -> Option<f64> {
    let s = strided.pair_counters().exchange_bytes();
    (s > 0).then(|| transpose.pair_counters().exchange_bytes() as f64 / s as f64)
}

/// Sanity checks every benchmark must pass before its numbers are reported.
pub fn check_run(run: &BenchRun) -> Result<(), CliError> {
    if run.round_trip_error.is_nan() || run.round_trip_error > ROUND_TRIP_TOL {
        return Err(CliError::CheckFailed(format!(
            "{} p={} {:?}: round-trip error {:e} exceeds {:e}",
            run.config.grid, run.config.p, run.config.strategy, run.round_trip_error, ROUND_TRIP_TOL
        )));
    }
    Ok(())
}

/// The `bench` subcommand. Returns the runs in execution order.
pub fn cmd_bench(args: &BenchArgs, summary: &mut dyn Write) -> Result<Vec<BenchRun>, CliError> {
    let grid = args.run.grid()?;
    for &p in &args.procs {
        slabfft::layout::validate(&grid, p)?;
    }
    let field = seeded_field(&grid, args.run.seed);
    let strategies = args.strategy.strategies();
    let mut runs = Vec::new();
    for &p in &args.procs {
        for &strategy in &strategies {
            let cfg = BenchConfig {
                grid,
                p,
                strategy,
                pattern: args.run.comm.into(),
                mode: args.run.mode.into(),
                iters: args.run.iters,
                warmup: args.run.warmup,
                seed: args.run.seed,
            };
            runs.push(run_bench(&cfg, &field)?);
        }
    }

    let rows: Vec<BenchRow> = runs.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    match &args.output {
        Some(path) => write_csv(std::fs::File::create(path)?, &rows)?,
        None => write_csv(std::io::stdout().lock(), &rows)?,
    }

    writeln!(summary, "{:>16} {:>4} {:>10} {:>16} {:>16} {:>14}", "grid", "p", "strategy", "median_total_us", "median_exch_us", "exchange_bytes")?;
    for run in &runs {
        writeln!(
            summary,
            "{:>16} {:>4} {:>10} {:>16.1} {:>16.1} {:>14}",
            run.config.grid.to_string(),
            run.config.p,
            format!("{:?}", run.config.strategy).to_lowercase(),
            run.median_total_us(),
            run.median_exchange_us(),
            run.pair_counters().exchange_bytes()
        )?;
    }
    for pair in runs.chunks(strategies.len()).filter(|c| c.len() == 2) {
        let p = pair[0].config.p;
        match copy_ratio(&pair[0], &pair[1]) {
            Some(ratio) => writeln!(summary, "p={p}: copy-byte ratio transpose/strided = {ratio:.3}")?,
            None => writeln!(summary, "p={p}: copy-byte ratio transpose/strided = n/a (no exchange traffic)")?,
        }
    }

    for run in &runs {
        check_run(run)?;
    }
    for pair in runs.chunks(strategies.len()).filter(|c| c.len() == 2) {
        if pair[0].spectrum != pair[1].spectrum {
            return Err(CliError::CheckFailed(format!(
                "p={}: transpose and strided spectra differ",
                pair[0].config.p
            )));
        }
    }
    Ok(runs)
}
