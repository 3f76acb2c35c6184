//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabfft::dfft::{distributed_forward, distributed_round_trip, scatter_real, FftPlan};
use slabfft::exchange::{exchange_strided_forward, exchange_transpose_forward, Strategy};
use slabfft::fft_core::{
    fft_c2c_inplace, fft_c2c_strided, fft_r2c_1d, Direction, TwiddleTable, TwoLevelStride,
};
use slabfft::layout::{GlobalGrid, PlaneSlab, SlabShape};
use slabfft::oracle::{dft1d_naive, dft3d_r2c_naive, expand_hermitian};
use slabfft::transport::{
    run_ranks, CommPattern, Communicator, LayoutDescriptor, Mode, Phase, Tag, WireStats,
};
use slabfft::Error;
use slabfft_cli::bench::{copy_ratio, run_bench, BenchConfig};
use slabfft_cli::compare::run_compare;
use slabfft_cli::seeded_field;

const STRATEGIES: [Strategy; 2] = [Strategy::Transpose, Strategy::Strided];
const PROCS: [usize; 3] = [1, 2, 4];

fn matrix_grids() -> Vec<GlobalGrid> {
    [(2, 2, 2), (4, 4, 4), (8, 8, 8), (4, 8, 4), (8, 4, 2)]
        .into_iter()
        .map(|(a, b, c)| GlobalGrid::new(a, b, c).unwrap())
        .collect()
}

/// Outcome of one criterion: `Ok(detail)` passes, `Err(detail)` fails.
type Outcome = Result<String, String>;

/// Name, check, and whether a failure-free run counts as PASS (else INFO).
type Criterion = (&'static str, fn() -> Outcome, bool);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.2}s exceeds {limit_s}s", elapsed.as_secs_f64())
    })
}

fn max_abs(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn bits(v: &[Complex64]) -> Vec<(u64, u64)> {
    v.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
}

/// Runs `f` for every valid (grid, p) of the criterion-1 matrix. Combinations
/// the slab decomposition cannot express must be rejected as configuration
/// errors; they are counted separately.
fn for_matrix(mut f: impl FnMut(GlobalGrid, usize, &[f64]) -> Result<(), String>) -> Result<(usize, usize), String> {
    let (mut run, mut rejected) = (0, 0);
    for grid in matrix_grids() {
        let field = seeded_field(&grid, 11);
        for p in PROCS {
            if p > grid.n0.min(grid.n1) {
                match distributed_forward(grid, p, Strategy::Strided, CommPattern::Pairwise, Mode::Serial, &field) {
                    Err(Error::Config(_)) => rejected += 1,
                    other => return Err(format!("{grid} p={p}: expected configuration error, got {other:?}")),
                }
                continue;
            }
            f(grid, p, &field)?;
            run += 1;
        }
    }
    Ok((run, rejected))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let (run, rejected) = for_matrix(|grid, p, field| {
        let expected = dft3d_r2c_naive(&grid, field);
        for strategy in STRATEGIES {
            let got = distributed_forward(grid, p, strategy, CommPattern::Pairwise, Mode::Threaded, field)
                .map_err(|e| e.to_string())?;
            let err = max_abs(&got, &expected);
            worst = worst.max(err);
            ensure(err <= 1e-10, || format!("{grid} p={p} {strategy:?}: max-abs {err:e} > 1e-10"))?;
        }
        Ok(())
    })?;
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "{run} (grid, p) pairs x 2 strategies, {rejected} rejected as invalid, worst max-abs {worst:.2e}, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in [8, 16] {
        let grid = GlobalGrid::cube(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let field: Vec<f64> = (0..grid.real_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for p in [1, 2, 4, 8] {
            for strategy in STRATEGIES {
                let back = distributed_round_trip(grid, p, strategy, CommPattern::Pairwise, Mode::Threaded, &field)
                    .map_err(|e| e.to_string())?;
                let diff: Vec<f64> = back.iter().zip(&field).map(|(a, b)| a - b).collect();
                let rel = rms(&diff) / rms(&field);
                worst = worst.max(rel);
                ensure(rel <= 1e-12, || format!("{grid} p={p} {strategy:?}: relative rms {rel:e}"))?;
                cases += 1;
            }
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("{cases} cases, worst relative rms {worst:.2e}, {:.2}s", start.elapsed().as_secs_f64()))
}

fn criterion_3() -> Outcome {
    let (run, _) = for_matrix(|grid, p, field| {
        let [t, s] = STRATEGIES.map(|strategy| {
            distributed_forward(grid, p, strategy, CommPattern::Pairwise, Mode::Serial, field)
        });
        let (t, s) = (t.map_err(|e| e.to_string())?, s.map_err(|e| e.to_string())?);
        ensure(bits(&t) == bits(&s), || format!("{grid} p={p}: spectra differ"))
    })?;
    Ok(format!("{run} (grid, p) pairs bitwise identical"))
}

/// Records the elements of every outgoing message.
struct Recorder<'a, C: Communicator> {
    inner: &'a mut C,
    sent: Vec<(usize, Vec<f64>)>,
}

impl<C: Communicator> Communicator for Recorder<'_, C> {
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn size(&self) -> usize {
        self.inner.size()
    }
    fn send_strided(&mut self, dest: usize, tag: Tag, buf: &[Complex64], desc: &LayoutDescriptor) -> slabfft::Result<()> {
        self.sent.push((dest, desc.gather(buf)?.iter().map(|z| z.re).collect()));
        self.inner.send_strided(dest, tag, buf, desc)
    }
    fn recv_strided(&mut self, src: usize, tag: Tag, buf: &mut [Complex64], desc: &LayoutDescriptor) -> slabfft::Result<()> {
        self.inner.recv_strided(src, tag, buf, desc)
    }
    fn barrier(&mut self) -> slabfft::Result<()> {
        self.inner.barrier()
    }
    fn next_tag(&mut self, phase: Phase) -> Tag {
        self.inner.next_tag(phase)
    }
    fn wire_stats(&self) -> WireStats {
        self.inner.wire_stats()
    }
}

fn four_by_four_slab(rank: usize) -> PlaneSlab {
    let shape = SlabShape::new(4, 4, 1, 2, rank).unwrap();
    let start = 8.0 * rank as f64;
    PlaneSlab::new(shape, (1..=8).map(|v| Complex64::new(start + v as f64, 0.0)).collect()).unwrap()
}

fn criterion_4() -> Outcome {
    let re = |v: &[Complex64]| v.iter().map(|z| z.re).collect::<Vec<_>>();
    let strided = run_ranks(2, Mode::Serial, |ep| {
        let slab = four_by_four_slab(ep.rank());
        let mut rec = Recorder { inner: ep, sent: Vec::new() };
        let out = exchange_strided_forward(&mut rec, CommPattern::Pairwise, slab)?;
        Ok((rec.sent, re(out.data())))
    })
    .map_err(|e| e.to_string())?;
    let (sent, buffer) = &strided[0];
    ensure(*sent == vec![(1, vec![3.0, 4.0, 7.0, 8.0])], || format!("P0 sent {sent:?}"))?;
    let want = [1.0, 2.0, 9.0, 10.0, 5.0, 6.0, 13.0, 14.0];
    ensure(buffer[..] == want, || format!("P0 buffer {buffer:?}"))?;

    let transpose = run_ranks(2, Mode::Serial, |ep| {
        exchange_transpose_forward(ep, CommPattern::Pairwise, four_by_four_slab(ep.rank())).map(|s| s.logical())
    })
    .map_err(|e| e.to_string())?;
    let rows = re(&transpose[0]);
    ensure(rows[..] == [1.0, 5.0, 9.0, 13.0, 2.0, 6.0, 10.0, 14.0], || format!("P0 rows {rows:?}"))?;
    Ok("P0 sends [3,4,7,8], holds [[1,2,9,10],[5,6,13,14]]; transpose rows [1,5,9,13],[2,6,10,14]".into())
}

fn criterion_5() -> Outcome {
    let mut configs = 0;
    let mut ratios = 0;
    for (n0, n1, n2) in [(16, 16, 16), (8, 8, 4), (32, 16, 8)] {
        let grid = GlobalGrid::new(n0, n1, n2).unwrap();
        let field = seeded_field(&grid, 5);
        for p in [1, 2, 4, 8] {
            for pattern in [CommPattern::Pairwise, CommPattern::Collective] {
                let cfg = |strategy| BenchConfig {
                    grid,
                    p,
                    strategy,
                    pattern,
                    mode: Mode::Serial,
                    iters: 2,
                    warmup: 0,
                    seed: 5,
                };
                let t = run_bench(&cfg(Strategy::Transpose), &field).map_err(|e| e.to_string())?;
                let s = run_bench(&cfg(Strategy::Strided), &field).map_err(|e| e.to_string())?;
                // Off-rank share of the spectrum, moved once each way per pair.
                let volume = 2 * (p as u64 - 1) * (grid.spectral_len() as u64 / p as u64) * 16;
                let tag = format!("{grid} p={p} {pattern:?}");
                for (rt, rs) in t.rows.iter().zip(&s.rows) {
                    ensure(rs.bytes_packed == 0 && rs.bytes_unpacked == 0, || format!("{tag}: strided copies {rs:?}"))?;
                    ensure(rt.bytes_packed == volume && rt.bytes_unpacked == volume, || {
                        format!("{tag}: transpose packed/unpacked {}/{} != {volume}", rt.bytes_packed, rt.bytes_unpacked)
                    })?;
                    ensure(rt.bytes_wire == volume && rs.bytes_wire == volume, || {
                        format!("{tag}: wire {} vs {} != {volume}", rt.bytes_wire, rs.bytes_wire)
                    })?;
                }
                if p >= 2 {
                    let r = copy_ratio(&t, &s);
                    ensure(r == Some(3.0), || format!("{tag}: ratio {r:?}"))?;
                    ratios += 1;
                }
                configs += 1;
            }
        }
    }
    Ok(format!("{configs} configurations, ratio exactly 3.0 in all {ratios} with p >= 2"))
}

fn criterion_6() -> Outcome {
    let grid = GlobalGrid::cube(32).unwrap();
    let cfg = BenchConfig {
        grid,
        p: 4,
        strategy: Strategy::Strided,
        pattern: CommPattern::Pairwise,
        mode: Mode::Threaded,
        iters: 5,
        warmup: 1,
        seed: 1,
    };
    let c = run_compare(&cfg).map_err(|e| e.to_string())?;
    ensure(c.spectra_equal, || "compare cross-check failed".into())?;
    Ok(format!(
        "informational only, not reproducible on one machine: {grid} p=4 strided vs transpose {:+.1}% wall clock, copy ratio {:.1}",
        c.percent_faster(),
        c.copy_ratio.unwrap_or(f64::NAN)
    ))
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn one_d_properties(n: usize, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let tw = TwiddleTable::new(n).map_err(|e| e.to_string())?;
    let fft = |x: &[Complex64]| {
        let mut v = x.to_vec();
        fft_c2c_inplace(&mut v, Direction::Forward, &tw).unwrap();
        v
    };
    let x = random_complex(rng, n);
    let y = random_complex(rng, n);
    let (a, b) = (Complex64::new(rng.gen_range(-2.0..2.0), 0.7), Complex64::new(-0.3, rng.gen_range(-2.0..2.0)));

    let combo: Vec<_> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
    let (fx, fy) = (fft(&x), fft(&y));
    let expect: Vec<_> = fx.iter().zip(&fy).map(|(u, v)| a * u + b * v).collect();
    let scale = a.norm().max(b.norm()).max(1.0);
    let lin = max_abs(&fft(&combo), &expect);
    ensure(lin <= 1e-12 * n as f64 * scale, || format!("n={n}: linearity {lin:e}"))?;

    let energy = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let (lhs, rhs) = (energy(&fx), n as f64 * energy(&x));
    ensure((lhs - rhs).abs() <= 1e-10 * rhs, || format!("n={n}: Parseval {lhs} vs {rhs}"))?;

    let real: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let full = fft(&real.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    for k in 0..n {
        let d = (full[k] - full[(n - k) % n].conj()).norm();
        ensure(d <= 1e-12, || format!("n={n}: Hermitian pair {k} off by {d:e}"))?;
    }
    let half = fft_r2c_1d(&real, &tw).map_err(|e| e.to_string())?;
    let d = max_abs(&half, &full[..n / 2 + 1]);
    ensure(d <= 1e-12, || format!("n={n}: r2c vs c2c {d:e}"))?;

    // Two interleaved copies: every other element of a 2n buffer.
    let mut buf = vec![Complex64::new(9.0, 9.0); 2 * n + 1];
    for (j, v) in x.iter().enumerate() {
        buf[1 + 2 * j] = *v;
    }
    let before = buf.clone();
    fft_c2c_strided(&mut buf, &TwoLevelStride::simple(n, 2, 1), Direction::Forward, &tw).map_err(|e| e.to_string())?;
    for (i, (after, orig)) in buf.iter().zip(&before).enumerate() {
        let want = if i % 2 == 1 { fx[i / 2] } else { *orig };
        ensure(after.re.to_bits() == want.re.to_bits() && after.im.to_bits() == want.im.to_bits(), || {
            format!("n={n}: strided slot {i} differs from gather-transform-scatter")
        })?;
    }

    if n <= 16 {
        let d = max_abs(&fx, &dft1d_naive(&x, Direction::Forward));
        ensure(d <= 1e-12 * n as f64, || format!("n={n}: oracle {d:e}"))?;
    }
    Ok(())
}

fn three_d_properties(grid: GlobalGrid) -> Result<(), String> {
    let field = seeded_field(&grid, 17);
    let forward = |p, strategy| {
        distributed_forward(grid, p, strategy, CommPattern::Pairwise, Mode::Serial, &field).map_err(|e| e.to_string())
    };
    let reference = forward(1, Strategy::Transpose)?;

    let full = expand_hermitian(&grid, &reference);
    let spectral: f64 = full.iter().map(|z| z.norm_sqr()).sum();
    let physical = field.iter().map(|v| v * v).sum::<f64>() * grid.real_len() as f64;
    ensure((spectral - physical).abs() <= 1e-9 * physical, || format!("{grid}: Parseval {spectral} vs {physical}"))?;

    for p in [1, 2, 4, 8].into_iter().filter(|&p| p <= grid.n0.min(grid.n1)) {
        for strategy in STRATEGIES {
            ensure(bits(&forward(p, strategy)?) == bits(&reference), || {
                format!("{grid} p={p} {strategy:?}: not bitwise equal to p=1")
            })?;
        }
    }

    let p = 2.min(grid.n0).min(grid.n1);
    let slabs = scatter_real(grid, p, &field).map_err(|e| e.to_string())?;
    for strategy in STRATEGIES {
        let stats = run_ranks(p, Mode::Serial, |ep| {
            let mut plan = FftPlan::new(grid, p, ep.rank(), strategy, CommPattern::Pairwise)?;
            let spec = plan.forward(ep, &slabs[ep.rank()])?;
            let local_max = spec.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
            plan.inverse(ep, spec)?;
            Ok((local_max, plan.last_imag_residue()))
        })
        .map_err(|e| e.to_string())?;
        let spectrum_max = stats.iter().map(|s| s.0).fold(0.0, f64::max);
        for (_, residue) in stats {
            ensure(residue <= 1e-12 * spectrum_max, || format!("{grid} {strategy:?}: residue {residue:e}"))?;
        }
    }
    Ok(())
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sizes = [2, 4, 8, 16, 64];
    for n in sizes {
        for _ in 0..20 {
            one_d_properties(n, &mut rng)?;
        }
    }
    let grids: Vec<GlobalGrid> = [(2, 2, 2), (4, 4, 4), (8, 8, 8), (16, 16, 16), (4, 8, 4), (8, 4, 2), (16, 8, 16), (2, 16, 8)]
        .into_iter()
        .map(|(a, b, c)| GlobalGrid::new(a, b, c).unwrap())
        .collect();
    for &grid in &grids {
        three_d_properties(grid)?;
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "1D n in {sizes:?} x 20 random draws, {} grids up to 16^3, {:.2}s",
        grids.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_8() -> Outcome {
    let (run, _) = for_matrix(|grid, p, field| {
        for strategy in STRATEGIES {
            for pattern in [CommPattern::Pairwise, CommPattern::Collective] {
                let go = |mode| distributed_forward(grid, p, strategy, pattern, mode, field).map_err(|e| e.to_string());
                let serial = bits(&go(Mode::Serial)?);
                for _ in 0..3 {
                    ensure(bits(&go(Mode::Threaded)?) == serial, || {
                        format!("{grid} p={p} {strategy:?} {pattern:?}: threaded differs from serial")
                    })?;
                }
            }
        }
        Ok(())
    })?;
    Ok(format!("{run} (grid, p) pairs x 2 strategies x 2 patterns, 3 threaded repeats each"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", criterion_1, true),
        ("round-trip identity", criterion_2, true),
        ("strategy equivalence", criterion_3, true),
        ("exact 4x4 exchanges", criterion_4, true),
        ("copy accounting", criterion_5, true),
        ("wall-clock gains", criterion_6, false),
        ("Hermitian/Parseval properties", criterion_7, true),
        ("determinism", criterion_8, true),
    ];
    let mut failed = 0;
    for (i, (name, run, gated)) in criteria.into_iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let status = match (&outcome, gated) {
            (Ok(_), true) => "PASS",
            (Ok(_), false) => "INFO",
            (Err(_), _) => {
                failed += 1;
                "FAIL"
            }
        };
        let detail = outcome.unwrap_or_else(|e| e);
        println!("criterion {} [{status}] {name}: {detail}", i + 1);
    }
    println!("acceptance: {} of 8 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
