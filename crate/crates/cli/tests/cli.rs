use std::process::{Command, Output};

use slabfft_cli::bench::{read_csv, CSV_HEADER};
use slabfft_cli::args::{PatternName, StrategyName};

fn slabfft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slabfft")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn verify_default_matrix() {
    let out = slabfft(&["verify", "--max-size", "8", "--procs", "1,2,4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let checks = text.lines().filter(|l| l.ends_with("PASS")).count();
    assert!(checks >= 36, "{checks} checks");
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_guards() {
    let big = slabfft(&["verify", "--max-size", "64"]);
    assert_eq!(big.status.code(), Some(2));
    let odd = slabfft(&["verify", "--procs", "3"]);
    assert_eq!(odd.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&odd.stderr).contains("does not divide"));
    let unknown = slabfft(&["verify", "--strategy", "diagonal"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn bench_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let out = slabfft(&[
        "bench", "--size", "16,16,8", "--procs", "2,4", "--strategy", "both", "--comm", "collective",
        "--iters", "3", "--warmup", "0", "--output", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    let rows = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
    for row in &rows {
        assert_eq!((row.grid_n0, row.grid_n1, row.grid_n2), (16, 16, 8));
        assert!(row.p == 2 || row.p == 4);
        assert_eq!(row.comm_pattern, PatternName::Collective);
        let volume = 2 * (row.p as u64 - 1) * (16 * 16 * 5 / row.p as u64) * 16;
        assert_eq!(row.bytes_wire, volume);
        match row.strategy {
            StrategyName::Strided => assert_eq!((row.bytes_packed, row.bytes_unpacked), (0, 0)),
            StrategyName::Transpose => assert_eq!((row.bytes_packed, row.bytes_unpacked), (volume, volume)),
        }
    }
    let summary = String::from_utf8_lossy(&out.stderr);
    assert!(summary.contains("p=2: copy-byte ratio transpose/strided = 3.000"), "{summary}");
    assert!(summary.contains("p=4: copy-byte ratio transpose/strided = 3.000"), "{summary}");
}

#[test]
fn bench_strided_writes_exact_rows_to_stdout() {
    let out = slabfft(&["bench", "--size", "32,32,32", "--procs", "4", "--strategy", "strided", "--iters", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(stdout(&out).as_bytes()).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.bytes_packed == 0 && r.strategy == StrategyName::Strided));
    assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
}

#[test]
fn bench_single_rank_moves_nothing() {
    let out = slabfft(&["bench", "--size", "8", "--procs", "1", "--strategy", "strided", "--iters", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(stdout(&out).as_bytes()).unwrap();
    assert!(rows.iter().all(|r| r.bytes_wire == 0 && r.t_exchange_us < r.t_total_us));
}

#[test]
fn bench_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/rows.csv");
    let io = slabfft(&["bench", "--size", "8", "--procs", "2", "--output", missing.to_str().unwrap()]);
    assert_eq!(io.status.code(), Some(2));
    let zero = slabfft(&["bench", "--size", "8", "--procs", "2", "--iters", "0"]);
    assert_eq!(zero.status.code(), Some(2));
    let shape = slabfft(&["bench", "--size", "8,8", "--procs", "2"]);
    assert_eq!(shape.status.code(), Some(2));
    let size = slabfft(&["bench", "--size", "12", "--procs", "2"]);
    assert_eq!(size.status.code(), Some(2));
}

#[test]
fn compare_reports_ratio_and_cross_check() {
    let out = slabfft(&["compare", "--size", "32,32,32", "--procs", "4", "--iters", "3", "--mode", "serial"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("copy-byte ratio transpose/strided: 3.000"), "{text}");
    assert!(text.contains("spectra bitwise equal: yes"));
    assert!(text.contains("% (wall clock, informational)"));

    let single = slabfft(&["compare", "--size", "8", "--procs", "1", "--iters", "2"]);
    assert_eq!(single.status.code(), Some(0));
    assert!(stdout(&single).contains("n/a"));
}
