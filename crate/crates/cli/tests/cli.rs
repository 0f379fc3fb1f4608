use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use tgbs::gaussian::{apply_interferometer, haar_unitary, squeezed_vacuum, squeezing_from_db};
use tgbs::rng::stream;
use tgbs::sampler::pattern_probability;
use tgbs::{ClickPattern, StepConfig};

fn tgbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tgbs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_documents_defaults_and_conventions() {
    let top = tgbs(&["--help"]);
    assert!(top.status.success());
    let text = stdout(&top);
    for needle in ["r = dB * ln(10) / 20", "T = 10^(-dB/10)", "Exit codes", "available cores"] {
        assert!(text.contains(needle), "missing {needle}");
    }
    let est = stdout(&tgbs(&["estimate", "--help"]));
    for needle in ["η", "[default: 2]", "Bytes per stored scalar", "[default: 16]", "μ", "[default: 32]"] {
        assert!(est.contains(needle), "missing {needle}");
    }
    let sample = stdout(&tgbs(&["sample", "--help"]));
    assert!(sample.contains("--squeezing-db") && sample.contains("[default: 8]"));
}

#[test]
fn sample_is_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    for out in [&a, &b] {
        let o = tgbs(&["--workers", "2", "--chunk", "4", "--no-timing", "sample", "--modes", "4", "--seed", "1", "--draws", "1000", "--out", out]);
        assert!(o.status.success());
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    // header plus column names plus one row per draw
    assert_eq!(String::from_utf8(x).unwrap().lines().count(), 1002);
}

#[test]
fn worker_count_does_not_change_draws() {
    let rows = |workers: &str| {
        let o = tgbs(&["--workers", workers, "--no-timing", "sample", "--modes", "6", "--seed", "3", "--draws", "200"]);
        assert!(o.status.success());
        stdout(&o).lines().skip(1).map(String::from).collect::<Vec<_>>()
    };
    assert_eq!(rows("1"), rows("3"));
}

#[test]
fn densest_is_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    for out in [&a, &b] {
        let o = tgbs(&[
            "--workers", "2", "--no-timing", "densest", "--graph", "planted:1", "--k", "10", "--strategy", "gbs",
            "--budget", "20", "--seed", "5", "--trace-out", out,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().nth(1), Some("samples,best_edges,strategy,seed"));
    assert_eq!(text.lines().count(), 22);
}

#[test]
fn replay_reproduces_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    let o = tgbs(&["--no-timing", "sample", "--modes", "5", "--seed", "9", "--draws", "50", "--clicks", "2", "--out", &a]);
    assert!(o.status.success());
    assert!(tgbs(&["replay", &a, "--out", &b]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn forced_pattern_prints_chain_probability() {
    let o = tgbs(&["sample", "--modes", "12", "--seed", "2", "--forced", "000000001111"]);
    assert!(o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().find(|l| l.starts_with("joint probability")).unwrap();
    let printed: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();

    let r = vec![squeezing_from_db(8.0); 12];
    let u = haar_unitary(12, &mut stream(2, "interferometer", 0)).unwrap();
    let state = apply_interferometer(&squeezed_vacuum(&r).unwrap(), &u).unwrap();
    let pattern = ClickPattern::parse("000000001111").unwrap();
    let expected = pattern_probability(&state, &pattern, None, &StepConfig::sequential()).unwrap();
    assert_eq!(printed, expected.value);
}

#[test]
fn postselected_run_reports_acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let (out, summary) = (path(dir.path(), "s.csv"), path(dir.path(), "s.json"));
    let start = Instant::now();
    let o = tgbs(&["sample", "--modes", "18", "--clicks", "6", "--out", &out, "--summary", &summary]);
    assert!(o.status.success());
    assert!(start.elapsed().as_secs() < 60);
    let text = std::fs::read_to_string(&summary).unwrap();
    for key in ["acceptance_rate", "p50", "p99", "peak_branch_count", "max_drift"] {
        assert!(text.contains(key), "summary lacks {key}");
    }
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().skip(2).all(|l| l.split(',').nth(2) == Some("6")));
    assert_eq!(csv.lines().count(), 1002);
}

#[test]
fn oracle_check_passes_and_refuses_large_instances() {
    let o = tgbs(&["oracle-check", "--modes", "6", "--trials", "20"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 2 + 20 * 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS"));

    assert_eq!(tgbs(&["oracle-check", "--modes", "11"]).status.code(), Some(1));

    let v = tgbs(&["oracle-check", "--modes", "5", "--trials", "1", "--vacuum"]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stderr).contains("vacuum nonzero entries 1"));
}

#[test]
fn estimate_reproduces_titan_figures() {
    let big = stdout(&tgbs(&["estimate", "--modes", "800", "--clicks", "20"]));
    assert!(big.contains("peak memory         76050.000 GB"));
    assert!(big.contains("minimum nodes       2377"));
    assert!(big.contains("Titan allocation    8192 nodes"));

    let small = stdout(&tgbs(&["estimate", "--modes", "50", "--clicks", "5"]));
    assert!(small.contains("peak memory         0.008 GB"));
    assert!(small.contains("minimum nodes       1\n"));

    // one branch of 2l x 2l: 2 * 16 * 4 * 100 bytes
    let zero = stdout(&tgbs(&["estimate", "--modes", "10", "--clicks", "0", "--format", "csv"]));
    let row = zero.lines().nth(2).unwrap();
    let gb: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    let exact = 12800.0 / (1u64 << 30) as f64;
    // printed to 7 significant digits
    assert!((gb - exact).abs() <= 1e-6 * exact);
}

#[test]
fn uniform_search_on_complete_graph() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("k10.clq");
    let mut text = String::from("p edge 10 45\n");
    for i in 1..=10 {
        for j in i + 1..=10 {
            text.push_str(&format!("e {i} {j}\n"));
        }
    }
    std::fs::write(&file, text).unwrap();
    let o = tgbs(&["densest", "--graph", file.to_str().unwrap(), "--k", "3", "--strategy", "uniform", "--budget", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().nth(2).unwrap().split(',').nth(1), Some("3"));
}

#[test]
fn bench_emits_one_row_per_rep() {
    let o = tgbs(&["--no-timing", "bench", "--modes", "8", "--clicks", "0-3,5", "--reps", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 10);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        let clicks: usize = f[0].parse().unwrap();
        assert_eq!(f[2].matches('1').count(), clicks);
        assert_eq!(f[4], (1usize << clicks).to_string());
    }
}

#[test]
fn exit_codes() {
    assert_eq!(tgbs(&["sample", "--modes", "0"]).status.code(), Some(1));
    assert_eq!(tgbs(&["sample", "--modes", "4", "--forced", "01"]).status.code(), Some(1));
    assert_eq!(tgbs(&["sample", "--bogus"]).status.code(), Some(1));
    assert_eq!(tgbs(&["estimate", "--modes", "5", "--clicks", "6"]).status.code(), Some(1));
    assert_eq!(
        tgbs(&["sample", "--modes", "3", "--draws", "5", "--out", "/nonexistent/dir/x.csv"]).status.code(),
        Some(3)
    );
    assert_eq!(
        tgbs(&["densest", "--graph", "/nonexistent/g.clq", "--strategy", "uniform"]).status.code(),
        Some(3)
    );
}
