use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 5
frame_size = 4096
frames = 3
qbers = [0.03]
protocols = ["cascade", "blind"]

[[codes]]
dir = "codes"
[codes.spec]
frame_size = 2000
count = 3
q_min = 0.02
q_max = 0.06

[mismatch]
q_true = [0.03]
q_hat = [0.02, 0.04]

[latency]
latencies_ms = [0.0, 2.0]
frames = 2

[cluster]
qbers = [0.02, 0.05]
fers = [0.0, 0.01]
frame_sizes = [1944]
k_max = 20

[estimator]
block_sizes = [1000, 5000, 20000]
[estimator.drift]
chunks = 2000

[continuous]
frames = 6
full_frame = 3
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recon-bench"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    dir
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn every_subcommand_writes_tables() {
    let dir = setup();
    let d = dir.path();
    for (cmd, tables) in [
        ("gen-code", &["codes"][..]),
        ("simulate", &["simulate_frames", "simulate_summary"]),
        ("sweep-qber-mismatch", &["mismatch_frames", "mismatch_summary"]),
        ("sweep-cluster", &["cluster"]),
        ("estimate-blocksize", &["estimator"]),
        ("bench-latency", &["latency"]),
        ("continuous", &["continuous_frames", "continuous_full"]),
    ] {
        ok(&run(d, &["--config", "exp.toml", "--out", "out", cmd]));
        for t in tables {
            assert!(d.join(format!("out/{t}.csv")).exists(), "{cmd}: {t}");
            assert!(d.join(format!("out/{t}.meta.toml")).exists(), "{cmd}: {t}");
        }
    }
    assert_eq!(lines(&d.join("out/codes.csv")), 4);
    // 2 protocols x 1 q x 3 frames
    assert_eq!(lines(&d.join("out/simulate_frames.csv")), 7);
    assert_eq!(lines(&d.join("out/simulate_summary.csv")), 3);
    assert_eq!(lines(&d.join("out/mismatch_summary.csv")), 5);
    // 2 q x 2 fer x 2 repeat settings
    assert_eq!(lines(&d.join("out/cluster.csv")), 9);
    assert_eq!(lines(&d.join("out/latency.csv")), 3);
    assert_eq!(lines(&d.join("out/continuous_frames.csv")), 7);
    assert_eq!(lines(&d.join("out/continuous_full.csv")), 3);
    let meta = fs::read_to_string(d.join("out/simulate_summary.meta.toml")).unwrap();
    assert!(meta.contains("code_sets"));
    assert!(meta.contains("seed = 5"));
}

#[test]
fn output_is_reproducible_and_seed_sensitive() {
    let dir = setup();
    let d = dir.path();
    let args = |out: &'static str, seed: &'static str| {
        ["--config", "exp.toml", "--out", out, "--seed", seed, "simulate"]
    };
    ok(&run(d, &args("a", "7")));
    ok(&run(d, &args("b", "7")));
    ok(&run(d, &args("c", "8")));
    let read = |p: &str| fs::read_to_string(d.join(p)).unwrap();
    assert_eq!(read("a/simulate_frames.csv"), read("b/simulate_frames.csv"));
    assert_eq!(read("a/simulate_frames.meta.toml"), read("b/simulate_frames.meta.toml"));
    assert_ne!(read("a/simulate_frames.csv"), read("c/simulate_frames.csv"));
}

#[test]
fn latency_flag_reaches_the_session() {
    let dir = setup();
    let d = dir.path();
    ok(&run(d, &["--config", "exp.toml", "--out", "z", "simulate"]));
    ok(&run(d, &["--config", "exp.toml", "--out", "l", "--latency-ms", "2", "simulate"]));
    let sim_time = |p: &str| -> Vec<f64> {
        let mut r = csv::Reader::from_path(d.join(p)).unwrap();
        let col = r.headers().unwrap().iter().position(|h| h == "sim_time").unwrap();
        r.records().map(|x| x.unwrap()[col].parse().unwrap()).collect()
    };
    assert!(sim_time("z/simulate_frames.csv").iter().all(|&t| t == 0.0));
    assert!(sim_time("l/simulate_frames.csv").iter().all(|&t| t > 0.0));
}

#[test]
fn bad_config_exits_2() {
    let dir = setup();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "frames = 0\n").unwrap();
    assert_eq!(run(d, &["--config", "bad.toml", "simulate"]).status.code(), Some(2));
    fs::write(d.join("typo.toml"), "frame = 10\n").unwrap();
    assert_eq!(run(d, &["--config", "typo.toml", "simulate"]).status.code(), Some(2));
    assert_eq!(run(d, &["--config", "missing.toml", "simulate"]).status.code(), Some(2));
    assert_eq!(
        run(d, &["--config", "exp.toml", "--latency-ms", "-1", "simulate"]).status.code(),
        Some(2)
    );
}

#[test]
fn corrupt_code_cache_exits_3() {
    let dir = setup();
    let d = dir.path();
    ok(&run(d, &["--config", "exp.toml", "--out", "out", "gen-code"]));
    let alist = fs::read_dir(d.join("codes"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "alist"))
        .unwrap();
    fs::write(&alist, "not an alist").unwrap();
    let o = run(d, &["--config", "exp.toml", "--out", "out", "simulate"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
