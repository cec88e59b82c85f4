use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn gen(dir: &Path, encryption: &str) -> Option<String> {
    let out = ok(bench(&[
        "gen",
        "--scale",
        "1",
        "--seed",
        "3",
        "--encryption",
        encryption,
        "--out",
        dir.to_str().unwrap(),
    ]));
    assert!(dir.join("lineitem.cenc").exists());
    out.lines()
        .find_map(|l| l.strip_prefix("key ").map(str::to_owned))
}

#[test]
fn gen_then_run_matches_plain_and_encrypted() {
    let plain = tempfile::tempdir().unwrap();
    let enc = tempfile::tempdir().unwrap();
    assert!(gen(plain.path(), "none").is_none());
    let key = gen(enc.path(), "gcm-all").expect("key printed");

    let a = ok(bench(&[
        "run",
        "--data",
        plain.path().to_str().unwrap(),
        "--query",
        "q6",
    ]));
    let b = ok(bench(&[
        "run",
        "--data",
        enc.path().to_str().unwrap(),
        "--query",
        "q6",
        "--key",
        &key,
        "--epc-mib",
        "16",
    ]));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 2);
}

#[test]
fn wrong_key_fails() {
    let enc = tempfile::tempdir().unwrap();
    gen(enc.path(), "gcm-all");
    let out = bench(&[
        "run",
        "--data",
        enc.path().to_str().unwrap(),
        "--query",
        "q6",
        "--key",
        "00000000000000000000000000000000",
    ]);
    assert!(!out.status.success());
}

#[test]
fn run_plan_text_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "none");
    let out = ok(bench(&[
        "run",
        "--data",
        dir.path().to_str().unwrap(),
        "--plan",
        "(aggregate () ((n (count))) (scan part p_partkey))",
        "--stats",
    ]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("n"));
    let n: u64 = lines.next().unwrap().parse().unwrap();
    assert!(n > 0);
    assert!(out.contains("\"operators\""));
}

#[test]
fn sweep_small_matrix_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("matrix.json");
    let cfg = |name: &str, codec: &str, enc: &str| {
        format!(
            r#"{{"name":"{name}","scale":1,"codec":"{codec}","encryption":"{enc}","enclave":"Off","allocator":"ArenaReuse","threads":1,"seed":7}}"#
        )
    };
    let json = format!(
        "[{},{}]",
        cfg("base", "Uncompressed", "None"),
        cfg("sw", "Lightweight", "SoftwareAes")
    );
    std::fs::write(&matrix, json).unwrap();
    let queries = dir.path().join("q.txt");
    std::fs::write(
        &queries,
        "(query parts scan-heavy (aggregate () ((n (count))) (scan part p_partkey)))\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let summary = ok(bench(&[
        "sweep",
        "--matrix",
        matrix.to_str().unwrap(),
        "--queries",
        queries.to_str().unwrap(),
        "--reps",
        "1",
        "--baseline",
        "base",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert!(summary.contains("sw"));
    for f in ["report.json", "report.csv", "summary.txt"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn crypto_bench_lists_software_backend() {
    let out = ok(bench(&[
        "crypto-bench",
        "--bytes",
        "4096",
        "--iterations",
        "2",
        "--mode",
        "ctr",
    ]));
    assert!(out.contains("software"));
}
