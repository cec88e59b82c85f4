//! One line per acceptance criterion, printed straight to stderr so it shows
//! even when the harness captures output. Any failed criterion fails the test.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use confbench::crypto::*;
use confbench::engine::{oracle_execute, results_equivalent, EngineConfig};
use confbench::harness::*;
use confbench::sim::{AllocatorModel, SimConfig, SimState, PAGE_SIZE};
use confbench::store::CodecKind;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCALE: u32 = 10;
const SEED: u64 = 20_240_901;

enum Outcome {
    Pass(String),
    Skip(String),
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f));
    let secs = start.elapsed().as_secs_f64();
    let (status, detail, ok) = match r {
        Ok(Outcome::Pass(d)) => ("PASS", d, true),
        Ok(Outcome::Skip(d)) => ("SKIP", d, true),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            ("FAIL", msg, false)
        }
    };
    let _ = writeln!(
        std::io::stderr(),
        "criterion {n} [{status}] {name} ({secs:.1}s): {detail}"
    );
    ok
}

fn hex(s: &str) -> Vec<u8> {
    if s == "-" {
        return Vec::new();
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

fn vectors(text: &str) -> Vec<Vec<Vec<u8>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(hex).collect())
        .collect()
}

fn crypto_correctness() -> Outcome {
    let backends: Vec<BackendKind> = detect_backends().into_iter().collect();
    let gcm = vectors(include_str!("fixtures/aes_gcm_vectors.txt"));
    let ctr = vectors(include_str!("fixtures/aes_ctr_vectors.txt"));
    for &b in &backends {
        for v in &gcm {
            let key = AesKey::new(&v[0]).unwrap();
            let sealed =
                gcm_seal(b, &key, &v[1].clone().try_into().unwrap(), &v[2], &v[3]).unwrap();
            assert_eq!(sealed.ciphertext, v[4], "{b} gcm vector");
            assert_eq!(sealed.tag.to_vec(), v[5], "{b} gcm tag");
        }
        for v in &ctr {
            let key = AesKey::new(&v[0]).unwrap();
            let ct = ctr_transform(b, &key, &v[1].clone().try_into().unwrap(), &v[2]).unwrap();
            assert_eq!(ct, v[3], "{b} ctr vector");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rejected = 0;
    for i in 0..1000 {
        let mut key = vec![0u8; if i % 2 == 0 { 16 } else { 32 }];
        rng.fill_bytes(&mut key);
        let key = AesKey::new(&key).unwrap();
        let nonce: [u8; 12] = rng.gen();
        let counter: [u8; 16] = rng.gen();
        let mut pt = vec![0u8; rng.gen_range(0..700)];
        rng.fill_bytes(&mut pt);
        let mut aad = vec![0u8; rng.gen_range(1..40)];
        rng.fill_bytes(&mut aad);

        let seals: Vec<GcmSealed> = backends
            .iter()
            .map(|&b| gcm_seal(b, &key, &nonce, &aad, &pt).unwrap())
            .collect();
        let ctrs: Vec<Vec<u8>> = backends
            .iter()
            .map(|&b| ctr_transform(b, &key, &counter, &pt).unwrap())
            .collect();
        assert!(
            seals.windows(2).all(|w| w[0] == w[1]),
            "backends disagree on gcm"
        );
        assert!(
            ctrs.windows(2).all(|w| w[0] == w[1]),
            "backends disagree on ctr"
        );
        for &b in &backends {
            assert_eq!(gcm_open(b, &key, &aad, &seals[0]).unwrap(), pt);
            assert_eq!(ctr_transform(b, &key, &counter, &ctrs[0]).unwrap(), pt);
        }

        let mut sealed = seals[0].clone();
        let mut aad = aad.clone();
        let target: &mut [u8] = match (i % 3, sealed.ciphertext.is_empty()) {
            (0, false) => &mut sealed.ciphertext,
            (1, _) | (0, true) => &mut sealed.tag,
            _ => &mut aad,
        };
        let bit = rng.gen_range(0..target.len() * 8);
        target[bit / 8] ^= 1 << (bit % 8);
        if backends
            .iter()
            .all(|&b| gcm_open(b, &key, &aad, &sealed) == Err(CryptoError::Authentication))
        {
            rejected += 1;
        }
    }
    assert_eq!(rejected, 1000, "tampered messages accepted");
    Outcome::Pass(format!(
        "{} gcm and {} ctr reference vectors on {} backends, 1000 equivalent random inputs, 1000/1000 tampers rejected",
        gcm.len(),
        ctr.len(),
        backends.len()
    ))
}

fn hardware_speedup() -> Outcome {
    if !hardware_aes_available() {
        return Outcome::Skip("no AES instructions on this host".into());
    }
    let mb = 1 << 20;
    let hw = bench_throughput(BackendKind::HardwareAccelerated, CipherMode::Gcm, mb, 40).unwrap();
    let sw = bench_throughput(BackendKind::SoftwarePortable, CipherMode::Gcm, mb, 8).unwrap();
    let ratio = hw / sw;
    assert!(
        ratio >= 2.0,
        "hardware/software gcm throughput {ratio:.2} < 2"
    );
    Outcome::Pass(format!(
        "gcm 1 MiB: hardware {:.0} MB/s, software {:.0} MB/s, ratio {ratio:.1} >= 2",
        hw / 1e6,
        sw / 1e6
    ))
}

fn compression_encryption(ds: &mut Dataset) -> Outcome {
    let opts = HarnessOptions::default();
    let queries = default_queries();
    let config = |name: &str, codec| SweepConfig {
        name: name.to_owned(),
        scale: SCALE,
        codec,
        encryption: Encryption::SoftwareAes,
        enclave: EnclaveMode::Off,
        allocator: AllocatorModel::ArenaReuse,
        threads: 1,
        seed: SEED,
    };
    let mut totals = BTreeMap::new();
    for (name, codec) in [
        ("uncompressed", CodecKind::Uncompressed),
        ("lightweight", CodecKind::Lightweight),
    ] {
        let c = config(name, codec);
        let (mut wall, mut decrypted) = (0.0, 0u64);
        for q in &queries {
            let r = run_query(q, &c, 3, ds, &opts).unwrap();
            let r = r.result().expect("software AES is always feasible");
            wall += r.mean_s;
            decrypted += r.bytes_decrypted;
        }
        totals.insert(name, (wall, decrypted));
    }
    let (uw, ud) = totals["uncompressed"];
    let (lw, ld) = totals["lightweight"];
    let ratio = ld as f64 / ud as f64;
    let codec_ratio = ds.codec_ratio(&opts).unwrap();
    assert!(
        lw < uw,
        "lightweight sweep {lw:.3}s not faster than uncompressed {uw:.3}s"
    );
    assert!(ratio <= 0.7, "bytes_decrypted ratio {ratio:.3} > 0.7");
    // Queries read a subset of columns, so their ratio tracks but need not
    // equal the whole-file ratio.
    assert!(
        (ratio - codec_ratio).abs() <= 0.15,
        "decrypted ratio {ratio:.3} far from file ratio {codec_ratio:.3}"
    );
    Outcome::Pass(format!(
        "software AES sweep {lw:.3}s lightweight vs {uw:.3}s uncompressed; bytes_decrypted ratio {ratio:.3} <= 0.7 (file size ratio {codec_ratio:.3})"
    ))
}

fn engine_correctness() -> Outcome {
    let tables = generate_data(1, SEED);
    let files = common::write_all(&tables, CodecKind::Lightweight, true, 16_384);
    let queries = default_queries();
    for q in &queries {
        let expected = oracle_execute(&q.plan, &tables).unwrap();
        let (got, _) = common::run(&q.plan, &files, true, &EngineConfig::default());
        results_equivalent(&got, &expected, q.plan.has_order_by(), 1e-9)
            .unwrap_or_else(|e| panic!("{} differs from oracle: {e}", q.name));
    }
    let mut runs = 0;
    for q in queries.iter().filter(|q| q.name == "q1" || q.name == "q18") {
        let (reference, _) = common::run(&q.plan, &files, true, &EngineConfig::default());
        for threads in [1, 2, 8] {
            for slots in [16, 64, 1024] {
                let config = EngineConfig {
                    threads,
                    preagg_slots: slots,
                    ..EngineConfig::default()
                };
                let (got, _) = common::run(&q.plan, &files, true, &config);
                results_equivalent(&got, &reference, true, 1e-9)
                    .unwrap_or_else(|e| panic!("{} threads {threads} slots {slots}: {e}", q.name));
                runs += 1;
            }
        }
    }
    Outcome::Pass(format!(
        "{} suite queries equal the oracle at scale 1; {runs} thread/slot configurations agree",
        queries.len()
    ))
}

fn simulator_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..1000 {
        common::lru_oracle_run(&mut rng, 40);
    }
    let mut gaps = 0;
    for _ in 0..200 {
        let seed = rng.gen();
        let touch = rng.gen_bool(0.5);
        let run = |allocator| {
            let mut s = SimState::new(SimConfig::with_capacity(64 * PAGE_SIZE, allocator)).unwrap();
            let pages = common::churn(&mut s, &mut ChaCha8Rng::seed_from_u64(seed), 30, touch);
            (pages, s.report())
        };
        let (pages, heavy) = run(AllocatorModel::MapHeavy);
        let (_, arena) = run(AllocatorModel::ArenaReuse);
        let v = pages * PAGE_SIZE;
        let closed_form = (v / 4096) as f64 * SimConfig::default().zero_page_cost;
        assert_eq!(heavy.zeroing_cost - arena.zeroing_cost, closed_form);
        assert!(heavy.resident_pages <= 64 && arena.resident_pages <= 64);
        gaps += 1;
    }
    Outcome::Pass(format!(
        "1000 random sequences match the brute-force LRU with residency within capacity; {gaps} churn workloads match V/4096*zero_page_cost"
    ))
}

struct MatrixRun {
    report: SweepReport,
}

fn colour_matrix_ratios(fig: &mut Option<MatrixRun>) -> Outcome {
    let matrix = colour_matrix(SCALE, SEED, 1);
    let report = sweep(
        &matrix,
        &default_queries(),
        1,
        "light-blue",
        None,
        &HarnessOptions::default(),
    )
    .unwrap();
    assert_eq!(
        report.calibration_label,
        "model-calibration checks, not hardware reproduction"
    );
    let ratio = |c: &str, base: &str| {
        report
            .cost_ratio(c, base)
            .unwrap_or_else(|| panic!("{c} missing"))
    };
    let within = |x: f64, target: f64| x >= target * 0.75 && x <= target * 1.25;
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    let mut check = |name: &str, v: f64, ok: bool| {
        lines.push(format!("{name} {v:.2}"));
        if !ok {
            failed.push(format!("{name} {v:.2}"));
        }
    };
    let lp = ratio("light-purple", "light-blue");
    check(
        "light-purple/light-blue in (1, 2]",
        lp,
        lp > 1.0 && lp <= 2.0,
    );
    let v = ratio("light-green", "light-blue");
    check("light-green/light-blue ~3", v, within(v, 3.0));
    let v = ratio("green", "light-blue");
    check("green/light-blue ~2", v, within(v, 2.0));
    let v = ratio("light-purple", "red");
    check("light-purple/red ~1.5", v, within(v, 1.5));
    for c in ["light-orange", "yellow", "orange"] {
        let v = ratio(c, "light-blue");
        check(&format!("{c}/light-blue >=5"), v, v >= 5.0 * 0.75);
    }
    let worst = report
        .relative
        .iter()
        .filter(|r| ["light-orange", "yellow", "orange"].contains(&r.config.as_str()))
        .max_by(|a, b| a.cost.total_cmp(&b.cost))
        .unwrap();
    // O(10x): at least 10 less the tolerance, below the next order of
    // magnitude (10^1.5).
    check(
        &format!("worst query ({} {}) ~O(10)", worst.config, worst.query),
        worst.cost,
        worst.cost >= 7.5 && worst.cost < 10f64.powf(1.5),
    );
    *fig = Some(MatrixRun { report });
    assert!(
        failed.is_empty(),
        "out of range: {}; all: {}",
        failed.join(", "),
        lines.join(", ")
    );
    Outcome::Pass(lines.join(", "))
}

fn pathology_localization(fig: &Option<MatrixRun>) -> Outcome {
    let report = match fig {
        Some(f) => &f.report,
        None => panic!("figure-one sweep did not complete"),
    };
    let mut rel: Vec<(String, f64)> = report
        .relative
        .iter()
        .filter(|r| r.config == "light-purple")
        .map(|r| (r.query.clone(), r.cost))
        .collect();
    rel.sort_by(|a, b| b.1.total_cmp(&a.1));
    let top: BTreeSet<&str> = rel.iter().take(4).map(|r| r.0.as_str()).collect();
    let expected = BTreeSet::from(["q18", "q5a", "q5b", "q19"]);
    let listing: Vec<String> = rel.iter().map(|(q, c)| format!("{q} {c:.2}")).collect();
    assert_eq!(top, expected, "SimFit ranking: {}", listing.join(", "));
    Outcome::Pass(format!(
        "SimFit relative cost ranking: {}",
        listing.join(", ")
    ))
}

#[test]
fn acceptance_criteria() {
    let mut ok = true;
    ok &= run(1, "crypto correctness", crypto_correctness);
    ok &= run(2, "hardware AES speedup", hardware_speedup);
    let mut ds = Dataset::generate(SCALE, SEED);
    ok &= run(3, "compression x encryption", || {
        compression_encryption(&mut ds)
    });
    drop(ds);
    ok &= run(4, "engine correctness", engine_correctness);
    ok &= run(5, "simulator model checks", simulator_checks);
    let mut fig = None;
    ok &= run(6, "colour matrix calibration", || {
        colour_matrix_ratios(&mut fig)
    });
    ok &= run(7, "pathology localization", || pathology_localization(&fig));
    assert!(
        ok,
        "some acceptance criteria failed; see the criterion lines above"
    );
}
