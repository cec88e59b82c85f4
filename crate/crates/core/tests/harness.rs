use std::collections::BTreeSet;

use confbench::crypto::best_backend;
use confbench::harness::*;
use confbench::sim::AllocatorModel;
use confbench::store::{CodecKind, FileReader, ScanCounters};
use confbench::vector::Vector;

fn config(
    name: &str,
    codec: CodecKind,
    encryption: Encryption,
    enclave: EnclaveMode,
) -> SweepConfig {
    SweepConfig {
        name: name.to_owned(),
        scale: 1,
        codec,
        encryption,
        enclave,
        allocator: AllocatorModel::ArenaReuse,
        threads: 2,
        seed: 5,
    }
}

fn hw_or_sw() -> Encryption {
    if confbench::crypto::hardware_aes_available() {
        Encryption::HardwareAes
    } else {
        Encryption::SoftwareAes
    }
}

fn query(name: &str) -> QuerySpec {
    default_queries()
        .into_iter()
        .find(|q| q.name == name)
        .unwrap()
}

#[test]
fn generator_is_deterministic_and_consistent() {
    let a = generate_data(1, 7);
    assert_eq!(a, generate_data(1, 7));
    assert_ne!(a["lineitem"], generate_data(1, 8)["lineitem"]);
    let li = &a["lineitem"];
    let orders = &a["orders"];
    assert_eq!(li.num_rows(), 60_000);
    assert_eq!(orders.num_rows(), 15_000);
    assert_eq!(generate_data(2, 7)["lineitem"].num_rows(), 120_000);

    let Vector::Int64(okeys) = orders.column("o_orderkey").unwrap() else {
        panic!()
    };
    let okeys: BTreeSet<i64> = okeys.iter().copied().collect();
    let Vector::Int64(lkeys) = li.column("l_orderkey").unwrap() else {
        panic!()
    };
    assert!(lkeys.iter().all(|k| okeys.contains(k)));
    let Vector::Int64(pkeys) = li.column("l_partkey").unwrap() else {
        panic!()
    };
    assert!(pkeys.iter().all(|&k| (1..=2000).contains(&k)));
    let Vector::Int64(ckeys) = orders.column("o_custkey").unwrap() else {
        panic!()
    };
    assert!(ckeys.iter().all(|&k| (1..=1500).contains(&k)));
}

#[test]
fn power_score_examples() {
    assert!((power_score(&[2.0; 6]).unwrap() - 2.0).abs() < 1e-12);
    assert!((power_score(&[1.0, 4.0]).unwrap() - 2.0).abs() < 1e-12);
    let t = [0.3, 1.7, 2.2, 9.0];
    let p = power_score(&t).unwrap();
    assert!((power_score(&[9.0, 0.3, 2.2, 1.7]).unwrap() - p).abs() < 1e-12);
    let scaled: Vec<f64> = t.iter().map(|x| x * 3.5).collect();
    assert!((power_score(&scaled).unwrap() - 3.5 * p).abs() < 1e-9);
    for bad in [&[1.0, 0.0][..], &[-1.0], &[f64::NAN], &[]] {
        assert!(matches!(
            power_score(bad),
            Err(HarnessError::NonPositiveTime)
        ));
    }
}

#[test]
fn suite_parses_and_covers_categories() {
    let qs = default_queries();
    let names: Vec<&str> = qs.iter().map(|q| q.name.as_str()).collect();
    assert_eq!(names, ["q1", "q18", "q5a", "q5b", "q6", "q19"]);
    let cats: BTreeSet<String> = qs.iter().map(|q| q.category.to_string()).collect();
    assert_eq!(cats.len(), 3);
    assert!(parse_query_file("(query bad scan-heavy (scan lineitem nope))").is_err());
    assert!(parse_query_file("(query bad fast (scan lineitem l_tax))").is_err());
}

#[test]
fn run_query_records_samples_and_counters() {
    let opts = HarnessOptions::default();
    let mut ds = Dataset::generate(1, 5);
    let q = query("q6");

    let off = config(
        "off",
        CodecKind::Lightweight,
        Encryption::SoftwareAes,
        EnclaveMode::Off,
    );
    let Record::Ok(r) = run_query(&q, &off, 5, &mut ds, &opts).unwrap() else {
        panic!()
    };
    assert_eq!(r.samples_s.len(), 5);
    assert!((r.mean_s - r.samples_s.iter().sum::<f64>() / 5.0).abs() < 1e-12);
    assert!(r.sim.is_none());
    assert!(r.modeled_cost > 0.0 && r.bytes_decrypted > 0);

    // The record's decrypted bytes are exactly what the store reports for
    // the scanned columns.
    let files = ds.files(CodecKind::Lightweight, true, &opts).unwrap();
    let reader = FileReader::open(&files["lineitem"], Some(ds.key()), best_backend()).unwrap();
    let mut expected = ScanCounters::default();
    for rg in 0..reader.num_row_groups() {
        for col in ["l_shipdate", "l_discount", "l_quantity", "l_extendedprice"] {
            let c = reader
                .footer()
                .schema
                .iter()
                .position(|f| f.name == col)
                .unwrap();
            reader.read_column_chunk(rg, c, &mut expected).unwrap();
        }
    }
    assert_eq!(r.bytes_decrypted, expected.bytes_decrypted);
    assert_eq!(r.bytes_decompressed, expected.bytes_decompressed);
    assert_eq!(r.bytes_read, expected.bytes_read);

    let fit = config(
        "fit",
        CodecKind::Lightweight,
        hw_or_sw(),
        EnclaveMode::SimFit,
    );
    let Record::Ok(a) = run_query(&q, &fit, 2, &mut ds, &opts).unwrap() else {
        panic!()
    };
    let sim = a.sim.unwrap();
    assert_eq!(sim.epc_capacity_pages, sim.peak_mapped_pages);
    assert_eq!(sim.epc_evictions, 0);
    assert_eq!(sim.ecalls, 1);
    assert!(sim.ocalls > 0);

    let over = SweepConfig {
        enclave: EnclaveMode::SimOverrun,
        ..fit.clone()
    };
    let Record::Ok(b) = run_query(&q, &over, 1, &mut ds, &opts).unwrap() else {
        panic!()
    };
    let o = b.sim.unwrap();
    assert_eq!(o.epc_capacity_pages, sim.peak_mapped_pages / 2);
    assert!(o.epc_evictions > 0);
    assert!(b.modeled_cost > a.modeled_cost);
    assert_eq!(a.result_rows, b.result_rows);

    assert!(run_query(&q, &off, 0, &mut ds, &opts).is_err());
    let wrong = SweepConfig { seed: 6, ..off };
    assert!(run_query(&q, &wrong, 1, &mut ds, &opts).is_err());
}

#[test]
fn hardware_config_is_skipped_not_dropped_without_aes() {
    let opts = HarnessOptions::default();
    let mut ds = Dataset::generate(1, 5);
    let c = config(
        "hw",
        CodecKind::Uncompressed,
        Encryption::HardwareAes,
        EnclaveMode::Off,
    );
    let r = run_query(&query("q6"), &c, 1, &mut ds, &opts).unwrap();
    match r {
        Record::Skipped { reason, .. } => {
            assert!(!confbench::crypto::hardware_aes_available());
            assert!(reason.contains("hardware AES"));
        }
        Record::Ok(_) => assert!(confbench::crypto::hardware_aes_available()),
    }
}

fn small_sweep(dir: Option<&std::path::Path>) -> SweepReport {
    let matrix = vec![
        config(
            "plain",
            CodecKind::Uncompressed,
            Encryption::None,
            EnclaveMode::Off,
        ),
        config(
            "sw",
            CodecKind::Lightweight,
            Encryption::SoftwareAes,
            EnclaveMode::Off,
        ),
        config(
            "enclave",
            CodecKind::Lightweight,
            hw_or_sw(),
            EnclaveMode::SimRemoteNuma,
        ),
    ];
    let queries: Vec<QuerySpec> = ["q1", "q6"].into_iter().map(query).collect();
    sweep(
        &matrix,
        &queries,
        1,
        "plain",
        dir,
        &HarnessOptions::default(),
    )
    .unwrap()
}

#[test]
fn sweep_report_is_complete_and_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let report = small_sweep(Some(dir.path()));
    let pairs: Vec<(&str, &str)> = report
        .records
        .iter()
        .map(|r| (r.config(), r.query()))
        .collect();
    let unique: BTreeSet<_> = pairs.iter().collect();
    assert_eq!(pairs.len(), 6);
    assert_eq!(unique.len(), 6);
    for q in ["q1", "q6"] {
        assert_eq!(report.relative_cost("plain", q), Some(1.0));
    }
    assert_eq!(report.score("plain").unwrap().ratio_cost, Some(1.0));
    assert!(report.cost_ratio("sw", "plain").unwrap() > 1.0);
    assert!(report.codec_ratio.unwrap() < 1.0);
    assert!(report.calibration.is_empty());

    for f in ["report.json", "report.csv", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("config,query,status"));

    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let again = SweepReport::from_json(&json).unwrap();
    assert_eq!(again, report);

    // Rescaling every raw measurement by one factor leaves relative scores
    // unchanged.
    let scaled: Vec<Record> = report
        .records
        .iter()
        .cloned()
        .map(|r| match r {
            Record::Ok(mut q) => {
                q.mean_s *= 7.0;
                q.modeled_cost *= 7.0;
                Record::Ok(q)
            }
            s => s,
        })
        .collect();
    let rescaled = SweepReport::derive("plain", &report.configs, scaled).unwrap();
    for (a, b) in rescaled.relative.iter().zip(&report.relative) {
        assert!((a.cost - b.cost).abs() < 1e-12 && (a.wall - b.wall).abs() < 1e-12);
    }
}

#[test]
fn single_config_sweep_scores_one() {
    let c = config(
        "only",
        CodecKind::Uncompressed,
        Encryption::None,
        EnclaveMode::Off,
    );
    let report = sweep(
        &[c],
        &default_queries(),
        1,
        "only",
        None,
        &HarnessOptions::default(),
    )
    .unwrap();
    assert_eq!(report.relative.len(), 6);
    assert!(report
        .relative
        .iter()
        .all(|r| r.cost == 1.0 && r.wall == 1.0));
}

#[test]
fn sweep_rejects_bad_baselines_and_configs() {
    let opts = HarnessOptions::default();
    let qs = vec![query("q6")];
    let c = config(
        "a",
        CodecKind::Uncompressed,
        Encryption::None,
        EnclaveMode::Off,
    );
    assert!(matches!(
        sweep(std::slice::from_ref(&c), &qs, 1, "b", None, &opts),
        Err(HarnessError::Baseline(_))
    ));
    let zero = SweepConfig {
        threads: 0,
        ..c.clone()
    };
    assert!(matches!(
        sweep(&[zero], &qs, 1, "a", None, &opts),
        Err(HarnessError::Config(_))
    ));
    if !confbench::crypto::hardware_aes_available() {
        let hw = SweepConfig {
            encryption: Encryption::HardwareAes,
            ..c
        };
        assert!(matches!(
            sweep(&[hw], &qs, 1, "a", None, &opts),
            Err(HarnessError::AllInfeasible)
        ));
    }
}

#[test]
fn colour_matrix_has_eleven_distinct_bars() {
    let m = colour_matrix(10, 1, 1);
    assert_eq!(m.len(), 11);
    let names: BTreeSet<&str> = m.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names.len(), 11);
    let lp = m.iter().find(|c| c.name == "light-purple").unwrap();
    assert_eq!(
        (lp.codec, lp.encryption, lp.enclave, lp.allocator),
        (
            CodecKind::Lightweight,
            Encryption::HardwareAes,
            EnclaveMode::SimFit,
            AllocatorModel::ArenaReuse
        )
    );
    assert_eq!(
        m.iter()
            .filter(|c| c.allocator == AllocatorModel::MapHeavy)
            .count(),
        1
    );
}

#[test]
fn query_results_do_not_depend_on_file_options() {
    let opts = HarnessOptions::default();
    let mut ds = Dataset::generate(1, 5);
    let q = query("q1");
    let a = config(
        "a",
        CodecKind::Uncompressed,
        Encryption::None,
        EnclaveMode::Off,
    );
    let b = config(
        "b",
        CodecKind::Lightweight,
        Encryption::SoftwareAes,
        EnclaveMode::Off,
    );
    let ra = run_query(&q, &a, 1, &mut ds, &opts).unwrap();
    let rb = run_query(&q, &b, 1, &mut ds, &opts).unwrap();
    assert_eq!(
        ra.result().unwrap().result_rows,
        rb.result().unwrap().result_rows
    );
    assert_eq!(
        ra.result().unwrap().rows_processed,
        rb.result().unwrap().rows_processed
    );
}

#[test]
fn report_with_unbounded_checks_round_trips() {
    let report = small_sweep(None);
    let rename = |c: &str| match c {
        "plain" => "light-blue",
        "enclave" => "light-orange",
        _ => "light-green",
    };
    let records: Vec<Record> = report
        .records
        .iter()
        .cloned()
        .map(|r| match r {
            Record::Ok(mut q) => {
                q.config = rename(&q.config).to_owned();
                Record::Ok(q)
            }
            Record::Skipped {
                config,
                query,
                reason,
            } => Record::Skipped {
                config: rename(&config).to_owned(),
                query,
                reason,
            },
        })
        .collect();
    let configs: Vec<String> = report
        .configs
        .iter()
        .map(|c| rename(c).to_owned())
        .collect();
    let named = SweepReport::derive("light-blue", &configs, records).unwrap();
    assert!(named.calibration.iter().any(|c| c.high.is_none()));
    assert_eq!(
        SweepReport::from_json(&named.to_json().unwrap()).unwrap(),
        named
    );
}
