use std::collections::HashSet;

use confbench::crypto::{detect_backends, AesKey, BackendKind};
use confbench::store::*;
use confbench::vector::{Field, LogicalType, Scalar, StrVec, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn key() -> AesKey {
    AesKey::new(&[0x11; 16]).unwrap()
}

fn opts(codec: CodecKind, mode: EncryptionMode) -> WriteOptions {
    match mode {
        EncryptionMode::None => WriteOptions {
            codec,
            ..WriteOptions::default()
        },
        _ => WriteOptions::encrypted(codec, mode, key()),
    }
}

fn key_for(mode: EncryptionMode) -> Option<AesKey> {
    mode.is_encrypted().then(key)
}

fn read_all(
    file: &[u8],
    mode: EncryptionMode,
    column: &str,
) -> Result<(Vector, ScanCounters), StoreError> {
    let k = key_for(mode);
    let footer = open_file(file, k.as_ref())?;
    scan_column(
        file,
        &footer,
        column,
        k.as_ref(),
        BackendKind::SoftwarePortable,
        1000,
    )?
    .collect_column()
}

fn sample_table(rows: usize, seed: u64) -> (Vec<Field>, Vec<Vector>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flags = ["A", "N", "R"];
    let schema = vec![
        Field::new("id", LogicalType::Int64),
        Field::new("price", LogicalType::Float64),
        Field::new("day", LogicalType::Date),
        Field::new("flag", LogicalType::FixedString(10)),
    ];
    let columns = vec![
        Vector::Int64((0..rows as i64).collect()),
        Vector::Float64(
            (0..rows)
                .map(|_| (rng.gen_range(100..100_000) as f64) / 100.0)
                .collect(),
        ),
        Vector::Date((0..rows).map(|_| rng.gen_range(8000..10500)).collect()),
        Vector::Str((0..rows).map(|_| flags[rng.gen_range(0..3)]).collect()),
    ];
    (schema, columns)
}

const ALL_MODES: [EncryptionMode; 3] = [
    EncryptionMode::None,
    EncryptionMode::GcmAll,
    EncryptionMode::GcmCtrPages,
];

#[test]
fn empty_table_is_a_valid_file() {
    let (schema, columns) = sample_table(0, 1);
    for mode in ALL_MODES {
        let file = write_table(&schema, &columns, &opts(CodecKind::Lightweight, mode)).unwrap();
        let footer = open_file(&file, key_for(mode).as_ref()).unwrap();
        assert!(footer.row_group_index.is_empty());
        assert_eq!(footer.num_rows, 0);
        assert_eq!(footer.schema, schema);
        let (v, _) = read_all(&file, mode, "flag").unwrap();
        assert!(v.is_empty());
    }
}

#[test]
fn large_int_column_round_trips_compressed_ctr() {
    let values: Vec<i64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..100_000).map(|_| rng.gen_range(-1000..1000)).collect()
    };
    let schema = [Field::new("v", LogicalType::Int64)];
    let columns = [Vector::Int64(values.clone())];
    let o = opts(CodecKind::Lightweight, EncryptionMode::GcmCtrPages);
    let file = write_table(&schema, &columns, &o).unwrap();
    let (v, c) = read_all(&file, EncryptionMode::GcmCtrPages, "v").unwrap();
    assert_eq!(v, Vector::Int64(values));
    assert!(c.bytes_decrypted > 0 && c.bytes_decompressed == 800_000);
}

#[test]
fn writes_are_deterministic() {
    let (schema, columns) = sample_table(5000, 2);
    for mode in ALL_MODES {
        let o = opts(CodecKind::Lightweight, mode);
        assert_eq!(
            write_table(&schema, &columns, &o).unwrap(),
            write_table(&schema, &columns, &o).unwrap()
        );
    }
}

#[test]
fn sealing_backend_does_not_change_bytes() {
    let (schema, columns) = sample_table(3000, 3);
    let files: Vec<_> = detect_backends()
        .into_iter()
        .map(|b| {
            let o = WriteOptions {
                backend: b,
                ..opts(CodecKind::Lightweight, EncryptionMode::GcmCtrPages)
            };
            write_table(&schema, &columns, &o).unwrap()
        })
        .collect();
    assert!(files.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn open_reports_writer_footer() {
    let (schema, columns) = sample_table(70_000, 4);
    let o = WriteOptions {
        row_group_rows: 30_000,
        ..opts(CodecKind::Uncompressed, EncryptionMode::GcmAll)
    };
    let file = write_table(&schema, &columns, &o).unwrap();
    let footer = open_file(&file, Some(&key())).unwrap();
    assert_eq!(footer.schema, schema);
    assert_eq!(footer.codec, CodecKind::Uncompressed);
    assert_eq!(footer.encryption_mode, EncryptionMode::GcmAll);
    let counts: Vec<u64> = footer
        .row_group_index
        .iter()
        .map(|rg| rg.row_count)
        .collect();
    assert_eq!(counts, [30_000, 30_000, 10_000]);
    for backend in detect_backends() {
        assert_eq!(
            FileReader::open(&file, Some(&key()), backend)
                .unwrap()
                .footer(),
            &footer
        );
    }
}

#[test]
fn key_errors() {
    let (schema, columns) = sample_table(100, 5);
    let file = write_table(
        &schema,
        &columns,
        &opts(CodecKind::Lightweight, EncryptionMode::GcmAll),
    )
    .unwrap();
    let wrong = AesKey::new(&[0x12; 16]).unwrap();
    assert_eq!(
        open_file(&file, Some(&wrong)),
        Err(StoreError::Authentication(ModuleType::Footer))
    );
    assert!(matches!(open_file(&file, None), Err(StoreError::Config(_))));

    let plain = write_table(
        &schema,
        &columns,
        &opts(CodecKind::Lightweight, EncryptionMode::None),
    )
    .unwrap();
    assert!(open_file(&plain, None).is_ok());

    let missing = WriteOptions {
        key: None,
        ..opts(CodecKind::Uncompressed, EncryptionMode::GcmAll)
    };
    assert!(matches!(
        write_table(&schema, &columns, &missing),
        Err(StoreError::Config(_))
    ));
    let extra = WriteOptions {
        key: Some(key()),
        ..opts(CodecKind::Uncompressed, EncryptionMode::None)
    };
    assert!(matches!(
        write_table(&schema, &columns, &extra),
        Err(StoreError::Config(_))
    ));
}

#[test]
fn schema_errors() {
    let (schema, mut columns) = sample_table(100, 6);
    let o = opts(CodecKind::Uncompressed, EncryptionMode::None);
    let file = write_table(&schema, &columns, &o).unwrap();
    let footer = open_file(&file, None).unwrap();
    assert!(matches!(
        scan_column(
            &file,
            &footer,
            "nope",
            None,
            BackendKind::SoftwarePortable,
            10
        )
        .err(),
        Some(StoreError::Schema(_))
    ));
    columns[1] = Vector::Float64(vec![1.0; 99]);
    assert!(matches!(
        write_table(&schema, &columns, &o),
        Err(StoreError::Schema(_))
    ));
    let long = [Vector::Str(
        ["way too long for the width"]
            .into_iter()
            .collect::<StrVec>(),
    )];
    assert!(matches!(
        write_table(&[Field::new("s", LogicalType::FixedString(4))], &long, &o),
        Err(StoreError::Schema(_))
    ));
    let wrong_type = [Vector::Int64(vec![1])];
    assert!(matches!(
        write_table(&[Field::new("d", LogicalType::Date)], &wrong_type, &o),
        Err(StoreError::Schema(_))
    ));
}

#[test]
fn every_truncation_is_rejected() {
    let (schema, columns) = sample_table(300, 7);
    for mode in ALL_MODES {
        let file = write_table(&schema, &columns, &opts(CodecKind::Lightweight, mode)).unwrap();
        for len in 0..file.len() {
            let r = open_file(&file[..len], key_for(mode).as_ref());
            assert!(
                matches!(r, Err(StoreError::Format(_))),
                "{mode:?} len {len}: {r:?}"
            );
        }
    }
}

#[test]
fn oversized_batch_yields_one_short_batch() {
    let (schema, columns) = sample_table(123, 8);
    let file = write_table(
        &schema,
        &columns,
        &opts(CodecKind::Lightweight, EncryptionMode::GcmAll),
    )
    .unwrap();
    let footer = open_file(&file, Some(&key())).unwrap();
    let batches: Vec<_> = scan_column(
        &file,
        &footer,
        "day",
        Some(&key()),
        BackendKind::SoftwarePortable,
        10_000,
    )
    .unwrap()
    .collect::<Result<_, _>>()
    .unwrap();
    assert_eq!(batches.len(), 1);
    assert_eq!(batches[0].len(), 123);
    assert_eq!(batches[0].columns[0], columns[2]);
}

#[test]
fn batches_span_row_groups_in_order() {
    let (schema, columns) = sample_table(10_000, 9);
    let o = WriteOptions {
        row_group_rows: 777,
        page_target_bytes: 300,
        ..opts(CodecKind::Lightweight, EncryptionMode::GcmCtrPages)
    };
    let file = write_table(&schema, &columns, &o).unwrap();
    let footer = open_file(&file, Some(&key())).unwrap();
    let lens: Vec<usize> = scan_column(
        &file,
        &footer,
        "flag",
        Some(&key()),
        BackendKind::SoftwarePortable,
        1024,
    )
    .unwrap()
    .map(|b| b.unwrap().len())
    .collect();
    assert_eq!(lens.len(), 10);
    assert!(lens[..9].iter().all(|&n| n == 1024));
    assert_eq!(lens[9], 10_000 - 9 * 1024);
    assert_eq!(
        read_all(&file, EncryptionMode::GcmCtrPages, "flag")
            .unwrap()
            .0,
        columns[3]
    );
}

#[test]
fn compression_reduces_decrypted_bytes() {
    let (schema, columns) = sample_table(50_000, 10);
    for mode in [EncryptionMode::GcmAll, EncryptionMode::GcmCtrPages] {
        let plain = write_table(&schema, &columns, &opts(CodecKind::Uncompressed, mode)).unwrap();
        let packed = write_table(&schema, &columns, &opts(CodecKind::Lightweight, mode)).unwrap();
        for f in &schema {
            let a = read_all(&plain, mode, &f.name).unwrap().1;
            let b = read_all(&packed, mode, &f.name).unwrap().1;
            assert!(b.bytes_decrypted < a.bytes_decrypted, "{mode:?} {}", f.name);
        }
    }
}

#[test]
fn scan_touches_only_its_column() {
    let (schema, columns) = sample_table(40_000, 11);
    let o = WriteOptions {
        row_group_rows: 16_384,
        ..opts(CodecKind::Lightweight, EncryptionMode::GcmAll)
    };
    let file = write_table(&schema, &columns, &o).unwrap();
    let footer = open_file(&file, Some(&key())).unwrap();
    for (i, f) in schema.iter().enumerate() {
        let chunks: u64 = footer
            .row_group_index
            .iter()
            .map(|rg| rg.columns[i].on_disk_len)
            .sum();
        let (_, c) = read_all(&file, EncryptionMode::GcmAll, &f.name).unwrap();
        assert_eq!(c.bytes_read, chunks);
        assert!(c.bytes_read + footer.footer_bytes < file.len() as u64);
    }
}

#[test]
fn physical_reads_follow_read_chunk() {
    let (schema, columns) = sample_table(20_000, 12);
    let file = write_table(
        &schema,
        &columns,
        &opts(CodecKind::Uncompressed, EncryptionMode::None),
    )
    .unwrap();
    let footer = open_file(&file, None).unwrap();
    let len = footer.row_group_index[0].columns[0].on_disk_len;
    let mut reader =
        FileReader::with_footer(&file, footer, None, BackendKind::SoftwarePortable).unwrap();
    reader.set_read_chunk(4096);
    let mut c = ScanCounters::default();
    reader.read_column_chunk(0, 0, &mut c).unwrap();
    assert_eq!(c.physical_reads, len.div_ceil(4096));
    assert_eq!(c.bytes_read, len);
}

/// Byte range of data page `k` in a chunk whose pages all have equal size.
fn page_range(meta: &ColumnChunkMeta, k: u64, data_len: u64) -> std::ops::Range<usize> {
    let stride = (meta.on_disk_len - meta.index_len as u64) / meta.page_count as u64;
    let start = meta.offset + meta.index_len as u64 + k * stride + (stride - data_len);
    start as usize..(start + data_len) as usize
}

#[test]
fn swapped_pages_fail_authentication() {
    let schema = [Field::new("v", LogicalType::Int64)];
    let columns = [Vector::Int64((0..640).collect())];
    let o = WriteOptions {
        page_target_bytes: 256,
        ..opts(CodecKind::Uncompressed, EncryptionMode::GcmAll)
    };
    let mut file = write_table(&schema, &columns, &o).unwrap();
    let footer = open_file(&file, Some(&key())).unwrap();
    let meta = &footer.row_group_index[0].columns[0];
    assert_eq!(meta.page_count, 20);
    let data_len = 12 + 256 + 16;
    let (a, b) = (page_range(meta, 2, data_len), page_range(meta, 5, data_len));
    let tmp = file[a.clone()].to_vec();
    file.copy_within(b.clone(), a.start);
    file[b].copy_from_slice(&tmp);
    assert_eq!(
        read_all(&file, EncryptionMode::GcmAll, "v").unwrap_err(),
        StoreError::Authentication(ModuleType::DataPage)
    );
}

#[test]
fn tampered_pages_are_detected() {
    let schema = [Field::new("v", LogicalType::Int64)];
    let columns = [Vector::Int64((0..640).collect())];
    for (mode, data_len, expected) in [
        (
            EncryptionMode::GcmAll,
            12 + 256 + 16,
            StoreError::Authentication(ModuleType::DataPage),
        ),
        (
            EncryptionMode::GcmCtrPages,
            12 + 256,
            StoreError::ChecksumMismatch(3),
        ),
    ] {
        let o = WriteOptions {
            page_target_bytes: 256,
            ..opts(CodecKind::Uncompressed, mode)
        };
        let mut file = write_table(&schema, &columns, &o).unwrap();
        let footer = open_file(&file, Some(&key())).unwrap();
        let r = page_range(&footer.row_group_index[0].columns[0], 3, data_len);
        file[r.start + 40] ^= 1;
        assert_eq!(read_all(&file, mode, "v").unwrap_err(), expected);
    }
}

#[test]
fn nonces_and_descriptors_never_repeat() {
    let (schema, columns) = sample_table(30_000, 13);
    for mode in [EncryptionMode::GcmAll, EncryptionMode::GcmCtrPages] {
        let o = WriteOptions {
            row_group_rows: 4096,
            page_target_bytes: 1024,
            ..opts(CodecKind::Lightweight, mode)
        };
        let (file, issued) = write_table_traced(&schema, &columns, &o).unwrap();
        let nonces: HashSet<_> = issued.iter().map(|n| n.nonce).collect();
        let descs: HashSet<_> = issued
            .iter()
            .map(|n| (n.descriptor.module_type, n.descriptor.ordinal))
            .collect();
        assert_eq!(nonces.len(), issued.len());
        assert_eq!(descs.len(), issued.len());
        let footer = open_file(&file, Some(&key())).unwrap();
        let pages: u64 = footer
            .row_group_index
            .iter()
            .flat_map(|rg| &rg.columns)
            .map(|c| c.page_count as u64)
            .sum();
        let chunks = footer.row_group_index.len() as u64 * schema.len() as u64;
        // one footer, one index per chunk, a header and a data page per page
        assert_eq!(issued.len() as u64, 1 + chunks + 2 * pages);
        // every nonce is stored verbatim at the start of its module
        for n in &issued {
            assert!(file.windows(12).any(|w| w == n.nonce));
        }
    }
}

#[test]
fn different_files_under_one_key_use_different_nonces() {
    let (schema, a) = sample_table(1000, 14);
    let (_, b) = sample_table(1000, 15);
    let o = opts(CodecKind::Lightweight, EncryptionMode::GcmAll);
    let na: HashSet<_> = write_table_traced(&schema, &a, &o)
        .unwrap()
        .1
        .into_iter()
        .map(|n| n.nonce)
        .collect();
    let nb: HashSet<_> = write_table_traced(&schema, &b, &o)
        .unwrap()
        .1
        .into_iter()
        .map(|n| n.nonce)
        .collect();
    assert!(na.is_disjoint(&nb));
}

fn arb_table() -> impl Strategy<Value = (Vec<Field>, Vec<Vector>)> {
    (0usize..100_000, any::<u64>(), 1u8..20).prop_map(|(rows, seed, width)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = if seed % 3 == 0 { rows % 300 } else { rows };
        let alphabet: Vec<char> = "abcxyz é".chars().collect();
        let schema = vec![
            Field::new("i", LogicalType::Int64),
            Field::new("f", LogicalType::Float64),
            Field::new("d", LogicalType::Date),
            Field::new("s", LogicalType::FixedString(width)),
        ];
        let strings: StrVec = (0..rows)
            .map(|_| {
                let mut s = String::new();
                for _ in 0..rng.gen_range(0..=width as usize) {
                    let c = alphabet[rng.gen_range(0..alphabet.len())];
                    if s.len() + c.len_utf8() <= width as usize {
                        s.push(c);
                    }
                }
                s
            })
            .collect();
        let columns = vec![
            Vector::Int64(
                (0..rows)
                    .map(|_| rng.gen_range(0..50) * rng.gen::<i32>() as i64)
                    .collect(),
            ),
            Vector::Float64((0..rows).map(|_| rng.gen::<f64>() * 1e6).collect()),
            Vector::Date((0..rows).map(|_| rng.gen_range(-5000..30000)).collect()),
            Vector::Str(strings),
        ];
        (schema, columns)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_tables_round_trip(
        (schema, columns) in arb_table(),
        mode in prop::sample::select(ALL_MODES.to_vec()),
        rg in prop::sample::select(vec![1000usize, 65536]),
    ) {
        let mut decrypted = Vec::new();
        for codec in [CodecKind::Uncompressed, CodecKind::Lightweight] {
            let o = WriteOptions { row_group_rows: rg, ..opts(codec, mode) };
            let file = write_table(&schema, &columns, &o).unwrap();
            let mut per_col = Vec::new();
            for (f, c) in schema.iter().zip(&columns) {
                let (v, counters) = read_all(&file, mode, &f.name).unwrap();
                prop_assert_eq!(&v, c);
                per_col.push(counters.bytes_decrypted);
            }
            decrypted.push(per_col);
        }
        for (u, l) in decrypted[0].iter().zip(&decrypted[1]) {
            prop_assert!(l <= u);
        }
    }
}

#[test]
fn statistics_are_optional() {
    let (schema, columns) = sample_table(500, 16);
    let with = write_table(
        &schema,
        &columns,
        &opts(CodecKind::Uncompressed, EncryptionMode::None),
    )
    .unwrap();
    let without = write_table(
        &schema,
        &columns,
        &WriteOptions {
            statistics: false,
            ..opts(CodecKind::Uncompressed, EncryptionMode::None)
        },
    )
    .unwrap();
    assert!(without.len() < with.len());
    assert_eq!(
        read_all(&without, EncryptionMode::None, "price").unwrap().0,
        columns[1]
    );
    let stats = |file: &[u8]| {
        let r = FileReader::open(file, None, BackendKind::SoftwarePortable).unwrap();
        r.chunk_statistics(0, 0).unwrap()
    };
    assert_eq!(stats(&with), Some((Scalar::Int(0), Scalar::Int(499))));
    assert_eq!(stats(&without), None);
}
