mod common;

use confbench::sim::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn state(pages: u64, allocator: AllocatorModel) -> SimState {
    SimState::new(SimConfig::with_capacity(pages * PAGE_SIZE, allocator)).unwrap()
}

#[test]
fn fresh_state_reports_zero() {
    let s = state(16, AllocatorModel::ArenaReuse);
    assert_eq!(s.report(), SimReport::default());
}

#[test]
fn hand_simulated_lru_double_sweep() {
    // Capacity 4, working set 8 pages (0..8), ArenaReuse.
    // alloc: pages 0..8 become resident in order; 0..4 are evicted, {4,5,6,7} remain.
    // sweep 1: page 0 faults and evicts 4, 1 evicts 5, 2 evicts 6, 3 evicts 7,
    //          then 4 evicts 0, ..., 7 evicts 3: 8 loads, 8 evictions.
    // sweep 2: identical, since the resident set is again {4,5,6,7}.
    // each sweep: 8 * 40000 (load) + 8 * 40000 (evict) + 32768 bytes = 672768.
    let mut s = state(4, AllocatorModel::ArenaReuse);
    let r = s.alloc(8 * PAGE_SIZE).unwrap();
    assert_eq!(s.resident_pages(), [4, 5, 6, 7]);
    assert_eq!(s.report().epc_evictions, 4);
    for _ in 0..2 {
        let cost = s
            .touch(r, 0, 8 * PAGE_SIZE, AccessKind::SequentialRead)
            .unwrap();
        assert_eq!(cost, 672_768.0);
        assert_eq!(s.resident_pages(), [4, 5, 6, 7]);
    }
    let rep = s.report();
    assert_eq!(rep.epc_loads, 16);
    assert_eq!(rep.epc_evictions - 4, 16);
    assert!(rep.epc_evictions - 4 >= 8);
}

#[test]
fn resident_hit_costs_only_copy() {
    let cfg = SimConfig {
        numa_factor: 1.3,
        ..SimConfig::with_capacity(64 * PAGE_SIZE, AllocatorModel::ArenaReuse)
    };
    let mut s = SimState::new(cfg).unwrap();
    let r = s.alloc(PAGE_SIZE).unwrap();
    let before = s.report();
    let cost = s.touch(r, 100, 1000, AccessKind::SequentialRead).unwrap();
    assert_eq!(cost, 1000.0 * 1.0 * 1.3);
    let after = s.report();
    assert_eq!(
        (after.epc_loads, after.epc_evictions),
        (before.epc_loads, before.epc_evictions)
    );
}

#[test]
fn random_access_ratio_is_cache_miss_factor() {
    let mut a = state(64, AllocatorModel::ArenaReuse);
    let mut b = state(64, AllocatorModel::ArenaReuse);
    let ra = a.alloc(10 * PAGE_SIZE).unwrap();
    let rb = b.alloc(10 * PAGE_SIZE).unwrap();
    let seq = a.touch(ra, 5, 30_000, AccessKind::SequentialRead).unwrap();
    let rnd = b.touch(rb, 5, 30_000, AccessKind::RandomRead).unwrap();
    assert_eq!(rnd / seq, 5.0);
    // also with paging in the charge
    let mut a = state(2, AllocatorModel::ArenaReuse);
    let mut b = state(2, AllocatorModel::ArenaReuse);
    let ra = a.alloc(10 * PAGE_SIZE).unwrap();
    let rb = b.alloc(10 * PAGE_SIZE).unwrap();
    let seq = a
        .touch(ra, 0, 10 * PAGE_SIZE, AccessKind::SequentialWrite)
        .unwrap();
    let rnd = b
        .touch(rb, 0, 10 * PAGE_SIZE, AccessKind::RandomWrite)
        .unwrap();
    assert_eq!(rnd, seq * 5.0);
}

#[test]
fn repeated_touches_are_additive() {
    let mut s = state(8, AllocatorModel::ArenaReuse);
    let r = s.alloc(PAGE_SIZE).unwrap();
    let single = s.touch(r, 0, 512, AccessKind::RandomRead).unwrap();
    let base = s.report().accumulated_cost;
    for _ in 0..9 {
        s.touch(r, 0, 512, AccessKind::RandomRead).unwrap();
    }
    assert_eq!(s.report().accumulated_cost - base, 9.0 * single);
}

#[test]
fn boundary_calls() {
    let mut s = state(8, AllocatorModel::ArenaReuse);
    assert_eq!(s.charge_boundary(BoundaryKind::ECall, 0), 50_000.0);
    assert_eq!(s.charge_boundary(BoundaryKind::OCall, 1000), 51_000.0);
    let r = s.report();
    assert_eq!((r.ecalls, r.ocalls, r.boundary_bytes), (1, 1, 1000));
    assert_eq!(r.accumulated_cost, 101_000.0);
}

#[test]
fn map_heavy_alloc_zeroes_every_time() {
    let mut s = state(1024, AllocatorModel::MapHeavy);
    let r = s.alloc(8192).unwrap();
    assert_eq!(s.report().pages_zeroed, 2);
    assert_eq!(s.report().accumulated_cost, 16_000.0);
    s.free(r).unwrap();
    s.alloc(8192).unwrap();
    assert_eq!(s.report().pages_zeroed, 4);
}

#[test]
fn arena_alloc_reuses_without_zeroing() {
    let mut s = state(1024, AllocatorModel::ArenaReuse);
    let r = s.alloc(8192).unwrap();
    let pages = s.region_pages(r).unwrap().to_vec();
    s.free(r).unwrap();
    let r2 = s.alloc(8192).unwrap();
    assert_eq!(s.region_pages(r2).unwrap(), pages.as_slice());
    assert_eq!(s.report().pages_zeroed, 0);
    assert_eq!(s.report().accumulated_cost, 0.0);
}

#[test]
fn free_semantics() {
    for (allocator, resident_after) in [
        (AllocatorModel::MapHeavy, 1),
        (AllocatorModel::ArenaReuse, 3),
    ] {
        let mut s = state(64, allocator);
        let a = s.alloc(2 * PAGE_SIZE).unwrap();
        let _b = s.alloc(PAGE_SIZE).unwrap();
        assert_eq!(s.report().allocated_regions, 2);
        assert_eq!(s.report().resident_pages, 3);
        s.free(a).unwrap();
        assert_eq!(s.report().allocated_regions, 1);
        assert_eq!(s.report().resident_pages, resident_after);
        assert!(matches!(s.free(a), Err(SimError::Usage(_))));
    }
}

#[test]
fn usage_errors() {
    let mut s = state(8, AllocatorModel::ArenaReuse);
    assert!(matches!(s.alloc(0), Err(SimError::Usage(_))));
    let r = s.alloc(100).unwrap();
    assert!(s.touch(r, 0, 100, AccessKind::SequentialRead).is_ok());
    assert!(matches!(
        s.touch(r, 1, 100, AccessKind::SequentialRead),
        Err(SimError::Usage(_))
    ));
    assert!(matches!(
        s.touch(RegionId(99), 0, 1, AccessKind::SequentialRead),
        Err(SimError::Usage(_))
    ));
    assert_eq!(s.touch(r, 100, 0, AccessKind::SequentialRead), Ok(0.0));
}

#[test]
fn lru_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..200 {
        common::lru_oracle_run(&mut rng, 60);
    }
}

#[test]
fn allocator_zeroing_gap_is_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let seed = rng.gen();
        let touch = rng.gen_bool(0.5);
        let run = |allocator| {
            let mut s = state(1 << 16, allocator);
            let pages = common::churn(&mut s, &mut ChaCha8Rng::seed_from_u64(seed), 40, touch);
            (pages, s.report())
        };
        let (pages, heavy) = run(AllocatorModel::MapHeavy);
        let (_, arena) = run(AllocatorModel::ArenaReuse);
        let closed_form = pages as f64 * 8000.0;
        assert_eq!(heavy.zeroing_cost - arena.zeroing_cost, closed_form);
        assert!(heavy.accumulated_cost - arena.accumulated_cost >= closed_form);
    }
}

fn random_workload(s: &mut SimState, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut live = Vec::new();
    for _ in 0..80 {
        match rng.gen_range(0..6) {
            0 => live.push(s.alloc(rng.gen_range(1..20 * PAGE_SIZE)).unwrap()),
            1 if !live.is_empty() => {
                s.free(live.swap_remove(rng.gen_range(0..live.len())))
                    .unwrap();
            }
            2 => {
                s.charge_boundary(BoundaryKind::OCall, rng.gen_range(0..10_000));
            }
            _ if !live.is_empty() => {
                let r = live[rng.gen_range(0..live.len())];
                let size = s.region_size(r).unwrap();
                let off = rng.gen_range(0..size);
                let kind = [
                    AccessKind::SequentialRead,
                    AccessKind::RandomRead,
                    AccessKind::RandomWrite,
                ][rng.gen_range(0..3)];
                s.touch(r, off, rng.gen_range(0..=size - off), kind)
                    .unwrap();
            }
            _ => {}
        }
    }
}

#[test]
fn identical_sequences_give_identical_reports() {
    let run = || {
        let mut s = state(16, AllocatorModel::MapHeavy);
        random_workload(&mut s, 42);
        s.report()
    };
    assert_eq!(run(), run());
}

#[test]
fn event_log_replays_exactly() {
    for allocator in [AllocatorModel::ArenaReuse, AllocatorModel::MapHeavy] {
        let cfg = SimConfig::with_capacity(12 * PAGE_SIZE, allocator);
        let mut s = SimState::new(cfg.clone()).unwrap();
        s.enable_log();
        random_workload(&mut s, 9);
        let events = s.take_log();
        let mut text = Vec::new();
        write_log(&events, &mut text).unwrap();
        let parsed = parse_log(std::str::from_utf8(&text).unwrap()).unwrap();
        assert_eq!(parsed, events);
        let replayed = replay(cfg, &parsed).unwrap();
        assert_eq!(replayed.report(), s.report());
    }
}

#[test]
fn replay_detects_divergence() {
    let cfg = SimConfig::with_capacity(4 * PAGE_SIZE, AllocatorModel::ArenaReuse);
    let log = "alloc 0 0 4096 0\nseq_read 0 0 10 11\n";
    assert!(matches!(
        replay(cfg.clone(), &parse_log(log).unwrap()),
        Err(SimError::Log(_))
    ));
    assert!(matches!(parse_log("alloc x 0 1 0"), Err(SimError::Log(_))));
    assert!(matches!(parse_log("jump 0 0 1 0"), Err(SimError::Log(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_is_monotone_in_every_weight(seed in any::<u64>(), which in 0usize..8, bump in 0.0f64..3.0) {
        let base = SimConfig::with_capacity(10 * PAGE_SIZE, if seed % 2 == 0 { AllocatorModel::ArenaReuse } else { AllocatorModel::MapHeavy });
        let mut up = base.clone();
        match which {
            0 => up.epc_load_cost += bump * 1000.0,
            1 => up.epc_evict_cost += bump * 1000.0,
            2 => up.zero_page_cost += bump * 1000.0,
            3 => up.ecall_cost += bump * 1000.0,
            4 => up.ocall_cost += bump * 1000.0,
            5 => up.byte_copy_cost += bump,
            6 => up.cache_miss_factor += bump,
            _ => up.numa_factor += bump,
        }
        let run = |cfg: SimConfig| {
            let mut s = SimState::new(cfg).unwrap();
            random_workload(&mut s, seed);
            s.report()
        };
        let (a, b) = (run(base), run(up));
        prop_assert!(b.accumulated_cost >= a.accumulated_cost);
        prop_assert_eq!(a.epc_evictions, b.epc_evictions);
        prop_assert!(a.resident_pages <= 10);
    }
}
