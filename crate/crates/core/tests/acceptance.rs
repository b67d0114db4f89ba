//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with the measured values.
//!
//! Run with `cargo test -p slicechain --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use slicechain::admission::{brute_force_oracle, solve_exact, AdmissionInstance};
use slicechain::ledger::{
    validate_and_commit, verify_signature, KeyPair, KeyStore, Payload, Signature, StateKey,
    Transaction, TxValidity, Version, WorldState,
};
use slicechain::metrics::export_report;
use slicechain::ordering::{
    cutter::BlockCutter, run_cluster, ConsensusKind, HarnessOps, OrdererConfig, TraceEvent,
};
use slicechain::sim::SimTime;
use slicechain::workload::{run_scenario, ScenarioConfig};

// ---------------------------------------------------------------------------
// 1. Exact admission solver matches the exhaustive oracle.
// ---------------------------------------------------------------------------

#[test]
fn a01_admission_exact_matches_exhaustive_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(0xacce01);
    for case in 0..200 {
        let requests = rng.gen_range(0..=12);
        let types = rng.gen_range(1..=4);
        let capacity: Vec<u64> = (0..types).map(|_| rng.gen_range(0..200)).collect();
        let demands: Vec<Vec<u64>> = (0..requests)
            .map(|_| (0..types).map(|_| rng.gen_range(0..120)).collect())
            .collect();
        let prices: Vec<Vec<u64>> = (0..requests)
            .map(|_| (0..types).map(|_| rng.gen_range(0..100)).collect())
            .collect();
        let inst = AdmissionInstance::new(demands, prices, capacity).unwrap();
        let exact = solve_exact(&inst);
        assert!(exact.is_feasible(&inst), "case {case}: infeasible decision");
        let oracle = brute_force_oracle(&inst).unwrap();
        assert_eq!(
            exact.objective, oracle,
            "case {case}: exact {} != oracle {oracle}",
            exact.objective
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60s");
    println!(
        "[PASS] criterion 1: exact solver == exhaustive oracle on 200 random instances \
         (J<=12, I<=4) in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 2. MVCC validation matches a sequential reference oracle.
// ---------------------------------------------------------------------------

struct GeneratedStream {
    /// Per block: transactions and contract-layer collision pre-flags.
    blocks: Vec<(Vec<Transaction>, Vec<bool>)>,
    keys: KeyStore,
    initial: Vec<(StateKey, u64)>,
}

fn generate_stream(seed: u64) -> GeneratedStream {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut keys = KeyStore::new();
    let signers: Vec<KeyPair> = (0..5)
        .map(|i| keys.generate(&format!("peer-{i}"), seed))
        .collect();

    let key_count = rng.gen_range(5..=50usize);
    let state_keys: Vec<StateKey> = (0..key_count)
        .map(|k| StateKey::Holding {
            tenant: k as u32,
            rtype: 0,
        })
        .collect();
    let initial: Vec<(StateKey, u64)> = state_keys.iter().map(|&k| (k, 100)).collect();

    // Every version ever written to each key, so claimed read versions are
    // plausible without the generator knowing which writes committed.
    let mut version_pool: BTreeMap<StateKey, Vec<Version>> = state_keys
        .iter()
        .map(|&k| (k, vec![Version::GENESIS]))
        .collect();

    let total_txs = rng.gen_range(50..=500usize);
    let mut blocks = Vec::new();
    let mut produced = 0usize;
    let mut height = 1u64;
    let mut tx_id = 0u64;
    while produced < total_txs {
        let block_len = rng.gen_range(1..=20usize).min(total_txs - produced);
        let mut txs = Vec::with_capacity(block_len);
        let mut pre_flags = Vec::with_capacity(block_len);
        for index in 0..block_len {
            let signer = &signers[rng.gen_range(0..signers.len())];
            let read_count = rng.gen_range(1..=3usize);
            let mut read_keys: Vec<StateKey> = Vec::new();
            while read_keys.len() < read_count {
                let k = state_keys[rng.gen_range(0..state_keys.len())];
                if !read_keys.contains(&k) {
                    read_keys.push(k);
                }
            }
            let read_set: Vec<(StateKey, Version)> = read_keys
                .iter()
                .map(|k| {
                    let pool = &version_pool[k];
                    let v = if rng.gen_bool(0.7) {
                        *pool.last().unwrap()
                    } else {
                        pool[rng.gen_range(0..pool.len())]
                    };
                    (*k, v)
                })
                .collect();
            let mut write_set: Vec<(StateKey, u64)> = Vec::new();
            for k in &read_keys {
                if rng.gen_bool(0.8) {
                    write_set.push((*k, rng.gen_range(0..1000)));
                }
            }
            if rng.gen_bool(0.2) {
                let extra = state_keys[rng.gen_range(0..state_keys.len())];
                if !write_set.iter().any(|(k, _)| *k == extra) {
                    write_set.push((extra, rng.gen_range(0..1000)));
                }
            }
            for (k, _) in &write_set {
                version_pool
                    .get_mut(k)
                    .unwrap()
                    .push(Version::new(height, index as u32));
            }
            let mut tx = Transaction {
                tx_id,
                sender: signer.public_id.clone(),
                channel: "test".into(),
                payload: Payload {
                    contract: "transfer".into(),
                    args: vec![],
                },
                read_set,
                write_set,
                signature: Signature::ZERO,
                submit_time: SimTime::from_us(tx_id),
            };
            tx_id += 1;
            tx.signature = signer.sign(&tx.signing_bytes());
            if rng.gen_bool(0.05) {
                // Corrupt after signing.
                tx.write_set.push((state_keys[0], 99_999));
            }
            pre_flags.push(rng.gen_bool(0.03));
            txs.push(tx);
        }
        blocks.push((txs, pre_flags));
        produced += block_len;
        height += 1;
    }
    GeneratedStream {
        blocks,
        keys,
        initial,
    }
}

/// Entries of the oracle's flat state: value and version per key.
type OracleState = HashMap<StateKey, (u64, Version)>;

/// Independent reference: applies transactions strictly sequentially on a
/// flat map, re-deriving every read against live state and rejecting stale
/// reads. Shares nothing with the production validation path except the
/// signature primitive.
fn sequential_oracle(stream: &GeneratedStream) -> (Vec<Vec<TxValidity>>, OracleState) {
    let mut live: OracleState = stream
        .initial
        .iter()
        .map(|&(k, v)| (k, (v, Version::GENESIS)))
        .collect();
    let mut all_flags = Vec::new();
    for (block_pos, (txs, pre_flags)) in stream.blocks.iter().enumerate() {
        let height = block_pos as u64 + 1;
        let mut flags = Vec::new();
        for (index, tx) in txs.iter().enumerate() {
            if pre_flags[index] {
                flags.push(TxValidity::SrCollision);
                continue;
            }
            if !verify_signature(tx, &stream.keys) {
                flags.push(TxValidity::BadSignature);
                continue;
            }
            let mut ok = true;
            for (key, claimed) in &tx.read_set {
                let current = live.get(key).map(|&(_, v)| v);
                if current != Some(*claimed) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                flags.push(TxValidity::RwConflict);
                continue;
            }
            for (key, value) in &tx.write_set {
                live.insert(*key, (*value, Version::new(height, index as u32)));
            }
            flags.push(TxValidity::Committed);
        }
        all_flags.push(flags);
    }
    (all_flags, live)
}

#[test]
fn a02_mvcc_matches_sequential_oracle() {
    for seed in 0..100u64 {
        let stream = generate_stream(0xacce_0200_0000 + seed);

        let mut state = WorldState::new();
        for &(k, v) in &stream.initial {
            state.set(k, v, Version::GENESIS);
        }
        let mut impl_flags = Vec::new();
        for (block_pos, (txs, pre_flags)) in stream.blocks.iter().enumerate() {
            let height = block_pos as u64 + 1;
            impl_flags.push(validate_and_commit(
                &mut state,
                height,
                txs,
                pre_flags,
                &stream.keys,
            ));
        }

        let (oracle_flags, oracle_state) = sequential_oracle(&stream);
        assert_eq!(
            impl_flags, oracle_flags,
            "seed {seed}: committed sets diverge"
        );

        let impl_entries: OracleState = state
            .dump_entries()
            .into_iter()
            .map(|(k, v, ver)| (k, (v, ver)))
            .collect();
        assert_eq!(
            impl_entries, oracle_state,
            "seed {seed}: final states diverge"
        );
    }
    println!(
        "[PASS] criterion 2: MVCC validation matches the sequential oracle on 100 random \
         streams (<=500 txs, <=50 keys)"
    );
}

// ---------------------------------------------------------------------------
// 3. Raft safety under crashes and message drops.
// ---------------------------------------------------------------------------

fn plain_tx(id: u64, at: SimTime) -> Transaction {
    Transaction {
        tx_id: id,
        sender: "client".into(),
        channel: "test".into(),
        payload: Payload {
            contract: "transfer".into(),
            args: vec![],
        },
        read_set: vec![],
        write_set: vec![],
        signature: Signature::ZERO,
        submit_time: at,
    }
}

fn check_election_safety(trace: &[TraceEvent], seed: u64) {
    let mut leaders: BTreeMap<u64, usize> = BTreeMap::new();
    for ev in trace.iter().filter(|e| e.kind == "leader") {
        if let Some(&existing) = leaders.get(&ev.term) {
            assert_eq!(
                existing, ev.node,
                "seed {seed}: two leaders (nodes {existing} and {}) in term {}",
                ev.node, ev.term
            );
        } else {
            leaders.insert(ev.term, ev.node);
        }
    }
}

fn check_log_matching(views: &[slicechain::ordering::NodeView], seed: u64) {
    for i in 0..views.len() {
        for j in (i + 1)..views.len() {
            let (a, b) = (&views[i].log, &views[j].log);
            let common = a.len().min(b.len());
            for p in 0..common {
                if a[p].0 == b[p].0 {
                    assert_eq!(
                        a[p], b[p],
                        "seed {seed}: same index/term, different entry at {p}"
                    );
                    for q in 0..p {
                        assert_eq!(
                            a[q], b[q],
                            "seed {seed}: matching entry at {p} but prefixes diverge at {q}"
                        );
                    }
                }
            }
        }
    }
}

fn check_durability(
    delivered: &[(SimTime, slicechain::ordering::CutBatch)],
    views: &[slicechain::ordering::NodeView],
    seed: u64,
) {
    let majority = views.len() / 2 + 1;
    let mut seen = std::collections::HashSet::new();
    for (position, (_, batch)) in delivered.iter().enumerate() {
        assert!(
            seen.insert(batch.id),
            "seed {seed}: batch {} delivered twice",
            batch.id
        );
        let replicas = views
            .iter()
            .filter(|v| v.log.len() > position && v.log[position].1 == batch.id)
            .count();
        assert!(
            replicas >= majority,
            "seed {seed}: delivered batch {} at position {position} on only {replicas} logs",
            batch.id
        );
    }
}

#[test]
fn a03_raft_safety_under_crashes_and_drops() {
    let started = Instant::now();

    // Main sweep: 500 seeded runs with random drop rates and minority
    // crashes.
    for seed in 0..500u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(0xacce_0300_0000 + seed);
        let cluster = if seed % 2 == 0 { 3 } else { 5 };
        let cfg = OrdererConfig {
            service: ConsensusKind::Raft,
            cluster_size: cluster,
            net: slicechain::ordering::NetworkConfig {
                drop_probability: 0.05 * (seed % 5) as f64,
                ..Default::default()
            },
            ..OrdererConfig::default()
        };
        let minority = (cluster - 1) / 2;
        let crash_count = (seed as usize) % (minority + 1);
        let mut nodes: Vec<usize> = (0..cluster).collect();
        nodes.shuffle(&mut rng);
        let crashes: Vec<(SimTime, usize)> = nodes
            .into_iter()
            .take(crash_count)
            .map(|n| (SimTime::from_ms(rng.gen_range(1000.0..5000.0)), n))
            .collect();
        let submissions: Vec<(SimTime, Transaction)> = (0..30)
            .map(|i| {
                let at = SimTime::from_ms(500.0 + 150.0 * i as f64);
                (at, plain_tx(i, at))
            })
            .collect();
        let ops = HarnessOps {
            submissions,
            crashes,
            recoveries: vec![],
            horizon: SimTime::from_secs(8.0),
            resubmit_delay: SimTime::from_ms(50.0),
        };
        let res = run_cluster(&cfg, seed, ops);
        check_election_safety(&res.trace, seed);
        check_log_matching(&res.final_views, seed);
        check_durability(&res.delivered, &res.final_views, seed);
    }

    // Targeted leader-crash sweep: crash the elected leader right after its
    // first delivery; the committed batch must survive into the new leader's
    // log.
    for seed in 0..100u64 {
        let cfg = OrdererConfig {
            service: ConsensusKind::Raft,
            cluster_size: 3,
            ..OrdererConfig::default()
        };
        let submissions: Vec<(SimTime, Transaction)> = (0..10)
            .map(|i| {
                let at = SimTime::from_ms(2500.0 + 100.0 * i as f64);
                (at, plain_tx(i, at))
            })
            .collect();
        // First pass: find the first delivery time and the leader.
        let probe = run_cluster(
            &cfg,
            seed,
            HarnessOps {
                submissions: submissions.clone(),
                horizon: SimTime::from_secs(12.0),
                resubmit_delay: SimTime::from_ms(50.0),
                ..Default::default()
            },
        );
        let Some(&(first_delivery, ref first_batch)) = probe.delivered.first() else {
            panic!("seed {seed}: nothing delivered in probe run");
        };
        let first_id = first_batch.id;
        let leader = probe
            .trace
            .iter()
            .rfind(|e| e.kind == "leader" && e.time <= first_delivery)
            .expect("a leader delivered")
            .node;

        // Second pass, identical until the crash lands just after delivery.
        let res = run_cluster(
            &cfg,
            seed,
            HarnessOps {
                submissions,
                crashes: vec![(first_delivery + SimTime::from_ms(1.0), leader)],
                horizon: SimTime::from_secs(12.0),
                resubmit_delay: SimTime::from_ms(50.0),
                ..Default::default()
            },
        );
        check_election_safety(&res.trace, seed);
        let new_leader = res
            .trace
            .iter()
            .rfind(|e| e.kind == "leader" && e.node != leader);
        let new_leader = new_leader
            .unwrap_or_else(|| panic!("seed {seed}: no replacement leader elected"))
            .node;
        let view = &res.final_views[new_leader];
        assert!(
            view.log.first().map(|&(_, id)| id) == Some(first_id),
            "seed {seed}: committed batch {first_id} missing from new leader's log"
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    println!(
        "[PASS] criterion 3: election safety, log matching, and durability held over 500 \
         crash/drop runs plus 100 leader-crash runs in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 4. RW-conflict fraction is non-increasing in consortium size.
// ---------------------------------------------------------------------------

fn mean_conflict_fraction(consortium: usize, rate: f64, duration: f64, seeds: &[u64]) -> f64 {
    let mut fractions = Vec::new();
    for &seed in seeds {
        let cfg = ScenarioConfig {
            seed,
            consortium_size: consortium,
            sr_rate_per_s: rate,
            duration_s: duration,
            ..ScenarioConfig::default()
        };
        let report = run_scenario(&cfg).unwrap().report;
        fractions.push(report.rw_conflict as f64 / report.submitted.max(1) as f64);
    }
    fractions.iter().sum::<f64>() / fractions.len() as f64
}

#[test]
fn a04_conflict_fraction_nonincreasing_in_consortium_size() {
    let seeds = [1u64, 2, 3, 4, 5];
    let sizes = [10usize, 100, 1000];
    let means: Vec<f64> = sizes
        .iter()
        .map(|&n| mean_conflict_fraction(n, 150.0, 2.0, &seeds))
        .collect();
    for w in means.windows(2) {
        assert!(
            w[0] >= w[1],
            "conflict fraction increased with consortium size: {means:?}"
        );
    }
    println!(
        "[PASS] criterion 4: at 150 SRs/s the mean RW-conflict fraction is non-increasing in \
         consortium size: {:.2}% -> {:.2}% -> {:.2}% for sizes {sizes:?}",
        100.0 * means[0],
        100.0 * means[1],
        100.0 * means[2]
    );
}

// ---------------------------------------------------------------------------
// 5. RW-conflict fraction calibrated to about 2% at 50 SRs/s.
// ---------------------------------------------------------------------------

#[test]
fn a05_conflict_fraction_calibrated_at_50_srs() {
    // Brokering setup: one consortium of 1000 tenants, kafka ordering, the
    // default 2 ms contract-execution service time (the calibrated value).
    let mut fractions = Vec::new();
    for seed in 1..=5u64 {
        let cfg = ScenarioConfig {
            seed,
            num_ibs: 1,
            consortium_size: 1000,
            sr_rate_per_s: 50.0,
            duration_s: 20.0,
            consensus: OrdererConfig {
                service: ConsensusKind::Kafka,
                cluster_size: 3,
                ..OrdererConfig::default()
            },
            ..ScenarioConfig::default()
        };
        assert_eq!(cfg.exec_service_ms, 2.0, "calibrated default service time");
        let report = run_scenario(&cfg).unwrap().report;
        fractions.push(report.rw_conflict as f64 / report.submitted.max(1) as f64);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    assert!(
        (0.0..=0.04).contains(&mean),
        "mean RW-conflict fraction {:.3}% outside 2% +/- 2pp",
        100.0 * mean
    );
    println!(
        "[PASS] criterion 5: RW-conflict fraction at 50 SRs/s is {:.2}% (target 2% +/- 2pp) \
         with the calibrated exec_service_ms = 2.0",
        100.0 * mean
    );
}

// ---------------------------------------------------------------------------
// 6. Solo latency strictly beats raft and kafka by at least one round trip.
// ---------------------------------------------------------------------------

#[test]
fn a06_latency_ordering_across_services() {
    for seed in [3u64, 4, 5] {
        let mut medians = BTreeMap::new();
        for service in [
            ConsensusKind::Solo,
            ConsensusKind::Raft,
            ConsensusKind::Kafka,
        ] {
            let cfg = ScenarioConfig {
                seed,
                sr_rate_per_s: 150.0,
                duration_s: 5.0,
                consensus: OrdererConfig {
                    service,
                    ..OrdererConfig::default()
                },
                ..ScenarioConfig::default()
            };
            let report = run_scenario(&cfg).unwrap().report;
            medians.insert(
                service.to_string(),
                report.latency.expect("committed samples").p50_ms,
            );
        }
        let solo = medians["solo"];
        let raft = medians["raft"];
        let kafka = medians["kafka"];
        // One network round trip under the default model: two one-way minima.
        let round_trip_ms = OrdererConfig::default().net.min_round_trip().as_ms();
        assert!(
            solo + round_trip_ms <= raft,
            "seed {seed}: raft median {raft:.2}ms does not exceed solo {solo:.2}ms by a round \
             trip ({round_trip_ms}ms)"
        );
        assert!(
            solo + round_trip_ms <= kafka,
            "seed {seed}: kafka median {kafka:.2}ms does not exceed solo {solo:.2}ms by a round \
             trip ({round_trip_ms}ms)"
        );
        println!(
            "[PASS] criterion 6 (seed {seed}): median latency solo {solo:.2}ms < kafka \
             {kafka:.2}ms, raft {raft:.2}ms; both gaps >= {round_trip_ms:.1}ms round trip"
        );
    }
}

// ---------------------------------------------------------------------------
// 7. Chain growth proportional to throughput when blocks are full.
// ---------------------------------------------------------------------------

#[test]
fn a07_growth_proportional_to_throughput() {
    let cfg = ScenarioConfig {
        seed: 4,
        sr_rate_per_s: 300.0,
        duration_s: 10.0,
        ..ScenarioConfig::default()
    };
    let out = run_scenario(&cfg).unwrap();
    let r = &out.report;

    // Saturation precondition: transfer-phase blocks are cut by the size
    // rule, not the timer.
    let start = r.transfer_start_ms;
    let end = r.transfer_start_ms + r.transfer_duration_ms;
    let mut full = 0usize;
    let mut total = 0usize;
    for chain in &out.chains {
        for block in chain.blocks() {
            let t = block.cut_time.as_ms();
            if t >= start && t <= end && block.height > 0 {
                total += 1;
                if block.transactions.len() == cfg.consensus.batch_size {
                    full += 1;
                }
            }
        }
    }
    assert!(
        full as f64 >= 0.9 * total as f64,
        "not a saturating run: {full}/{total} full blocks"
    );

    let duration_s = r.transfer_duration_ms / 1_000.0;
    let ordered_per_s = (r.committed + r.rw_conflict + r.bad_signature) as f64 / duration_s;
    let expected = ordered_per_s / cfg.consensus.batch_size as f64 * r.mean_block_bytes;
    let slope = r.growth_slope_bytes_per_s.expect("transfer-phase samples");
    let deviation = (slope - expected).abs() / expected;
    assert!(
        deviation <= 0.10,
        "growth slope {slope:.0} B/s deviates {:.1}% from expected {expected:.0} B/s",
        100.0 * deviation
    );
    println!(
        "[PASS] criterion 7: growth slope {slope:.0} B/s within {:.2}% of (throughput/20) x \
         mean block size = {expected:.0} B/s ({full}/{total} full blocks)",
        100.0 * deviation
    );
}

// ---------------------------------------------------------------------------
// 8. Wider demand ranges reach a 10% collision rate sooner.
// ---------------------------------------------------------------------------

#[test]
fn a08_collision_crossing_nonincreasing_in_demand_range() {
    let highs = [1.0f64, 2.0, 4.0];
    let mut mean_crossings = Vec::new();
    for &high in &highs {
        let mut crossings = Vec::new();
        for seed in 1..=5u64 {
            let mut cfg = ScenarioConfig {
                seed,
                num_ibs: 1,
                consortium_size: 1000,
                sr_rate_per_s: 50.0,
                duration_s: 700.0,
                consensus: OrdererConfig {
                    service: ConsensusKind::Kafka,
                    cluster_size: 3,
                    ..OrdererConfig::default()
                },
                ..ScenarioConfig::default()
            };
            cfg.demand.high_pct = high;
            let report = run_scenario(&cfg).unwrap().report;
            // Runs that never cross within the horizon count as the horizon.
            crossings.push(report.collision_crossing_10pct_s.unwrap_or(700) as f64);
        }
        mean_crossings.push(crossings.iter().sum::<f64>() / crossings.len() as f64);
    }
    for w in mean_crossings.windows(2) {
        assert!(
            w[0] >= w[1],
            "collision crossing time increased with range width: {mean_crossings:?}"
        );
    }
    println!(
        "[PASS] criterion 8: mean time to 10% cumulative collisions is non-increasing in \
         demand range width: {:.0}s (0.1-1%) -> {:.0}s (0.1-2%) -> {:.0}s (0.1-4%)",
        mean_crossings[0], mean_crossings[1], mean_crossings[2]
    );
}

// ---------------------------------------------------------------------------
// 9. Same seed, byte-identical artifacts.
// ---------------------------------------------------------------------------

#[test]
fn a09_runs_are_byte_identical_under_a_fixed_seed() {
    let cfg = ScenarioConfig {
        seed: 42,
        num_ibs: 2,
        consortium_size: 200,
        sr_rate_per_s: 60.0,
        duration_s: 5.0,
        consensus: OrdererConfig {
            service: ConsensusKind::Kafka,
            cluster_size: 3,
            ..OrdererConfig::default()
        },
        ..ScenarioConfig::default()
    };

    // (summary.json bytes, per-channel chain dumps)
    type Artifacts = (Vec<u8>, Vec<Vec<u8>>);
    let mut artifacts: Vec<Artifacts> = Vec::new();
    for _ in 0..2 {
        let out = run_scenario(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_report(
            &out.report,
            dir.path(),
            &[
                slicechain::metrics::ExportFormat::Json,
                slicechain::metrics::ExportFormat::Csv,
            ],
        )
        .unwrap();
        let summary = std::fs::read(dir.path().join("summary.json")).unwrap();
        let dumps: Vec<Vec<u8>> = out
            .chains
            .iter()
            .map(|chain| {
                let mut buf = Vec::new();
                slicechain::ledger::write_chain_dump(&mut buf, chain.blocks()).unwrap();
                buf
            })
            .collect();
        artifacts.push((summary, dumps));
    }
    assert_eq!(
        artifacts[0].0, artifacts[1].0,
        "summary.json differs between runs"
    );
    assert_eq!(
        artifacts[0].1, artifacts[1].1,
        "chain dumps differ between runs"
    );
    println!(
        "[PASS] criterion 9: two runs with seed 42 produced byte-identical summary.json and \
         chain dumps across {} channels",
        artifacts[0].1.len()
    );
}

// ---------------------------------------------------------------------------
// 10. Block cutting conformance under arbitrary arrival schedules.
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn a10_block_cutting_conformance(
        gaps in prop::collection::vec(0u64..400_000, 1..120),
    ) {
        let batch_size = 20usize;
        let timeout = SimTime::from_ms(300.0);
        let mut cutter = BlockCutter::new(batch_size, timeout);

        // Arrival times from the random gaps (microseconds).
        let mut arrivals = Vec::new();
        let mut t = 0u64;
        for gap in &gaps {
            t += gap;
            arrivals.push(SimTime::from_us(t));
        }

        // Event loop: submissions plus armed timer deadlines, in time order.
        let mut events: Vec<(SimTime, Option<usize>, Option<u64>)> = arrivals
            .iter()
            .enumerate()
            .map(|(i, &at)| (at, Some(i), None))
            .collect();
        let mut arrival_of = HashMap::new();
        let mut cut_txs = 0usize;
        let mut next_event = 0usize;
        while next_event < events.len() {
            events[next_event..].sort_by_key(|&(at, idx, _)| (at, idx.is_none(), idx));
            let (now, submit_idx, timer_epoch) = events[next_event];
            next_event += 1;
            let cut = match (submit_idx, timer_epoch) {
                (Some(i), None) => {
                    arrival_of.insert(i as u64, now);
                    let effect = cutter.on_submit(plain_tx(i as u64, now), now);
                    if let Some((deadline, epoch)) = effect.arm_timer {
                        events.push((deadline, None, Some(epoch)));
                    }
                    effect.cut
                }
                (None, Some(epoch)) => cutter.on_timer(epoch, now),
                _ => unreachable!(),
            };
            if let Some(batch) = cut {
                // No block exceeds the batch size.
                prop_assert!(batch.txs.len() <= batch_size);
                prop_assert!(!batch.txs.is_empty());
                cut_txs += batch.txs.len();
                for tx in &batch.txs {
                    // No transaction waited beyond the timeout.
                    let waited = batch.cut_time - arrival_of[&tx.tx_id];
                    prop_assert!(
                        waited <= timeout,
                        "tx {} waited {waited:?}",
                        tx.tx_id
                    );
                }
            }
        }
        // After all deadlines fired, any pending transaction is younger than
        // the timeout, and nothing was lost or duplicated.
        prop_assert_eq!(cut_txs + cutter.pending_len(), arrivals.len());
    }
}
