//! The scenario driver: opening phase, transfer phase, and the event loop
//! wiring generation, matchmaking, contracts, ordering, and validation
//! together.
//!
//! Everything runs on one deterministic event queue. Random streams are
//! derived per purpose from the scenario seed, so switching the consensus
//! service leaves the request schedule untouched, and identical seeds yield
//! byte-identical reports and chain dumps.

use std::collections::HashMap;

use thiserror::Error;

use crate::codec::Encoder;
use crate::contracts::{
    encode_grant_args, encode_init_args, encode_transfer_args, init_registry, simulate_grant,
    simulate_transfer, AccountBook, Counterparty, Direction, IntentSide, SimulatedRw, SliceRequest,
    TenantAccount, TransferOutcome, SLICE_TYPES,
};
use crate::ledger::{
    sign_transaction, KeyPair, KeyStore, Ledger, Payload, Signature, StateKey, TenantId,
    Transaction, TxValidity, Version, WorldState,
};
use crate::metrics::{
    compute_cdf, growth_rate, throughput_series, GrowthSample, LatencySample, LatencySummary,
    Outcome, OutcomeCounters, RunReport,
};
use crate::ordering::{
    build_service, CutBatch, OrdererEvent, OrderingService, SubmitAck, TraceEvent,
};
use crate::sim::{derive_rng, derive_seed, EventQueue, SimTime};
use crate::workload::config::{AdmissionPolicy, ScenarioConfig, SolverKind};
use crate::workload::matchmaker::Matchmaker;
use crate::workload::{equal_allocation, generate_sr, DemandDistribution};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] crate::workload::config::ConfigError),
    #[error("contract failure: {0}")]
    Contract(#[from] crate::contracts::ContractError),
    #[error("ledger failure: {0}")]
    Ledger(#[from] crate::ledger::LedgerError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// One channel after the opening phase: committed chain, tenant accounts,
/// and signing keys.
pub struct OpenedChannel {
    pub channel: String,
    pub ib_key: KeyPair,
    pub tenant_keys: Vec<KeyPair>,
    pub ledger: Ledger,
    pub accounts: AccountBook,
    /// Transactions issued so far on this channel (genesis + opening).
    pub next_tx_id: u64,
}

/// Executes the opening phase for one channel: genesis with the full
/// registry, equal allocation of the pool across tenants in batched grant
/// blocks, and the per-tenant intent draw.
///
/// Grant blocks bypass the ordering service: the broker constructs them
/// directly, so their read versions are exact and every grant commits.
pub fn run_opening(
    cfg: &ScenarioConfig,
    channel_index: usize,
    keys: &mut KeyStore,
) -> Result<OpenedChannel, ScenarioError> {
    let channel = format!("ib-{channel_index}");
    let ib_key = keys.generate(&channel, cfg.seed);
    let tenants = cfg.consortium_size;
    let tenant_keys: Vec<KeyPair> = (0..tenants)
        .map(|t| keys.generate(&format!("{channel}/tenant-{t}"), cfg.seed))
        .collect();

    // Genesis: the registry pool, version (0, 0).
    let capacities = cfg.capacities();
    let registry_writes = init_registry(&capacities)?;
    let init_tx = sign_transaction(
        Transaction {
            tx_id: 0,
            sender: ib_key.public_id.clone(),
            channel: channel.clone(),
            payload: Payload {
                contract: "init".into(),
                args: encode_init_args(&capacities),
            },
            read_set: vec![],
            write_set: registry_writes,
            signature: Signature::ZERO,
            submit_time: SimTime::ZERO,
        },
        &ib_key,
    )?;
    let mut ledger = Ledger::genesis(&channel, init_tx, capacities.clone(), keys)?;

    // Opening allocation: one grant per tenant, packed batch_size per block.
    // Each grant is simulated against a scratch state that already carries
    // the versions earlier grants in the same block will commit with.
    let shares = equal_allocation(cfg.pool_units_per_type, tenants);
    let mut next_tx_id = 1u64;
    let mut scratch: WorldState = ledger.state().clone();
    let batch = cfg.consensus.batch_size.max(1);
    let mut tenant_iter = 0usize;
    while tenant_iter < tenants {
        let height = ledger.height() + 1;
        let chunk_end = (tenant_iter + batch).min(tenants);
        let mut txs = Vec::with_capacity(chunk_end - tenant_iter);
        for (index, tenant) in (tenant_iter..chunk_end).enumerate() {
            let amounts = vec![shares[tenant]; SLICE_TYPES];
            let rw = match simulate_grant(&scratch, tenant as TenantId, &amounts)? {
                TransferOutcome::Ok(rw) => rw,
                TransferOutcome::Collision(reason) => {
                    return Err(ScenarioError::Invariant(format!(
                        "opening grant for tenant {tenant} collided: {reason:?}"
                    )));
                }
            };
            let version = Version::new(height, index as u32);
            for (key, value) in &rw.write_set {
                scratch.set(*key, *value, version);
            }
            let tx = sign_transaction(
                Transaction {
                    tx_id: next_tx_id,
                    sender: ib_key.public_id.clone(),
                    channel: channel.clone(),
                    payload: Payload {
                        contract: "grant".into(),
                        args: encode_grant_args(tenant as TenantId, &amounts),
                    },
                    read_set: rw.read_set,
                    write_set: rw.write_set,
                    signature: Signature::ZERO,
                    submit_time: SimTime::ZERO,
                },
                &ib_key,
            )?;
            next_tx_id += 1;
            txs.push(tx);
        }
        let flags_len = txs.len();
        let summary = ledger.commit(txs, vec![false; flags_len], SimTime::ZERO, keys);
        if summary.flags.iter().any(|f| *f != TxValidity::Committed) {
            return Err(ScenarioError::Invariant(format!(
                "opening block {height} had non-committed grants: {:?}",
                summary.flags
            )));
        }
        tenant_iter = chunk_end;
    }
    ledger
        .state()
        .check_conservation()
        .map_err(|e| ScenarioError::Invariant(e.to_string()))?;

    // Intent draw: one fraction per tenant applied to its allocation, sides
    // split half and half over a seeded shuffle.
    let mut rng = derive_rng(cfg.seed, &format!("opening/{channel}"));
    let mut order: Vec<usize> = (0..tenants).collect();
    order.shuffle(&mut rng);
    let free_count = tenants / 2;
    let mut sides = vec![IntentSide::Seek; tenants];
    for &t in order.iter().take(free_count) {
        sides[t] = IntentSide::Free;
    }
    let accounts: Vec<TenantAccount> = (0..tenants)
        .map(|t| {
            let fraction = rng.gen_range(0.0..=cfg.intent_fraction_max_pct) / 100.0;
            let target = (shares[t] as f64 * fraction).round() as u64;
            TenantAccount {
                tenant: t as TenantId,
                initial: vec![shares[t]; SLICE_TYPES],
                remaining_intent: vec![target; SLICE_TYPES],
                side: sides[t],
            }
        })
        .collect();

    Ok(OpenedChannel {
        channel,
        ib_key,
        tenant_keys,
        ledger,
        accounts: AccountBook::new(accounts),
        next_tx_id,
    })
}

/// Everything a finished run yields: the report plus the per-channel chains
/// and optional ordering traces.
pub struct RunOutput {
    pub report: RunReport,
    pub chains: Vec<Ledger>,
    pub traces: Vec<Vec<TraceEvent>>,
}

enum InFlight {
    /// One slice request.
    Single {
        requester: TenantId,
        counterparty: Counterparty,
        moved: Vec<u64>,
        submit_time: SimTime,
        bucket: usize,
    },
    /// A batch-admission settlement carrying several admitted acquires.
    Settlement { parts: Vec<SettledPart> },
}

struct SettledPart {
    requester: TenantId,
    amounts: Vec<u64>,
    submit_time: SimTime,
    bucket: usize,
}

struct QueuedAcquire {
    requester: TenantId,
    amounts: Vec<u64>,
    submit_time: SimTime,
    bucket: usize,
}

struct Channel {
    name: String,
    ib_key: KeyPair,
    tenant_keys: Vec<KeyPair>,
    ledger: Ledger,
    accounts: AccountBook,
    matchmaker: Matchmaker,
    service: Box<dyn OrderingService>,
    next_tx_id: u64,
    in_flight: HashMap<u64, InFlight>,
    epoch_queue: Vec<QueuedAcquire>,
}

enum Ev {
    SrSlot { slot: u64 },
    Submit { ch: usize, tx: Transaction },
    Orderer { ch: usize, ev: OrdererEvent },
    CommitBlock { ch: usize, batch: CutBatch },
    AdmissionEpoch { ch: usize },
}

struct Driver<'a> {
    cfg: &'a ScenarioConfig,
    keys: KeyStore,
    channels: Vec<Channel>,
    queue: EventQueue<Ev>,
    rng_sr: ChaCha20Rng,
    dist: DemandDistribution,
    transfer_start: SimTime,
    transfer_end: SimTime,
    horizon: SimTime,
    slot_interval: SimTime,
    total_slots: u64,
    counters: OutcomeCounters,
    scheduled_slots: u64,
    skipped_slots: u64,
    latencies: Vec<LatencySample>,
    growth: Vec<GrowthSample>,
    total_bytes: u64,
    total_blocks: u64,
    opening_bytes: u64,
    opening_blocks: u64,
    transfer_block_bytes: Vec<u64>,
}

impl<'a> Driver<'a> {
    fn bucket(&self, submit_time: SimTime) -> usize {
        submit_time.second_bucket(self.transfer_start)
    }

    fn record_growth(&mut self, now: SimTime, block_bytes: u64) {
        self.total_bytes += block_bytes;
        self.total_blocks += 1;
        self.growth.push(GrowthSample {
            time_ms: now.as_ms(),
            cumulative_bytes: self.total_bytes,
            cumulative_blocks: self.total_blocks,
        });
    }

    fn absorb(&mut self, ch: usize, out: crate::ordering::StepOutput, now: SimTime) {
        for (at, ev) in out.schedule {
            self.queue.push(at, Ev::Orderer { ch, ev });
        }
        let validation = SimTime::from_ms(self.cfg.validation_ms);
        for batch in out.delivered {
            self.queue
                .push(now + validation, Ev::CommitBlock { ch, batch });
        }
    }

    fn schedule_next_slot(&mut self, slot: u64, now: SimTime, rng_poisson: &mut Option<Exp<f64>>) {
        if self.cfg.poisson_arrivals {
            if let Some(exp) = rng_poisson {
                let gap = SimTime::from_secs(exp.sample(&mut self.rng_sr));
                let at = now + gap;
                if at < self.transfer_end {
                    self.queue.push(at, Ev::SrSlot { slot: slot + 1 });
                }
            }
        } else if slot + 1 < self.total_slots {
            let at =
                self.transfer_start + SimTime::from_us(self.slot_interval.as_us() * (slot + 1));
            self.queue.push(at, Ev::SrSlot { slot: slot + 1 });
        }
    }

    fn build_transfer_tx(
        channel: &mut Channel,
        sr: &SliceRequest,
        rw: &SimulatedRw,
        now: SimTime,
    ) -> Result<Transaction, ScenarioError> {
        let (giver, receiver) = match sr.direction {
            Direction::Acquire => (sr.counterparty, Counterparty::Tenant(sr.requester)),
            Direction::Release => (Counterparty::Tenant(sr.requester), sr.counterparty),
        };
        let tx_id = channel.next_tx_id;
        channel.next_tx_id += 1;
        let key = &channel.tenant_keys[sr.requester as usize];
        let tx = sign_transaction(
            Transaction {
                tx_id,
                sender: key.public_id.clone(),
                channel: channel.name.clone(),
                payload: Payload {
                    contract: "transfer".into(),
                    args: encode_transfer_args(giver, receiver, &rw.moved),
                },
                read_set: rw.read_set.clone(),
                write_set: rw.write_set.clone(),
                signature: Signature::ZERO,
                submit_time: now,
            },
            key,
        )?;
        Ok(tx)
    }

    fn on_sr_slot(&mut self, slot: u64, now: SimTime) -> Result<(), ScenarioError> {
        self.scheduled_slots += 1;
        let ch = (slot as usize) % self.channels.len();
        let bucket = self.bucket(now);

        let Some(issuer) = ({
            let channel = &self.channels[ch];
            channel.matchmaker.pick_issuer(&mut self.rng_sr)
        }) else {
            self.skipped_slots += 1;
            return Ok(());
        };

        let account = self.channels[ch]
            .accounts
            .get(issuer)
            .expect("issuer exists")
            .clone();
        let sr = generate_sr(&account, &self.dist, &mut self.rng_sr);
        let amounts = sr.demand_units(&account.initial);

        // Batch admission queues acquires for the broker epoch instead of
        // matching them on the spot.
        if self.cfg.admission_mode == AdmissionPolicy::Batch && sr.direction == Direction::Acquire {
            self.counters.record_submitted(bucket);
            let channel = &mut self.channels[ch];
            channel
                .matchmaker
                .reserve(&channel.accounts, issuer, &amounts);
            channel.epoch_queue.push(QueuedAcquire {
                requester: issuer,
                amounts,
                submit_time: now,
                bucket,
            });
            return Ok(());
        }

        let opposite = match account.side {
            IntentSide::Free => IntentSide::Seek,
            IntentSide::Seek => IntentSide::Free,
        };
        let counterparty = match self.channels[ch].matchmaker.pick_counterparty(opposite) {
            Some(t) => Counterparty::Tenant(t),
            None if sr.direction == Direction::Release => Counterparty::Pool,
            None => {
                // An acquire with nobody left to serve it collides.
                self.counters.record_submitted(bucket);
                self.counters.record_outcome(bucket, Outcome::SrCollision);
                return Ok(());
            }
        };
        let sr = SliceRequest { counterparty, ..sr };

        let outcome = {
            let channel = &self.channels[ch];
            simulate_transfer(channel.ledger.state(), &channel.accounts, &sr)?
        };
        self.counters.record_submitted(bucket);
        match outcome {
            TransferOutcome::Collision(_) => {
                self.counters.record_outcome(bucket, Outcome::SrCollision);
            }
            TransferOutcome::Ok(rw) => {
                let channel = &mut self.channels[ch];
                channel
                    .matchmaker
                    .reserve(&channel.accounts, issuer, &rw.moved);
                if let Counterparty::Tenant(t) = sr.counterparty {
                    channel.matchmaker.reserve(&channel.accounts, t, &rw.moved);
                }
                let tx = Self::build_transfer_tx(channel, &sr, &rw, now)?;
                channel.in_flight.insert(
                    tx.tx_id,
                    InFlight::Single {
                        requester: issuer,
                        counterparty: sr.counterparty,
                        moved: rw.moved,
                        submit_time: now,
                        bucket,
                    },
                );
                let at = now + SimTime::from_ms(self.cfg.exec_service_ms);
                self.queue.push(at, Ev::Submit { ch, tx });
            }
        }
        Ok(())
    }

    fn on_submit(&mut self, ch: usize, tx: Transaction, now: SimTime) {
        let (ack, out) = self.channels[ch].service.submit(tx.clone(), now);
        self.absorb(ch, out, now);
        if ack == SubmitAck::NoLeader {
            let retry = now + SimTime::from_ms(self.cfg.resubmit_delay_ms);
            if retry <= self.horizon {
                self.queue.push(retry, Ev::Submit { ch, tx });
            }
        }
    }

    fn on_commit_block(
        &mut self,
        ch: usize,
        batch: CutBatch,
        now: SimTime,
    ) -> Result<(), ScenarioError> {
        let flags_len = batch.txs.len();
        let tx_ids: Vec<u64> = batch.txs.iter().map(|tx| tx.tx_id).collect();
        let summary = {
            let channel = &mut self.channels[ch];
            channel.ledger.commit(
                batch.txs,
                vec![false; flags_len],
                batch.cut_time,
                &self.keys,
            )
        };
        self.channels[ch]
            .ledger
            .state()
            .check_conservation()
            .map_err(|e| ScenarioError::Invariant(e.to_string()))?;
        self.record_growth(now, summary.block_bytes);
        if now >= self.transfer_start && now <= self.transfer_end {
            self.transfer_block_bytes.push(summary.block_bytes);
        }

        for (tx_id, flag) in tx_ids.into_iter().zip(summary.flags) {
            let entry = self.channels[ch].in_flight.remove(&tx_id).ok_or_else(|| {
                ScenarioError::Invariant(format!("committed unknown transaction {tx_id}"))
            })?;
            match entry {
                InFlight::Single {
                    requester,
                    counterparty,
                    moved,
                    submit_time,
                    bucket,
                } => {
                    let channel = &mut self.channels[ch];
                    match flag {
                        TxValidity::Committed => {
                            self.counters.record_outcome(bucket, Outcome::Committed);
                            self.latencies.push(LatencySample {
                                tx_id,
                                submit_ms: submit_time.as_ms(),
                                commit_ms: now.as_ms(),
                            });
                            channel
                                .matchmaker
                                .commit(&mut channel.accounts, requester, &moved);
                            if let Counterparty::Tenant(t) = counterparty {
                                channel.matchmaker.commit(&mut channel.accounts, t, &moved);
                            }
                        }
                        TxValidity::RwConflict => {
                            self.counters.record_outcome(bucket, Outcome::RwConflict);
                            channel
                                .matchmaker
                                .release(&channel.accounts, requester, &moved);
                            if let Counterparty::Tenant(t) = counterparty {
                                channel.matchmaker.release(&channel.accounts, t, &moved);
                            }
                        }
                        TxValidity::BadSignature => {
                            self.counters.record_outcome(bucket, Outcome::BadSignature);
                            channel
                                .matchmaker
                                .release(&channel.accounts, requester, &moved);
                            if let Counterparty::Tenant(t) = counterparty {
                                channel.matchmaker.release(&channel.accounts, t, &moved);
                            }
                        }
                        TxValidity::SrCollision => {
                            self.counters.record_outcome(bucket, Outcome::SrCollision);
                            channel
                                .matchmaker
                                .release(&channel.accounts, requester, &moved);
                        }
                    }
                }
                InFlight::Settlement { parts } => {
                    let channel = &mut self.channels[ch];
                    for part in parts {
                        match flag {
                            TxValidity::Committed => {
                                self.counters
                                    .record_outcome(part.bucket, Outcome::Committed);
                                self.latencies.push(LatencySample {
                                    tx_id,
                                    submit_ms: part.submit_time.as_ms(),
                                    commit_ms: now.as_ms(),
                                });
                                channel.matchmaker.commit(
                                    &mut channel.accounts,
                                    part.requester,
                                    &part.amounts,
                                );
                            }
                            _ => {
                                let outcome = match flag {
                                    TxValidity::RwConflict => Outcome::RwConflict,
                                    TxValidity::BadSignature => Outcome::BadSignature,
                                    _ => Outcome::SrCollision,
                                };
                                self.counters.record_outcome(part.bucket, outcome);
                                channel.matchmaker.release(
                                    &channel.accounts,
                                    part.requester,
                                    &part.amounts,
                                );
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Batch-admission epoch: filter queued acquires against remaining need,
    /// solve the revenue-maximization over the current pool, and fold the
    /// admitted set into one broker-signed settlement transaction.
    fn on_admission_epoch(&mut self, ch: usize, now: SimTime) -> Result<(), ScenarioError> {
        use crate::admission::{solve_exact, solve_greedy, AdmissionInstance};

        let queued = std::mem::take(&mut self.channels[ch].epoch_queue);
        if queued.is_empty() {
            return Ok(());
        }
        // A tenant may have queued several acquires; the need check must hold
        // for their sum, not just each one alone.
        let mut claimed: HashMap<TenantId, Vec<u64>> = HashMap::new();
        let mut valid = Vec::new();
        for q in queued {
            let cumulative = claimed
                .entry(q.requester)
                .or_insert_with(|| vec![0; SLICE_TYPES]);
            let covered = {
                let account = self.channels[ch].accounts.get(q.requester).expect("tenant");
                q.amounts
                    .iter()
                    .enumerate()
                    .all(|(rt, &a)| account.remaining_intent[rt] >= cumulative[rt] + a)
            };
            if covered {
                for (c, &a) in cumulative.iter_mut().zip(&q.amounts) {
                    *c += a;
                }
                valid.push(q);
            } else {
                self.counters.record_outcome(q.bucket, Outcome::SrCollision);
                let channel = &mut self.channels[ch];
                channel
                    .matchmaker
                    .release(&channel.accounts, q.requester, &q.amounts);
            }
        }
        if valid.is_empty() {
            return Ok(());
        }

        let capacity: Vec<u64> = (0..SLICE_TYPES)
            .map(|rt| {
                self.channels[ch]
                    .ledger
                    .state()
                    .value(&StateKey::Registry { rtype: rt as u8 })
            })
            .collect();
        let demands: Vec<Vec<u64>> = valid.iter().map(|q| q.amounts.clone()).collect();
        // Unit price per demanded unit; the revenue of a request is its total
        // demand.
        let prices = demands.clone();
        let instance = AdmissionInstance::new(demands, prices, capacity)
            .map_err(|e| ScenarioError::Invariant(e.to_string()))?;
        let decision = match self.cfg.admission_solver {
            SolverKind::Exact if instance.requests() <= 28 => solve_exact(&instance),
            SolverKind::Exact => solve_greedy(&instance),
            SolverKind::Greedy => solve_greedy(&instance),
        };

        let mut parts = Vec::new();
        let snapshot_rw = {
            let channel = &mut self.channels[ch];
            let mut pool_delta = [0u64; SLICE_TYPES];
            for (q, &accepted) in valid.iter().zip(&decision.accepted) {
                if accepted == 1 {
                    for (delta, &amount) in pool_delta.iter_mut().zip(&q.amounts) {
                        *delta += amount;
                    }
                }
            }
            // Merge admitted amounts per tenant so the settlement touches
            // every key exactly once.
            let mut granted: std::collections::BTreeMap<TenantId, Vec<u64>> =
                std::collections::BTreeMap::new();
            for (q, &accepted) in valid.iter().zip(&decision.accepted) {
                if accepted == 1 {
                    let sum = granted
                        .entry(q.requester)
                        .or_insert_with(|| vec![0; SLICE_TYPES]);
                    for (g, &a) in sum.iter_mut().zip(&q.amounts) {
                        *g += a;
                    }
                }
            }
            let mut rw = SimulatedRw::default();
            let state = channel.ledger.state();
            for (rt, &delta) in pool_delta.iter().enumerate() {
                let key = StateKey::Registry { rtype: rt as u8 };
                let entry = state.get(&key).expect("registry exists");
                rw.read_set.push((key, entry.version));
                rw.write_set.push((key, entry.value - delta));
            }
            for (tenant, amounts) in &granted {
                for (rt, &amount) in amounts.iter().enumerate() {
                    let key = StateKey::Holding {
                        tenant: *tenant,
                        rtype: rt as u8,
                    };
                    let entry = state.get(&key).expect("tenant holding exists");
                    rw.read_set.push((key, entry.version));
                    rw.write_set.push((key, entry.value + amount));
                }
            }
            rw
        };

        for (q, &accepted) in valid.iter().zip(&decision.accepted) {
            if accepted == 1 {
                parts.push(SettledPart {
                    requester: q.requester,
                    amounts: q.amounts.clone(),
                    submit_time: q.submit_time,
                    bucket: q.bucket,
                });
            } else {
                self.counters.record_outcome(q.bucket, Outcome::SrCollision);
                let channel = &mut self.channels[ch];
                channel
                    .matchmaker
                    .release(&channel.accounts, q.requester, &q.amounts);
            }
        }
        if parts.is_empty() {
            return Ok(());
        }

        // One settlement transaction for the whole epoch.
        let mut args = Encoder::new();
        args.put_count(parts.len());
        for part in &parts {
            args.put_u32(part.requester);
            args.put_count(part.amounts.len());
            for a in &part.amounts {
                args.put_u64(*a);
            }
        }
        let channel = &mut self.channels[ch];
        let tx_id = channel.next_tx_id;
        channel.next_tx_id += 1;
        let tx = sign_transaction(
            Transaction {
                tx_id,
                sender: channel.ib_key.public_id.clone(),
                channel: channel.name.clone(),
                payload: Payload {
                    contract: "settlement".into(),
                    args: args.finish(),
                },
                read_set: snapshot_rw.read_set,
                write_set: snapshot_rw.write_set,
                signature: Signature::ZERO,
                submit_time: now,
            },
            &channel.ib_key,
        )?;
        channel
            .in_flight
            .insert(tx_id, InFlight::Settlement { parts });
        let at = now + SimTime::from_ms(self.cfg.exec_service_ms);
        self.queue.push(at, Ev::Submit { ch, tx });
        Ok(())
    }
}

/// Runs the full two-phase scenario described by `cfg`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    cfg.validate()?;
    let mut keys = KeyStore::new();

    let transfer_start = SimTime::from_ms(cfg.warmup_ms);
    let transfer_end = transfer_start + SimTime::from_secs(cfg.duration_s);
    let horizon = transfer_end + SimTime::from_ms(cfg.drain_grace_ms);
    let duration_buckets = cfg.duration_s.ceil() as usize;

    let mut driver = Driver {
        cfg,
        keys: KeyStore::new(),
        channels: Vec::new(),
        queue: EventQueue::new(),
        rng_sr: derive_rng(cfg.seed, "workload"),
        dist: DemandDistribution::new(&cfg.demand),
        transfer_start,
        transfer_end,
        horizon,
        slot_interval: SimTime::from_us(((1.0e6 / cfg.sr_rate_per_s).round() as u64).max(1)),
        total_slots: (cfg.sr_rate_per_s * cfg.duration_s).round() as u64,
        counters: OutcomeCounters::new(duration_buckets),
        scheduled_slots: 0,
        skipped_slots: 0,
        latencies: Vec::new(),
        growth: Vec::new(),
        total_bytes: 0,
        total_blocks: 0,
        opening_bytes: 0,
        opening_blocks: 0,
        transfer_block_bytes: Vec::new(),
    };

    // Opening phase, channel by channel.
    for ch in 0..cfg.num_ibs {
        let opened = run_opening(cfg, ch, &mut keys)?;
        let service = build_service(
            &cfg.consensus,
            derive_seed(cfg.seed, &format!("orderer/{}", opened.channel)),
            cfg.trace,
        );
        let mut channel = Channel {
            name: opened.channel,
            ib_key: opened.ib_key,
            tenant_keys: opened.tenant_keys,
            matchmaker: Matchmaker::new(&opened.accounts),
            ledger: opened.ledger,
            accounts: opened.accounts,
            service,
            next_tx_id: opened.next_tx_id,
            in_flight: HashMap::new(),
            epoch_queue: Vec::new(),
        };
        for block in channel.ledger.blocks() {
            let bytes = block.canonical_len();
            driver.opening_bytes += bytes;
            driver.opening_blocks += 1;
            driver.record_growth(SimTime::ZERO, bytes);
        }
        let out = channel.service.start(SimTime::ZERO);
        driver.channels.push(channel);
        let ch_index = driver.channels.len() - 1;
        driver.absorb(ch_index, out, SimTime::ZERO);
    }
    driver.keys = keys;

    // Arm the transfer phase.
    let mut poisson = if cfg.poisson_arrivals {
        Some(Exp::new(cfg.sr_rate_per_s).expect("positive rate"))
    } else {
        None
    };
    if cfg.poisson_arrivals {
        let exp = poisson.as_mut().expect("poisson enabled");
        let gap = SimTime::from_secs(exp.sample(&mut driver.rng_sr));
        let at = transfer_start + gap;
        if at < transfer_end {
            driver.queue.push(at, Ev::SrSlot { slot: 0 });
        }
    } else if driver.total_slots > 0 {
        driver.queue.push(transfer_start, Ev::SrSlot { slot: 0 });
    }
    if cfg.admission_mode == AdmissionPolicy::Batch {
        let epoch = SimTime::from_ms(cfg.admission_epoch_ms);
        for ch in 0..cfg.num_ibs {
            driver
                .queue
                .push(transfer_start + epoch, Ev::AdmissionEpoch { ch });
        }
    }

    // Main loop.
    while let Some(next) = driver.queue.peek_time() {
        if next > driver.horizon {
            break;
        }
        let (now, ev) = driver.queue.pop().expect("peeked");
        match ev {
            Ev::SrSlot { slot } => {
                driver.on_sr_slot(slot, now)?;
                driver.schedule_next_slot(slot, now, &mut poisson);
            }
            Ev::Submit { ch, tx } => driver.on_submit(ch, tx, now),
            Ev::Orderer { ch, ev } => {
                let out = driver.channels[ch].service.handle(ev, now);
                driver.absorb(ch, out, now);
            }
            Ev::CommitBlock { ch, batch } => driver.on_commit_block(ch, batch, now)?,
            Ev::AdmissionEpoch { ch } => {
                driver.on_admission_epoch(ch, now)?;
                let at = now + SimTime::from_ms(cfg.admission_epoch_ms);
                if at <= transfer_end {
                    driver.queue.push(at, Ev::AdmissionEpoch { ch });
                }
            }
        }
    }

    // Assemble the report.
    let totals = driver.counters.total();
    let resolved = totals.resolved();
    if totals.submitted < resolved {
        return Err(ScenarioError::Invariant(format!(
            "outcome partition broken: submitted {} < resolved {resolved}",
            totals.submitted
        )));
    }
    let in_flight: u64 = driver
        .channels
        .iter()
        .map(|c| c.in_flight.len() as u64 + c.epoch_queue.len() as u64)
        .sum();
    if totals.submitted != resolved + in_flight {
        return Err(ScenarioError::Invariant(format!(
            "outcome partition broken: submitted {} != resolved {resolved} + in flight {in_flight}",
            totals.submitted
        )));
    }

    let latency_ms: Vec<f64> = driver.latencies.iter().map(|s| s.latency_ms()).collect();
    let latency = LatencySummary::from_samples(&latency_ms);
    let latency_cdf = if latency_ms.is_empty() {
        Vec::new()
    } else {
        compute_cdf(&latency_ms).expect("non-empty")
    };
    let (_, committed_throughput) = throughput_series(&driver.counters, cfg.duration_s)
        .map_err(|e| ScenarioError::Invariant(e.to_string()))?;
    let ordered_throughput =
        (totals.committed + totals.rw_conflict + totals.bad_signature) as f64 / cfg.duration_s;
    let growth_slope = growth_rate(&driver.growth, transfer_start, transfer_end).ok();
    let mean_block_bytes = if driver.transfer_block_bytes.is_empty() {
        0.0
    } else {
        driver.transfer_block_bytes.iter().sum::<u64>() as f64
            / driver.transfer_block_bytes.len() as f64
    };

    let report = RunReport {
        config: serde_json::to_value(cfg).expect("config serializes"),
        transfer_start_ms: transfer_start.as_ms(),
        transfer_duration_ms: SimTime::from_secs(cfg.duration_s).as_ms(),
        scheduled_slots: driver.scheduled_slots,
        skipped_slots: driver.skipped_slots,
        submitted: totals.submitted,
        committed: totals.committed,
        rw_conflict: totals.rw_conflict,
        sr_collision: totals.sr_collision,
        bad_signature: totals.bad_signature,
        in_flight_at_end: in_flight,
        committed_throughput_per_s: committed_throughput,
        ordered_throughput_per_s: ordered_throughput,
        latency,
        growth_slope_bytes_per_s: growth_slope,
        opening_blocks: driver.opening_blocks,
        opening_bytes: driver.opening_bytes,
        total_blocks: driver.total_blocks,
        total_bytes: driver.total_bytes,
        mean_block_bytes,
        collision_crossing_10pct_s: driver.counters.collision_rate_crossing(0.10),
        per_second: driver.counters.buckets.clone(),
        latency_cdf,
        growth_samples: driver.growth.clone(),
    };

    let mut chains = Vec::new();
    let mut traces = Vec::new();
    for mut channel in driver.channels {
        traces.push(channel.service.take_trace());
        chains.push(channel.ledger);
    }
    Ok(RunOutput {
        report,
        chains,
        traces,
    })
}
