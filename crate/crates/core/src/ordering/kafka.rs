//! Kafka-style ordering service: a single-partition crash-fault-tolerant
//! replicated log.
//!
//! Cut batches are appended to the partition in arrival order. Each live
//! broker confirms an appended entry after one sampled network latency; the
//! entry is acknowledged once the configured quorum of brokers has confirmed
//! it. Acknowledged entries are released strictly in append order, so the
//! delivered stream is total and never reorders. With fewer live brokers
//! than the quorum, appends stall and resume on recovery; a periodic
//! re-replication sweep re-requests confirmations lost to drops or crashes.

use crate::ledger::Transaction;
use crate::sim::SimTime;

use super::cutter::BlockCutter;
use super::network::NetworkModel;
use super::{
    CutBatch, NodeView, OrdererConfig, OrdererEvent, OrderingService, Role, StepOutput, SubmitAck,
    TraceEvent,
};

struct EntryState {
    batch: CutBatch,
    confirmed: Vec<bool>,
    acked: bool,
}

impl EntryState {
    fn confirmations(&self) -> usize {
        self.confirmed.iter().filter(|&&c| c).count()
    }
}

pub struct KafkaService {
    cfg: OrdererConfig,
    brokers: Vec<bool>,
    quorum: usize,
    net: NetworkModel,
    cutter: BlockCutter,
    entries: Vec<EntryState>,
    released: usize,
    retry_armed: bool,
    trace_enabled: bool,
    trace: Vec<TraceEvent>,
}

impl KafkaService {
    pub fn new(cfg: &OrdererConfig, seed: u64, trace_enabled: bool) -> Self {
        let cluster = cfg.effective_cluster_size();
        KafkaService {
            cfg: cfg.clone(),
            brokers: vec![true; cluster],
            quorum: cfg.ack_quorum,
            net: NetworkModel::new(cfg.net, seed),
            cutter: BlockCutter::new(cfg.batch_size, cfg.batch_timeout()),
            entries: Vec::new(),
            released: 0,
            retry_armed: false,
            trace_enabled,
            trace: Vec::new(),
        }
    }

    fn trace(&mut self, time: SimTime, node: usize, kind: &'static str) {
        if self.trace_enabled {
            self.trace.push(TraceEvent {
                time,
                node,
                kind,
                term: 0,
            });
        }
    }

    fn request_confirm(&mut self, entry: usize, broker: usize, now: SimTime, out: &mut StepOutput) {
        if self.net.dropped() {
            self.trace(now, broker, "drop");
            return;
        }
        let delay = self.net.sample_latency();
        out.schedule
            .push((now + delay, OrdererEvent::KafkaConfirm { entry, broker }));
    }

    fn append(&mut self, batch: CutBatch, now: SimTime, out: &mut StepOutput) {
        self.trace(now, 0, "cut");
        let entry = self.entries.len();
        self.entries.push(EntryState {
            batch,
            confirmed: vec![false; self.brokers.len()],
            acked: false,
        });
        for broker in 0..self.brokers.len() {
            if self.brokers[broker] {
                self.request_confirm(entry, broker, now, out);
            }
        }
        self.arm_retry(now, out);
    }

    fn arm_retry(&mut self, now: SimTime, out: &mut StepOutput) {
        if !self.retry_armed && self.entries[self.released..].iter().any(|e| !e.acked) {
            self.retry_armed = true;
            out.schedule.push((
                now + SimTime::from_ms(self.cfg.retry_ms),
                OrdererEvent::KafkaRetryTimer,
            ));
        }
    }

    fn release_ready(&mut self, now: SimTime, out: &mut StepOutput) {
        while self.released < self.entries.len() && self.entries[self.released].acked {
            self.trace(now, 0, "deliver");
            out.delivered
                .push(self.entries[self.released].batch.clone());
            self.released += 1;
        }
    }
}

impl OrderingService for KafkaService {
    fn start(&mut self, _now: SimTime) -> StepOutput {
        StepOutput::default()
    }

    fn submit(&mut self, tx: Transaction, now: SimTime) -> (SubmitAck, StepOutput) {
        let mut out = StepOutput::default();
        let effect = self.cutter.on_submit(tx, now);
        if effect.duplicate {
            return (SubmitAck::Duplicate, out);
        }
        if let Some((deadline, epoch)) = effect.arm_timer {
            out.schedule
                .push((deadline, OrdererEvent::BatchTimer { node: 0, epoch }));
        }
        if let Some(batch) = effect.cut {
            self.append(batch, now, &mut out);
        }
        (SubmitAck::Accepted, out)
    }

    fn handle(&mut self, event: OrdererEvent, now: SimTime) -> StepOutput {
        let mut out = StepOutput::default();
        match event {
            OrdererEvent::BatchTimer { node: _, epoch } => {
                if let Some(batch) = self.cutter.on_timer(epoch, now) {
                    self.append(batch, now, &mut out);
                }
            }
            OrdererEvent::KafkaConfirm { entry, broker } => {
                // A confirmation from a broker that is down right now is
                // void; the retry sweep re-collects after recovery.
                if !self.brokers[broker] {
                    return out;
                }
                let e = &mut self.entries[entry];
                if e.confirmed[broker] {
                    return out;
                }
                e.confirmed[broker] = true;
                self.trace(now, broker, "confirm");
                let e = &mut self.entries[entry];
                if !e.acked && e.confirmations() >= self.quorum {
                    e.acked = true;
                    self.trace(now, 0, "ack");
                    self.release_ready(now, &mut out);
                }
            }
            OrdererEvent::KafkaRetryTimer => {
                self.retry_armed = false;
                let pending: Vec<(usize, usize)> = self
                    .entries
                    .iter()
                    .enumerate()
                    .skip(self.released)
                    .filter(|(_, e)| !e.acked)
                    .flat_map(|(idx, e)| {
                        e.confirmed
                            .iter()
                            .enumerate()
                            .filter(|(b, &c)| !c && self.brokers[*b])
                            .map(move |(b, _)| (idx, b))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                for (entry, broker) in pending {
                    self.request_confirm(entry, broker, now, &mut out);
                }
                self.arm_retry(now, &mut out);
            }
            OrdererEvent::ElectionTimer { .. }
            | OrdererEvent::HeartbeatTimer { .. }
            | OrdererEvent::Message { .. } => {}
        }
        out
    }

    fn crash(&mut self, node: usize, now: SimTime) -> StepOutput {
        self.brokers[node] = false;
        self.trace(now, node, "crash");
        StepOutput::default()
    }

    fn recover(&mut self, node: usize, now: SimTime) -> StepOutput {
        let mut out = StepOutput::default();
        if !self.brokers[node] {
            self.brokers[node] = true;
            self.trace(now, node, "recover");
            self.arm_retry(now, &mut out);
        }
        out
    }

    fn inspect(&self) -> Vec<NodeView> {
        self.brokers
            .iter()
            .enumerate()
            .map(|(node, &alive)| NodeView {
                node,
                alive,
                role: if node == 0 {
                    Role::Leader
                } else {
                    Role::Follower
                },
                term: 0,
                log: self
                    .entries
                    .iter()
                    .filter(|e| e.confirmed[node])
                    .map(|e| (0, e.batch.id))
                    .collect(),
                commit: self.released,
            })
            .collect()
    }

    fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }
}
