//! Standalone event-loop runner for one ordering service.
//!
//! Drives a service through a scripted schedule of submissions, crashes, and
//! recoveries on a deterministic event queue. The scenario driver embeds
//! services in its own loop; this runner exists for protocol tests and for
//! experimenting with a service in isolation.

use crate::ledger::Transaction;
use crate::sim::{EventQueue, SimTime};

use super::{
    build_service, CutBatch, NodeView, OrdererConfig, OrdererEvent, StepOutput, SubmitAck,
    TraceEvent,
};

/// Scripted inputs for one run.
#[derive(Clone, Debug, Default)]
pub struct HarnessOps {
    pub submissions: Vec<(SimTime, Transaction)>,
    pub crashes: Vec<(SimTime, usize)>,
    pub recoveries: Vec<(SimTime, usize)>,
    /// Events past this time are not processed.
    pub horizon: SimTime,
    /// Delay before retrying a submission that found no leader.
    pub resubmit_delay: SimTime,
}

/// Everything observable about a finished run.
#[derive(Debug)]
pub struct HarnessResult {
    /// Batches in delivery order with their delivery times.
    pub delivered: Vec<(SimTime, CutBatch)>,
    pub trace: Vec<TraceEvent>,
    pub final_views: Vec<NodeView>,
    /// Submissions still unaccepted at the horizon.
    pub undelivered_submissions: usize,
}

enum Ev {
    Orderer(OrdererEvent),
    Submit(Transaction),
    Crash(usize),
    Recover(usize),
}

/// Runs `cfg` under the scripted `ops` with the given seed.
pub fn run_cluster(cfg: &OrdererConfig, seed: u64, ops: HarnessOps) -> HarnessResult {
    let mut service = build_service(cfg, seed, true);
    let mut queue: EventQueue<Ev> = EventQueue::new();
    for (at, tx) in ops.submissions {
        queue.push(at, Ev::Submit(tx));
    }
    for (at, node) in ops.crashes {
        queue.push(at, Ev::Crash(node));
    }
    for (at, node) in ops.recoveries {
        queue.push(at, Ev::Recover(node));
    }

    let mut delivered = Vec::new();
    let mut pending_retries = 0usize;

    let absorb = |out: StepOutput,
                  queue: &mut EventQueue<Ev>,
                  delivered: &mut Vec<(SimTime, CutBatch)>,
                  now: SimTime| {
        for (at, ev) in out.schedule {
            queue.push(at, Ev::Orderer(ev));
        }
        for batch in out.delivered {
            delivered.push((now, batch));
        }
    };

    let out = service.start(SimTime::ZERO);
    absorb(out, &mut queue, &mut delivered, SimTime::ZERO);

    while let Some(next) = queue.peek_time() {
        if next > ops.horizon {
            break;
        }
        let (now, ev) = queue.pop().expect("peeked");
        match ev {
            Ev::Orderer(ev) => {
                let out = service.handle(ev, now);
                absorb(out, &mut queue, &mut delivered, now);
            }
            Ev::Submit(tx) => {
                let (ack, out) = service.submit(tx.clone(), now);
                absorb(out, &mut queue, &mut delivered, now);
                if ack == SubmitAck::NoLeader {
                    let retry_at = now + ops.resubmit_delay;
                    if retry_at <= ops.horizon {
                        queue.push(retry_at, Ev::Submit(tx));
                    } else {
                        pending_retries += 1;
                    }
                }
            }
            Ev::Crash(node) => {
                let out = service.crash(node, now);
                absorb(out, &mut queue, &mut delivered, now);
            }
            Ev::Recover(node) => {
                let out = service.recover(node, now);
                absorb(out, &mut queue, &mut delivered, now);
            }
        }
    }

    HarnessResult {
        delivered,
        trace: service.take_trace(),
        final_views: service.inspect(),
        undelivered_submissions: pending_retries,
    }
}
