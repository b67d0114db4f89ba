//! Solo ordering: a single orderer, no consensus, no replication delay.
//! Batches are final the moment they are cut.

use crate::ledger::Transaction;
use crate::sim::SimTime;

use super::cutter::BlockCutter;
use super::{
    NodeView, OrdererConfig, OrdererEvent, OrderingService, Role, StepOutput, SubmitAck, TraceEvent,
};

pub struct SoloService {
    cutter: BlockCutter,
    alive: bool,
    delivered_ids: Vec<u64>,
    trace_enabled: bool,
    trace: Vec<TraceEvent>,
}

impl SoloService {
    pub fn new(cfg: &OrdererConfig, trace_enabled: bool) -> Self {
        SoloService {
            cutter: BlockCutter::new(cfg.batch_size, cfg.batch_timeout()),
            alive: true,
            delivered_ids: Vec::new(),
            trace_enabled,
            trace: Vec::new(),
        }
    }

    fn trace(&mut self, time: SimTime, kind: &'static str) {
        if self.trace_enabled {
            self.trace.push(TraceEvent {
                time,
                node: 0,
                kind,
                term: 0,
            });
        }
    }
}

impl OrderingService for SoloService {
    fn start(&mut self, _now: SimTime) -> StepOutput {
        StepOutput::default()
    }

    fn submit(&mut self, tx: Transaction, now: SimTime) -> (SubmitAck, StepOutput) {
        let mut out = StepOutput::default();
        if !self.alive {
            return (SubmitAck::NoLeader, out);
        }
        let effect = self.cutter.on_submit(tx, now);
        if effect.duplicate {
            return (SubmitAck::Duplicate, out);
        }
        if let Some((deadline, epoch)) = effect.arm_timer {
            out.schedule
                .push((deadline, OrdererEvent::BatchTimer { node: 0, epoch }));
        }
        if let Some(batch) = effect.cut {
            self.trace(now, "cut");
            self.trace(now, "deliver");
            self.delivered_ids.push(batch.id);
            out.delivered.push(batch);
        }
        (SubmitAck::Accepted, out)
    }

    fn handle(&mut self, event: OrdererEvent, now: SimTime) -> StepOutput {
        let mut out = StepOutput::default();
        if let OrdererEvent::BatchTimer { node: _, epoch } = event {
            if self.alive {
                if let Some(batch) = self.cutter.on_timer(epoch, now) {
                    self.trace(now, "cut");
                    self.trace(now, "deliver");
                    self.delivered_ids.push(batch.id);
                    out.delivered.push(batch);
                }
            }
        }
        out
    }

    fn crash(&mut self, _node: usize, now: SimTime) -> StepOutput {
        self.alive = false;
        self.trace(now, "crash");
        StepOutput::default()
    }

    fn recover(&mut self, _node: usize, now: SimTime) -> StepOutput {
        self.alive = true;
        self.trace(now, "recover");
        StepOutput::default()
    }

    fn inspect(&self) -> Vec<NodeView> {
        vec![NodeView {
            node: 0,
            alive: self.alive,
            role: Role::Leader,
            term: 0,
            log: self.delivered_ids.iter().map(|&id| (0, id)).collect(),
            commit: self.delivered_ids.len(),
        }]
    }

    fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }
}
