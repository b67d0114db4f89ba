//! Batch cutting: the size-or-timeout rule shared by every ordering service.
//!
//! A batch is cut as soon as the pending set reaches the configured size, or
//! once the oldest pending transaction has waited the full batch timeout.
//! The timeout clock starts at the first pending arrival and resets on every
//! cut.

use std::collections::HashSet;

use crate::ledger::Transaction;
use crate::sim::SimTime;

use super::CutBatch;

pub struct BlockCutter {
    batch_size: usize,
    timeout: SimTime,
    pending: Vec<Transaction>,
    first_arrival: Option<SimTime>,
    /// Bumped on every cut or reset; stale timer events carry an old epoch
    /// and are ignored.
    epoch: u64,
    next_batch_id: u64,
    seen: HashSet<u64>,
}

/// What a submission did to the pending set.
pub struct SubmitEffect {
    /// Cut produced by the size rule, if any.
    pub cut: Option<CutBatch>,
    /// Deadline to arm because this submission started a new pending window.
    pub arm_timer: Option<(SimTime, u64)>,
    pub duplicate: bool,
}

impl BlockCutter {
    pub fn new(batch_size: usize, timeout: SimTime) -> Self {
        BlockCutter {
            batch_size,
            timeout,
            pending: Vec::new(),
            first_arrival: None,
            epoch: 0,
            next_batch_id: 0,
            seen: HashSet::new(),
        }
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Accepts one transaction. Cuts immediately when the pending set reaches
    /// the batch size; otherwise reports the deadline to arm if this was the
    /// first pending transaction. Duplicate ids are ignored.
    pub fn on_submit(&mut self, tx: Transaction, now: SimTime) -> SubmitEffect {
        if !self.seen.insert(tx.tx_id) {
            return SubmitEffect {
                cut: None,
                arm_timer: None,
                duplicate: true,
            };
        }
        let mut arm_timer = None;
        if self.pending.is_empty() {
            self.first_arrival = Some(now);
            arm_timer = Some((now + self.timeout, self.epoch));
        }
        self.pending.push(tx);
        let cut = if self.pending.len() >= self.batch_size {
            Some(self.cut(now))
        } else {
            None
        };
        SubmitEffect {
            cut,
            arm_timer,
            duplicate: false,
        }
    }

    /// Timeout deadline fired. Cuts iff the epoch is current and the oldest
    /// pending transaction has aged the full timeout.
    pub fn on_timer(&mut self, epoch: u64, now: SimTime) -> Option<CutBatch> {
        if epoch != self.epoch || self.pending.is_empty() {
            return None;
        }
        let first = self.first_arrival.expect("pending implies first arrival");
        if now - first >= self.timeout {
            Some(self.cut(now))
        } else {
            None
        }
    }

    /// Drops the pending set (leadership change); accepted ids stay known so
    /// duplicates remain ignored, and batch ids stay monotone.
    pub fn reset(&mut self) -> Vec<Transaction> {
        self.first_arrival = None;
        self.epoch += 1;
        std::mem::take(&mut self.pending)
    }

    fn cut(&mut self, now: SimTime) -> CutBatch {
        let id = self.next_batch_id;
        self.next_batch_id += 1;
        self.first_arrival = None;
        self.epoch += 1;
        CutBatch {
            id,
            txs: std::mem::take(&mut self.pending),
            cut_time: now,
        }
    }
}
