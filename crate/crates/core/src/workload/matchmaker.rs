//! Market matchmaking and intent bookkeeping for one channel.
//!
//! The matchmaker resolves an open request to the counterparty on the
//! opposite side with the largest *projected* remaining intent — committed
//! intent minus what in-flight requests have already reserved — so a burst of
//! concurrent requests spreads over the market instead of piling onto one
//! tenant. Reservations are taken when a request enters the pipeline and
//! either convert into committed decrements or are released when the request
//! fails.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use rand::Rng;

use crate::contracts::{AccountBook, IntentSide};
use crate::ledger::TenantId;

pub struct Matchmaker {
    /// Units reserved by in-flight requests, per tenant per type.
    outstanding: Vec<Vec<u64>>,
    /// Cached projected totals backing the side indexes.
    projected_total: Vec<u64>,
    free_index: BTreeSet<(u64, Reverse<TenantId>)>,
    seek_index: BTreeSet<(u64, Reverse<TenantId>)>,
    /// Tenants still holding committed intent, for uniform issuer picks.
    eligible: Vec<TenantId>,
    eligible_pos: Vec<Option<usize>>,
}

impl Matchmaker {
    pub fn new(book: &AccountBook) -> Self {
        let n = book.len();
        let mut mm = Matchmaker {
            outstanding: vec![Vec::new(); n],
            projected_total: vec![0; n],
            free_index: BTreeSet::new(),
            seek_index: BTreeSet::new(),
            eligible: Vec::new(),
            eligible_pos: vec![None; n],
        };
        for account in book.iter() {
            let t = account.tenant as usize;
            mm.outstanding[t] = vec![0; account.remaining_intent.len()];
            let total = account.remaining_total();
            mm.projected_total[t] = total;
            if total > 0 {
                mm.side_index_mut(account.side)
                    .insert((total, Reverse(account.tenant)));
                mm.eligible_pos[t] = Some(mm.eligible.len());
                mm.eligible.push(account.tenant);
            }
        }
        mm
    }

    fn side_index_mut(&mut self, side: IntentSide) -> &mut BTreeSet<(u64, Reverse<TenantId>)> {
        match side {
            IntentSide::Free => &mut self.free_index,
            IntentSide::Seek => &mut self.seek_index,
        }
    }

    fn side_index(&self, side: IntentSide) -> &BTreeSet<(u64, Reverse<TenantId>)> {
        match side {
            IntentSide::Free => &self.free_index,
            IntentSide::Seek => &self.seek_index,
        }
    }

    /// Uniform pick among tenants with committed intent left; `None` once the
    /// market is fully satisfied.
    pub fn pick_issuer<R: Rng>(&self, rng: &mut R) -> Option<TenantId> {
        if self.eligible.is_empty() {
            return None;
        }
        let idx = rng.gen_range(0..self.eligible.len());
        Some(self.eligible[idx])
    }

    /// Counterparty with the greatest projected remaining intent on `side`;
    /// ties break to the lowest tenant id.
    pub fn pick_counterparty(&self, side: IntentSide) -> Option<TenantId> {
        self.side_index(side)
            .iter()
            .next_back()
            .map(|&(_, Reverse(tenant))| tenant)
    }

    /// Reserves `amounts` of `tenant`'s projected intent for an in-flight
    /// request.
    pub fn reserve(&mut self, book: &AccountBook, tenant: TenantId, amounts: &[u64]) {
        let t = tenant as usize;
        for (rt, &a) in amounts.iter().enumerate() {
            self.outstanding[t][rt] += a;
        }
        self.reindex(book, tenant);
    }

    /// Releases a reservation whose request failed.
    pub fn release(&mut self, book: &AccountBook, tenant: TenantId, amounts: &[u64]) {
        let t = tenant as usize;
        for (rt, &a) in amounts.iter().enumerate() {
            self.outstanding[t][rt] = self.outstanding[t][rt].saturating_sub(a);
        }
        self.reindex(book, tenant);
    }

    /// A transfer committed: decrement the tenant's committed intent by the
    /// moved amounts (clamped at zero — a giver may overshoot its own plan),
    /// drop the matching reservation, and update eligibility. Satisfaction is
    /// absorbing: once committed intent is exhausted the tenant never issues
    /// again.
    pub fn commit(&mut self, book: &mut AccountBook, tenant: TenantId, moved: &[u64]) {
        let t = tenant as usize;
        {
            let account = book.get_mut(tenant).expect("known tenant");
            for (rt, &m) in moved.iter().enumerate() {
                account.remaining_intent[rt] = account.remaining_intent[rt].saturating_sub(m);
                self.outstanding[t][rt] = self.outstanding[t][rt].saturating_sub(m);
            }
        }
        self.reindex(book, tenant);
        if book.get(tenant).expect("known tenant").remaining_total() == 0 {
            self.retire(tenant);
        }
    }

    fn retire(&mut self, tenant: TenantId) {
        let t = tenant as usize;
        if let Some(pos) = self.eligible_pos[t].take() {
            let last = self.eligible.len() - 1;
            self.eligible.swap(pos, last);
            self.eligible.pop();
            if pos <= last && pos < self.eligible.len() {
                let moved = self.eligible[pos];
                self.eligible_pos[moved as usize] = Some(pos);
            }
        }
    }

    fn reindex(&mut self, book: &AccountBook, tenant: TenantId) {
        let t = tenant as usize;
        let account = book.get(tenant).expect("known tenant");
        let new_total: u64 = account
            .remaining_intent
            .iter()
            .zip(&self.outstanding[t])
            .map(|(&committed, &reserved)| committed.saturating_sub(reserved))
            .sum();
        let old_total = self.projected_total[t];
        if new_total == old_total {
            return;
        }
        let side = account.side;
        let index = self.side_index_mut(side);
        index.remove(&(old_total, Reverse(tenant)));
        if new_total > 0 {
            index.insert((new_total, Reverse(tenant)));
        }
        self.projected_total[t] = new_total;
    }

    pub fn eligible_count(&self) -> usize {
        self.eligible.len()
    }
}
