//! Raft ordering service: leader election and majority log replication.
//!
//! Log entries are whole cut batches, not individual transactions, matching
//! the orderer's batching. An entry is committed once replicated on a strict
//! majority and belonging to the leader's current term; committed batches are
//! released to block assembly in log order, exactly once, guarded by a
//! service-level release cursor. Crashed nodes stop processing events; a
//! recovered node rejoins as a follower with its log intact.
//!
//! Message loss is handled by the protocol itself: heartbeats re-send missing
//! suffixes, rejected appends walk the follower's match point backwards, and
//! candidates re-arm their randomized election timers.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::ledger::Transaction;
use crate::sim::{derive_rng, SimTime};

use super::cutter::BlockCutter;
use super::network::NetworkModel;
use super::{
    CutBatch, LogEntry, NetMsg, NodeView, OrdererConfig, OrdererEvent, OrderingService, Role,
    StepOutput, SubmitAck, TraceEvent,
};

struct RaftNode {
    alive: bool,
    role: Role,
    current_term: u64,
    voted_for: Option<usize>,
    log: Vec<LogEntry>,
    /// Entries known committed at this node.
    commit: usize,
    /// Valid id of this node's pending election timer.
    election_timer_id: u64,
    /// Leader bookkeeping, indexed by peer.
    next_len: Vec<usize>,
    match_len: Vec<usize>,
    votes_granted: u64,
}

impl RaftNode {
    fn new(cluster: usize) -> Self {
        RaftNode {
            alive: true,
            role: Role::Follower,
            current_term: 0,
            voted_for: None,
            log: Vec::new(),
            commit: 0,
            election_timer_id: 0,
            next_len: vec![0; cluster],
            match_len: vec![0; cluster],
            votes_granted: 0,
        }
    }

    fn last_log_term(&self) -> u64 {
        self.log.last().map(|e| e.term).unwrap_or(0)
    }
}

pub struct RaftService {
    cfg: OrdererConfig,
    cluster: usize,
    nodes: Vec<RaftNode>,
    net: NetworkModel,
    rng: ChaCha20Rng,
    /// Pending batch under the current leader.
    cutter: BlockCutter,
    /// The node clients currently submit to.
    leader_hint: Option<usize>,
    /// Batches already released to block assembly.
    released: usize,
    trace_enabled: bool,
    trace: Vec<TraceEvent>,
}

impl RaftService {
    pub fn new(cfg: &OrdererConfig, seed: u64, trace_enabled: bool) -> Self {
        let cluster = cfg.effective_cluster_size();
        RaftService {
            cfg: cfg.clone(),
            cluster,
            nodes: (0..cluster).map(|_| RaftNode::new(cluster)).collect(),
            net: NetworkModel::new(cfg.net, seed),
            rng: derive_rng(seed, "raft"),
            cutter: BlockCutter::new(cfg.batch_size, cfg.batch_timeout()),
            leader_hint: None,
            released: 0,
            trace_enabled,
            trace: Vec::new(),
        }
    }

    fn majority(&self) -> usize {
        self.cluster / 2 + 1
    }

    fn trace(&mut self, time: SimTime, node: usize, kind: &'static str, term: u64) {
        if self.trace_enabled {
            self.trace.push(TraceEvent {
                time,
                node,
                kind,
                term,
            });
        }
    }

    fn election_delay(&mut self) -> SimTime {
        let lo = SimTime::from_ms(self.cfg.election_timeout_ms.0).as_us();
        let hi = SimTime::from_ms(self.cfg.election_timeout_ms.1).as_us();
        SimTime::from_us(self.rng.gen_range(lo..=hi.max(lo)))
    }

    fn arm_election_timer(&mut self, node: usize, now: SimTime, out: &mut StepOutput) {
        let delay = self.election_delay();
        let n = &mut self.nodes[node];
        n.election_timer_id += 1;
        out.schedule.push((
            now + delay,
            OrdererEvent::ElectionTimer {
                node,
                id: n.election_timer_id,
            },
        ));
    }

    fn send(&mut self, now: SimTime, to: usize, msg: NetMsg, out: &mut StepOutput) {
        if self.net.dropped() {
            let (from, term) = match &msg {
                NetMsg::VoteRequest { from, term, .. }
                | NetMsg::VoteReply { from, term, .. }
                | NetMsg::Append { from, term, .. }
                | NetMsg::AppendReply { from, term, .. } => (*from, *term),
            };
            self.trace(now, from, "drop", term);
            return;
        }
        let delay = self.net.sample_latency();
        out.schedule
            .push((now + delay, OrdererEvent::Message { to, msg }));
    }

    fn step_down(&mut self, node: usize, term: u64, now: SimTime, out: &mut StepOutput) {
        let n = &mut self.nodes[node];
        let was_leader = n.role == Role::Leader;
        n.role = Role::Follower;
        // The vote only resets when the term advances; within a term a node
        // keeps the vote it already cast.
        if term > n.current_term {
            n.voted_for = None;
        }
        n.current_term = term;
        n.votes_granted = 0;
        if was_leader {
            self.trace(now, node, "stepdown", term);
            if self.leader_hint == Some(node) {
                self.leader_hint = None;
                self.cutter.reset();
            }
        }
        self.arm_election_timer(node, now, out);
    }

    fn become_candidate(&mut self, node: usize, now: SimTime, out: &mut StepOutput) {
        let term;
        let last_log_len;
        let last_log_term;
        {
            let n = &mut self.nodes[node];
            n.role = Role::Candidate;
            n.current_term += 1;
            n.voted_for = Some(node);
            n.votes_granted = 1;
            term = n.current_term;
            last_log_len = n.log.len();
            last_log_term = n.last_log_term();
        }
        self.trace(now, node, "candidate", term);
        self.arm_election_timer(node, now, out);
        for peer in 0..self.cluster {
            if peer == node {
                continue;
            }
            self.send(
                now,
                peer,
                NetMsg::VoteRequest {
                    from: node,
                    term,
                    last_log_len,
                    last_log_term,
                },
                out,
            );
        }
        if self.majority() == 1 {
            self.become_leader(node, now, out);
        }
    }

    fn become_leader(&mut self, node: usize, now: SimTime, out: &mut StepOutput) {
        let term;
        {
            let n = &mut self.nodes[node];
            n.role = Role::Leader;
            let len = n.log.len();
            for peer in 0..self.cluster {
                n.next_len[peer] = len;
                n.match_len[peer] = 0;
            }
            term = n.current_term;
        }
        self.trace(now, node, "leader", term);
        self.leader_hint = Some(node);
        self.cutter.reset();
        for peer in 0..self.cluster {
            if peer != node {
                self.send_append(node, peer, now, out);
            }
        }
        out.schedule.push((
            now + SimTime::from_ms(self.cfg.heartbeat_ms),
            OrdererEvent::HeartbeatTimer { node, term },
        ));
    }

    fn send_append(&mut self, leader: usize, peer: usize, now: SimTime, out: &mut StepOutput) {
        let n = &self.nodes[leader];
        let prev_len = n.next_len[peer].min(n.log.len());
        let prev_term = if prev_len > 0 {
            n.log[prev_len - 1].term
        } else {
            0
        };
        let entries: Vec<LogEntry> = n.log[prev_len..].to_vec();
        let msg = NetMsg::Append {
            from: leader,
            term: n.current_term,
            prev_len,
            prev_term,
            entries,
            leader_commit: n.commit,
        };
        self.send(now, peer, msg, out);
    }

    /// Advances the leader's commit point over entries of its current term
    /// replicated on a majority, releasing newly committed batches in order.
    fn advance_commit(&mut self, leader: usize, now: SimTime, out: &mut StepOutput) {
        let majority = self.majority();
        let n = &self.nodes[leader];
        let mut commit = n.commit;
        for candidate in (n.commit + 1)..=n.log.len() {
            if n.log[candidate - 1].term != n.current_term {
                continue;
            }
            let replicas = 1
                + (0..self.cluster)
                    .filter(|&p| p != leader && n.match_len[p] >= candidate)
                    .count();
            if replicas >= majority {
                commit = candidate;
            }
        }
        if commit == self.nodes[leader].commit {
            return;
        }
        self.nodes[leader].commit = commit;
        let term = self.nodes[leader].current_term;
        self.trace(now, leader, "commit", term);
        while self.released < commit {
            let batch = self.nodes[leader].log[self.released].batch.clone();
            self.trace(now, leader, "deliver", term);
            out.delivered.push(batch);
            self.released += 1;
        }
    }

    /// Appends a freshly cut batch to the leader's log and replicates it.
    fn append_batch(&mut self, leader: usize, batch: CutBatch, now: SimTime, out: &mut StepOutput) {
        let term = self.nodes[leader].current_term;
        self.trace(now, leader, "cut", term);
        self.nodes[leader].log.push(LogEntry { term, batch });
        for peer in 0..self.cluster {
            if peer != leader {
                self.send_append(leader, peer, now, out);
            }
        }
        // Single-node degenerate case commits immediately.
        self.advance_commit(leader, now, out);
    }

    fn current_leader(&self) -> Option<usize> {
        let node = self.leader_hint?;
        let n = &self.nodes[node];
        (n.alive && n.role == Role::Leader).then_some(node)
    }

    fn on_message(&mut self, to: usize, msg: NetMsg, now: SimTime, out: &mut StepOutput) {
        if !self.nodes[to].alive {
            return;
        }
        match msg {
            NetMsg::VoteRequest {
                from,
                term,
                last_log_len,
                last_log_term,
            } => {
                if term > self.nodes[to].current_term {
                    self.step_down(to, term, now, out);
                }
                let n = &mut self.nodes[to];
                let mut granted = false;
                if term == n.current_term && n.role == Role::Follower {
                    let vote_free = n.voted_for.is_none() || n.voted_for == Some(from);
                    let up_to_date = last_log_term > n.last_log_term()
                        || (last_log_term == n.last_log_term() && last_log_len >= n.log.len());
                    if vote_free && up_to_date {
                        n.voted_for = Some(from);
                        granted = true;
                    }
                }
                let reply_term = self.nodes[to].current_term;
                if granted {
                    self.trace(now, to, "vote", reply_term);
                    self.arm_election_timer(to, now, out);
                }
                self.send(
                    now,
                    from,
                    NetMsg::VoteReply {
                        from: to,
                        term: reply_term,
                        granted,
                    },
                    out,
                );
            }
            NetMsg::VoteReply {
                from: _,
                term,
                granted,
            } => {
                if term > self.nodes[to].current_term {
                    self.step_down(to, term, now, out);
                    return;
                }
                let n = &mut self.nodes[to];
                if n.role != Role::Candidate || term != n.current_term || !granted {
                    return;
                }
                n.votes_granted += 1;
                if n.votes_granted as usize >= self.majority() {
                    self.become_leader(to, now, out);
                }
            }
            NetMsg::Append {
                from,
                term,
                prev_len,
                prev_term,
                entries,
                leader_commit,
            } => {
                if term < self.nodes[to].current_term {
                    let reply_term = self.nodes[to].current_term;
                    self.send(
                        now,
                        from,
                        NetMsg::AppendReply {
                            from: to,
                            term: reply_term,
                            success: false,
                            match_len: 0,
                        },
                        out,
                    );
                    return;
                }
                // Valid leader contact for this term or newer.
                if term > self.nodes[to].current_term || self.nodes[to].role != Role::Follower {
                    self.step_down(to, term, now, out);
                } else {
                    self.arm_election_timer(to, now, out);
                }
                let n = &mut self.nodes[to];
                n.current_term = term;

                let consistent = n.log.len() >= prev_len
                    && (prev_len == 0 || n.log[prev_len - 1].term == prev_term);
                if !consistent {
                    self.send(
                        now,
                        from,
                        NetMsg::AppendReply {
                            from: to,
                            term,
                            success: false,
                            match_len: 0,
                        },
                        out,
                    );
                    return;
                }
                // Append, truncating any conflicting suffix.
                for (k, entry) in entries.iter().enumerate() {
                    let pos = prev_len + k;
                    if pos < n.log.len() {
                        if n.log[pos].term != entry.term {
                            n.log.truncate(pos);
                            n.log.push(entry.clone());
                        }
                    } else {
                        n.log.push(entry.clone());
                    }
                }
                let match_len = prev_len + entries.len();
                n.commit = n.commit.max(leader_commit.min(n.log.len()));
                self.send(
                    now,
                    from,
                    NetMsg::AppendReply {
                        from: to,
                        term,
                        success: true,
                        match_len,
                    },
                    out,
                );
            }
            NetMsg::AppendReply {
                from,
                term,
                success,
                match_len,
            } => {
                if term > self.nodes[to].current_term {
                    self.step_down(to, term, now, out);
                    return;
                }
                let n = &mut self.nodes[to];
                if n.role != Role::Leader || term != n.current_term {
                    return;
                }
                if success {
                    n.match_len[from] = n.match_len[from].max(match_len);
                    n.next_len[from] = n.match_len[from];
                    self.advance_commit(to, now, out);
                } else {
                    // Walk back one entry and retry immediately.
                    n.next_len[from] = n.next_len[from].saturating_sub(1);
                    self.send_append(to, from, now, out);
                }
            }
        }
    }
}

impl OrderingService for RaftService {
    fn start(&mut self, now: SimTime) -> StepOutput {
        let mut out = StepOutput::default();
        for node in 0..self.cluster {
            self.arm_election_timer(node, now, &mut out);
        }
        out
    }

    fn submit(&mut self, tx: Transaction, now: SimTime) -> (SubmitAck, StepOutput) {
        let mut out = StepOutput::default();
        let Some(leader) = self.current_leader() else {
            return (SubmitAck::NoLeader, out);
        };
        let effect = self.cutter.on_submit(tx, now);
        if effect.duplicate {
            return (SubmitAck::Duplicate, out);
        }
        if let Some((deadline, epoch)) = effect.arm_timer {
            out.schedule.push((
                deadline,
                OrdererEvent::BatchTimer {
                    node: leader,
                    epoch,
                },
            ));
        }
        if let Some(batch) = effect.cut {
            self.append_batch(leader, batch, now, &mut out);
        }
        (SubmitAck::Accepted, out)
    }

    fn handle(&mut self, event: OrdererEvent, now: SimTime) -> StepOutput {
        let mut out = StepOutput::default();
        match event {
            OrdererEvent::BatchTimer { node, epoch } => {
                if self.current_leader() != Some(node) {
                    return out;
                }
                if let Some(batch) = self.cutter.on_timer(epoch, now) {
                    self.append_batch(node, batch, now, &mut out);
                }
            }
            OrdererEvent::ElectionTimer { node, id } => {
                let n = &self.nodes[node];
                if !n.alive || id != n.election_timer_id || n.role == Role::Leader {
                    return out;
                }
                self.trace(now, node, "timeout", self.nodes[node].current_term);
                self.become_candidate(node, now, &mut out);
            }
            OrdererEvent::HeartbeatTimer { node, term } => {
                let n = &self.nodes[node];
                if !n.alive || n.role != Role::Leader || n.current_term != term {
                    return out;
                }
                for peer in 0..self.cluster {
                    if peer != node {
                        self.send_append(node, peer, now, &mut out);
                    }
                }
                out.schedule.push((
                    now + SimTime::from_ms(self.cfg.heartbeat_ms),
                    OrdererEvent::HeartbeatTimer { node, term },
                ));
            }
            OrdererEvent::Message { to, msg } => self.on_message(to, msg, now, &mut out),
            OrdererEvent::KafkaConfirm { .. } | OrdererEvent::KafkaRetryTimer => {}
        }
        out
    }

    fn crash(&mut self, node: usize, now: SimTime) -> StepOutput {
        self.nodes[node].alive = false;
        let term = self.nodes[node].current_term;
        self.trace(now, node, "crash", term);
        if self.leader_hint == Some(node) {
            self.leader_hint = None;
            self.cutter.reset();
        }
        StepOutput::default()
    }

    fn recover(&mut self, node: usize, now: SimTime) -> StepOutput {
        let mut out = StepOutput::default();
        let n = &mut self.nodes[node];
        if n.alive {
            return out;
        }
        n.alive = true;
        n.role = Role::Follower;
        n.votes_granted = 0;
        let term = n.current_term;
        self.trace(now, node, "recover", term);
        self.arm_election_timer(node, now, &mut out);
        out
    }

    fn inspect(&self) -> Vec<NodeView> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(node, n)| NodeView {
                node,
                alive: n.alive,
                role: n.role,
                term: n.current_term,
                log: n.log.iter().map(|e| (e.term, e.batch.id)).collect(),
                commit: n.commit,
            })
            .collect()
    }

    fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }
}
