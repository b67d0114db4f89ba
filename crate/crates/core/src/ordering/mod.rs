//! Ordering services: turning submitted transactions into a total order of
//! cut batches.
//!
//! Three interchangeable services implement the same state-machine interface:
//!
//! - **Solo** — a single orderer, no consensus, no added latency;
//! - **Raft** — leader election and majority log replication;
//! - **Kafka-style** — a single-partition crash-fault-tolerant replicated
//!   log where an append is acknowledged once a quorum of brokers confirms.
//!
//! Services never touch a clock or a thread: they consume timestamped events
//! and return the events to schedule next, so the surrounding event loop (the
//! scenario driver or a test harness) stays in full control and runs are
//! reproducible from the seed. Batch cutting follows the size-or-timeout rule
//! of [`cutter::BlockCutter`] in every service.

pub mod cutter;
pub mod harness;
mod kafka;
mod network;
mod raft;
mod solo;

pub use cutter::BlockCutter;
pub use harness::{run_cluster, HarnessOps, HarnessResult};
pub use network::{NetworkConfig, NetworkModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Transaction;
use crate::sim::SimTime;

/// Which ordering service to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusKind {
    Solo,
    Raft,
    Kafka,
}

impl std::fmt::Display for ConsensusKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConsensusKind::Solo => write!(f, "solo"),
            ConsensusKind::Raft => write!(f, "raft"),
            ConsensusKind::Kafka => write!(f, "kafka"),
        }
    }
}

impl std::str::FromStr for ConsensusKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "solo" => Ok(ConsensusKind::Solo),
            "raft" => Ok(ConsensusKind::Raft),
            "kafka" => Ok(ConsensusKind::Kafka),
            other => Err(format!("unknown consensus service {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum OrderingError {
    #[error("invalid ordering config: {0}")]
    InvalidConfig(String),
}

/// Ordering-layer configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OrdererConfig {
    pub service: ConsensusKind,
    /// Maximum entries per block.
    pub batch_size: usize,
    /// Time an orderer waits after the first pending transaction before
    /// cutting, milliseconds.
    pub batch_timeout_ms: f64,
    /// Orderer nodes / brokers. 1 for solo; odd >= 3 for raft; >= ack quorum
    /// for kafka.
    pub cluster_size: usize,
    /// Randomized election timeout range (raft), milliseconds.
    pub election_timeout_ms: (f64, f64),
    /// Leader heartbeat interval (raft), milliseconds.
    pub heartbeat_ms: f64,
    /// Broker confirmations needed to acknowledge an append (kafka).
    pub ack_quorum: usize,
    /// Re-replication interval for unacknowledged entries (kafka),
    /// milliseconds.
    pub retry_ms: f64,
    pub net: NetworkConfig,
}

impl Default for OrdererConfig {
    fn default() -> Self {
        OrdererConfig {
            service: ConsensusKind::Solo,
            batch_size: 20,
            batch_timeout_ms: 300.0,
            cluster_size: 1,
            election_timeout_ms: (1000.0, 2000.0),
            heartbeat_ms: 100.0,
            ack_quorum: 2,
            retry_ms: 100.0,
            net: NetworkConfig::default(),
        }
    }
}

impl OrdererConfig {
    /// Cluster size used when the config leaves it at the solo default of 1
    /// but selects a replicated service.
    pub fn effective_cluster_size(&self) -> usize {
        match self.service {
            ConsensusKind::Solo => 1,
            ConsensusKind::Raft | ConsensusKind::Kafka => {
                if self.cluster_size <= 1 {
                    3
                } else {
                    self.cluster_size
                }
            }
        }
    }

    pub fn batch_timeout(&self) -> SimTime {
        SimTime::from_ms(self.batch_timeout_ms)
    }

    pub fn validate(&self) -> Result<(), OrderingError> {
        if self.batch_size == 0 {
            return Err(OrderingError::InvalidConfig(
                "batch_size must be >= 1".into(),
            ));
        }
        if self.batch_timeout_ms <= 0.0 {
            return Err(OrderingError::InvalidConfig(
                "batch_timeout_ms must be positive".into(),
            ));
        }
        let n = self.effective_cluster_size();
        match self.service {
            ConsensusKind::Solo => {}
            ConsensusKind::Raft => {
                if n < 3 || n.is_multiple_of(2) {
                    return Err(OrderingError::InvalidConfig(format!(
                        "raft requires an odd cluster size >= 3, got {n}"
                    )));
                }
                if self.election_timeout_ms.0 <= 0.0
                    || self.election_timeout_ms.1 < self.election_timeout_ms.0
                {
                    return Err(OrderingError::InvalidConfig(
                        "election timeout range must be positive and ordered".into(),
                    ));
                }
                if self.heartbeat_ms <= 0.0 {
                    return Err(OrderingError::InvalidConfig(
                        "heartbeat_ms must be positive".into(),
                    ));
                }
            }
            ConsensusKind::Kafka => {
                if self.ack_quorum == 0 || n < self.ack_quorum {
                    return Err(OrderingError::InvalidConfig(format!(
                        "kafka needs cluster_size >= ack_quorum >= 1, got {n} and {}",
                        self.ack_quorum
                    )));
                }
            }
        }
        self.net.validate().map_err(OrderingError::InvalidConfig)
    }
}

/// An ordered batch of transactions, ready for block assembly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutBatch {
    /// Monotone per service; identifies the batch across replicas.
    pub id: u64,
    pub txs: Vec<Transaction>,
    pub cut_time: SimTime,
}

/// Submission acknowledgment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubmitAck {
    Accepted,
    /// No elected leader right now; the caller should requeue and retry.
    NoLeader,
    /// Already accepted under the same id.
    Duplicate,
}

/// Replicated log entry (raft).
#[derive(Clone, Debug)]
pub struct LogEntry {
    pub term: u64,
    pub batch: CutBatch,
}

/// Consensus messages exchanged between cluster nodes.
#[derive(Clone, Debug)]
pub enum NetMsg {
    VoteRequest {
        from: usize,
        term: u64,
        last_log_len: usize,
        last_log_term: u64,
    },
    VoteReply {
        from: usize,
        term: u64,
        granted: bool,
    },
    Append {
        from: usize,
        term: u64,
        prev_len: usize,
        prev_term: u64,
        entries: Vec<LogEntry>,
        leader_commit: usize,
    },
    AppendReply {
        from: usize,
        term: u64,
        success: bool,
        match_len: usize,
    },
}

/// Events an ordering service schedules for itself.
#[derive(Clone, Debug)]
pub enum OrdererEvent {
    /// Batch-timeout deadline for the cutter; `epoch` guards staleness.
    BatchTimer { node: usize, epoch: u64 },
    /// Randomized election deadline (raft).
    ElectionTimer { node: usize, id: u64 },
    /// Periodic leader heartbeat (raft); valid only for the tagged term.
    HeartbeatTimer { node: usize, term: u64 },
    /// A consensus message arriving at `to`.
    Message { to: usize, msg: NetMsg },
    /// Broker confirmation for one replicated entry (kafka).
    KafkaConfirm { entry: usize, broker: usize },
    /// Re-replication sweep for unacknowledged entries (kafka).
    KafkaRetryTimer,
}

/// What a step of the service asks the surrounding loop to do.
#[derive(Debug, Default)]
pub struct StepOutput {
    /// Events to schedule, with absolute times.
    pub schedule: Vec<(SimTime, OrdererEvent)>,
    /// Batches whose position in the total order is now final, in order.
    pub delivered: Vec<CutBatch>,
}

impl StepOutput {
    pub fn merge(&mut self, mut other: StepOutput) {
        self.schedule.append(&mut other.schedule);
        self.delivered.append(&mut other.delivered);
    }
}

/// Node role, exposed for inspection and invariant checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Follower,
    Candidate,
    Leader,
}

/// Read-only view of one cluster node, for tests and diagnostics.
#[derive(Clone, Debug)]
pub struct NodeView {
    pub node: usize,
    pub alive: bool,
    pub role: Role,
    pub term: u64,
    /// `(term, batch id)` per log position.
    pub log: Vec<(u64, u64)>,
    /// Entries known committed at this node.
    pub commit: usize,
}

/// One line of the event trace: time, node, event kind, term.
#[derive(Clone, Debug)]
pub struct TraceEvent {
    pub time: SimTime,
    pub node: usize,
    pub kind: &'static str,
    pub term: u64,
}

impl std::fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:.3} node={} {} term={}",
            self.time.as_ms(),
            self.node,
            self.kind,
            self.term
        )
    }
}

/// The deterministic state-machine interface every ordering service exposes.
pub trait OrderingService {
    /// Arms initial timers. Must be called once before any other step.
    fn start(&mut self, now: SimTime) -> StepOutput;

    /// Offers a transaction for ordering.
    fn submit(&mut self, tx: Transaction, now: SimTime) -> (SubmitAck, StepOutput);

    /// Feeds back one previously scheduled event.
    fn handle(&mut self, event: OrdererEvent, now: SimTime) -> StepOutput;

    /// Crash-stops a node (test hook).
    fn crash(&mut self, node: usize, now: SimTime) -> StepOutput;

    /// Restarts a crashed node with its log intact (test hook).
    fn recover(&mut self, node: usize, now: SimTime) -> StepOutput;

    /// Current per-node state.
    fn inspect(&self) -> Vec<NodeView>;

    /// Drains the accumulated event trace.
    fn take_trace(&mut self) -> Vec<TraceEvent>;
}

/// Instantiates the configured service with its own derived random streams.
pub fn build_service(
    cfg: &OrdererConfig,
    seed: u64,
    trace_enabled: bool,
) -> Box<dyn OrderingService> {
    match cfg.service {
        ConsensusKind::Solo => Box::new(solo::SoloService::new(cfg, trace_enabled)),
        ConsensusKind::Raft => Box::new(raft::RaftService::new(cfg, seed, trace_enabled)),
        ConsensusKind::Kafka => Box::new(kafka::KafkaService::new(cfg, seed, trace_enabled)),
    }
}
