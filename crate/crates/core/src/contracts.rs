//! Built-in smart contracts, executed by simulation.
//!
//! A contract runs against an immutable snapshot of the world state and
//! returns the read set (keys with observed versions) and write set (keys
//! with new values) that a transaction will carry. It has no side effects
//! outside those sets, so any number of executions can run concurrently and
//! conflicts surface only later, at validation.
//!
//! Two tenant-facing contracts exist: `transfer` moves slice resources
//! between parties all-or-nothing, and `auction` assigns a resource set to
//! the highest bidder. `init` (registry creation) and `grant` (administrative
//! assignment from the pool) are system invocations used at channel setup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Encoder;
use crate::ledger::{StateKey, TenantId, Version, WorldState};
use crate::sim::SimTime;

/// Number of resource types in the slice model: radio access, transport,
/// core cloud.
pub const SLICE_TYPES: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContractError {
    #[error("unknown tenant {0}")]
    UnknownTenant(TenantId),
    #[error("registry capacity must be positive in every component")]
    NonPositiveCapacity,
    #[error("registry already initialized for this channel")]
    RegistryAlreadyInitialized,
    #[error("slice request has no open counterparty resolved")]
    UnresolvedCounterparty,
    #[error("seller does not hold the auctioned resource set")]
    SellerShort,
}

/// Why a slice request was rejected by the contract layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionReason {
    /// The giver does not hold enough of every demanded type.
    InsufficientAvailability,
    /// The receiver's remaining intent does not cover the amount.
    NoRemainingNeed,
}

/// Outcome of simulating a contract that can collide.
#[derive(Debug, PartialEq, Eq)]
pub enum TransferOutcome {
    Ok(SimulatedRw),
    Collision(CollisionReason),
}

/// Read and write sets produced by a successful simulation.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SimulatedRw {
    pub read_set: Vec<(StateKey, Version)>,
    pub write_set: Vec<(StateKey, u64)>,
    /// Units moved per resource type, for intent bookkeeping.
    pub moved: Vec<u64>,
}

/// Side a tenant took when drawing its intent at the opening phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentSide {
    /// Wants to release part of its allocation.
    Free,
    /// Wants to acquire beyond its allocation.
    Seek,
}

/// Per-tenant bookkeeping the contract layer consults for need checks.
/// Holdings live in the world state; this carries the off-chain intent.
#[derive(Clone, Debug)]
pub struct TenantAccount {
    pub tenant: TenantId,
    /// Initial opening allocation per type; the fixed base that request
    /// percentages refer to.
    pub initial: Vec<u64>,
    /// Remaining intent per type, decremented as transfers commit. A tenant
    /// whose remaining intent is exhausted stops issuing requests.
    pub remaining_intent: Vec<u64>,
    pub side: IntentSide,
}

impl TenantAccount {
    pub fn remaining_total(&self) -> u64 {
        self.remaining_intent.iter().sum()
    }
}

/// All tenant accounts of one channel, indexed by tenant id.
#[derive(Clone, Debug, Default)]
pub struct AccountBook {
    accounts: Vec<TenantAccount>,
}

impl AccountBook {
    pub fn new(accounts: Vec<TenantAccount>) -> Self {
        AccountBook { accounts }
    }

    pub fn get(&self, tenant: TenantId) -> Option<&TenantAccount> {
        self.accounts.get(tenant as usize)
    }

    pub fn get_mut(&mut self, tenant: TenantId) -> Option<&mut TenantAccount> {
        self.accounts.get_mut(tenant as usize)
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TenantAccount> {
        self.accounts.iter()
    }
}

/// Direction of a slice request from the requester's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Acquire,
    Release,
}

/// Counterparty of a slice request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Counterparty {
    /// Broadcast to the market; the matchmaker resolves it before execution.
    Open,
    Tenant(TenantId),
    /// The channel registry pool.
    Pool,
}

/// A tenant's demand for slice resources, as percentages of its initial
/// opening allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRequest {
    pub requester: TenantId,
    pub counterparty: Counterparty,
    /// Radio-access share, percent.
    pub radio_pct: f64,
    /// Transport share, percent.
    pub transport_pct: f64,
    /// Core-cloud share, percent.
    pub cloud_pct: f64,
    pub direction: Direction,
}

impl SliceRequest {
    pub fn percentages(&self) -> [f64; SLICE_TYPES] {
        [self.radio_pct, self.transport_pct, self.cloud_pct]
    }

    /// Demanded units per type: percentages applied to the requester's fixed
    /// initial allocation, rounded to the nearest micro-unit with a floor of
    /// one so a nonzero percentage never degenerates to nothing.
    pub fn demand_units(&self, initial: &[u64]) -> Vec<u64> {
        self.percentages()
            .iter()
            .zip(initial)
            .map(|(pct, base)| ((pct / 100.0) * *base as f64).round().max(1.0) as u64)
            .collect()
    }
}

/// General-form request: explicit per-type demands and prices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralRequest {
    pub requester: TenantId,
    /// Demanded units per resource type.
    pub demands: Vec<u64>,
    /// Offered price per resource type.
    pub prices: Vec<u64>,
}

impl GeneralRequest {
    /// Total revenue if the request is accommodated.
    pub fn revenue(&self) -> u64 {
        self.prices.iter().sum()
    }
}

/// Creates the genesis registry write set: one pool entry per resource type,
/// holding the full capacity.
pub fn init_registry(capacities: &[u64]) -> Result<Vec<(StateKey, u64)>, ContractError> {
    if capacities.is_empty() || capacities.contains(&0) {
        return Err(ContractError::NonPositiveCapacity);
    }
    Ok(capacities
        .iter()
        .enumerate()
        .map(|(rt, &c)| (StateKey::Registry { rtype: rt as u8 }, c))
        .collect())
}

fn party_keys(party: Counterparty, types: usize) -> Result<Vec<StateKey>, ContractError> {
    match party {
        Counterparty::Open => Err(ContractError::UnresolvedCounterparty),
        Counterparty::Tenant(t) => Ok((0..types)
            .map(|rt| StateKey::Holding {
                tenant: t,
                rtype: rt as u8,
            })
            .collect()),
        Counterparty::Pool => Ok((0..types)
            .map(|rt| StateKey::Registry { rtype: rt as u8 })
            .collect()),
    }
}

/// Simulates a slice transfer against `snapshot`.
///
/// The moved amounts are the request percentages applied to the requester's
/// initial allocation. The transfer is all-or-nothing: it succeeds only if
/// the giver holds enough of *every* demanded type and, when the receiver is
/// a tenant, its remaining intent covers every amount; otherwise the whole
/// request collides and nothing moves.
pub fn simulate_transfer(
    snapshot: &WorldState,
    book: &AccountBook,
    request: &SliceRequest,
) -> Result<TransferOutcome, ContractError> {
    let requester = book
        .get(request.requester)
        .ok_or(ContractError::UnknownTenant(request.requester))?;
    if let Counterparty::Tenant(t) = request.counterparty {
        if book.get(t).is_none() {
            return Err(ContractError::UnknownTenant(t));
        }
    }
    let amounts = request.demand_units(&requester.initial);

    let (giver, receiver) = match request.direction {
        Direction::Acquire => (
            request.counterparty,
            Counterparty::Tenant(request.requester),
        ),
        Direction::Release => (
            Counterparty::Tenant(request.requester),
            request.counterparty,
        ),
    };
    simulate_moved(snapshot, book, giver, receiver, &amounts)
}

/// Core of the transfer contract, shared with the batch-admission path:
/// moves `amounts[rt]` units of each type from `giver` to `receiver`.
pub fn simulate_moved(
    snapshot: &WorldState,
    book: &AccountBook,
    giver: Counterparty,
    receiver: Counterparty,
    amounts: &[u64],
) -> Result<TransferOutcome, ContractError> {
    let types = amounts.len();
    let giver_keys = party_keys(giver, types)?;
    let receiver_keys = party_keys(receiver, types)?;

    // Availability: the giver must hold every demanded amount.
    for (rt, key) in giver_keys.iter().enumerate() {
        if snapshot.value(key) < amounts[rt] {
            return Ok(TransferOutcome::Collision(
                CollisionReason::InsufficientAvailability,
            ));
        }
    }
    // Need: a tenant receiver must still want every demanded amount.
    if let Counterparty::Tenant(t) = receiver {
        let account = book.get(t).ok_or(ContractError::UnknownTenant(t))?;
        for (rt, &amount) in amounts.iter().enumerate() {
            if account.remaining_intent.get(rt).copied().unwrap_or(0) < amount {
                return Ok(TransferOutcome::Collision(CollisionReason::NoRemainingNeed));
            }
        }
    }

    let mut rw = SimulatedRw {
        moved: amounts.to_vec(),
        ..Default::default()
    };
    for (rt, &amount) in amounts.iter().enumerate() {
        if amount == 0 {
            continue;
        }
        let gk = giver_keys[rt];
        let rk = receiver_keys[rt];
        let g_entry = snapshot.get(&gk).expect("giver key checked above");
        rw.read_set.push((gk, g_entry.version));
        rw.write_set.push((gk, g_entry.value - amount));
        let r_version = snapshot.version_of(&rk).unwrap_or(Version::GENESIS);
        rw.read_set.push((rk, r_version));
        rw.write_set.push((rk, snapshot.value(&rk) + amount));
    }
    Ok(TransferOutcome::Ok(rw))
}

/// Administrative assignment from the registry pool to a tenant, used for the
/// opening allocation. Availability-checked against the pool; no intent is
/// involved.
pub fn simulate_grant(
    snapshot: &WorldState,
    tenant: TenantId,
    amounts: &[u64],
) -> Result<TransferOutcome, ContractError> {
    let types = amounts.len();
    let giver_keys = party_keys(Counterparty::Pool, types)?;
    for (rt, key) in giver_keys.iter().enumerate() {
        if snapshot.value(key) < amounts[rt] {
            return Ok(TransferOutcome::Collision(
                CollisionReason::InsufficientAvailability,
            ));
        }
    }
    let mut rw = SimulatedRw {
        moved: amounts.to_vec(),
        ..Default::default()
    };
    for rt in 0..types {
        if amounts[rt] == 0 {
            continue;
        }
        let gk = giver_keys[rt];
        let rk = StateKey::Holding {
            tenant,
            rtype: rt as u8,
        };
        let g_entry = snapshot.get(&gk).expect("pool key checked above");
        rw.read_set.push((gk, g_entry.version));
        rw.write_set.push((gk, g_entry.value - amounts[rt]));
        rw.write_set.push((rk, snapshot.value(&rk) + amounts[rt]));
    }
    Ok(TransferOutcome::Ok(rw))
}

/// A bid submitted to an auction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub peer: TenantId,
    pub value: u64,
    pub arrival: SimTime,
}

/// Auction of a resource set: collected bids and the closing time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionSpec {
    pub end_time: SimTime,
    pub resource_set: Vec<u64>,
    pub bids: Vec<Bid>,
}

/// Outcome of an auction run.
#[derive(Debug, PartialEq, Eq)]
pub enum AuctionOutcome {
    Won {
        winner: TenantId,
        rw: SimulatedRw,
    },
    /// No bid arrived before the end time; the seller keeps the resources.
    NoWinner,
}

/// Runs the auction contract: the winner is the bidder with the maximum
/// value among bids arriving at or before the end time. Ties go to the
/// earliest arrival, then to the lowest peer id, making the strict
/// first-seen-highest rule total.
pub fn run_auction(
    snapshot: &WorldState,
    seller: Counterparty,
    spec: &AuctionSpec,
) -> Result<AuctionOutcome, ContractError> {
    let winner = spec
        .bids
        .iter()
        .filter(|b| b.arrival <= spec.end_time)
        .min_by_key(|b| (std::cmp::Reverse(b.value), b.arrival, b.peer));
    let Some(winner) = winner else {
        return Ok(AuctionOutcome::NoWinner);
    };

    let types = spec.resource_set.len();
    let seller_keys = party_keys(seller, types)?;
    for (rt, key) in seller_keys.iter().enumerate() {
        if snapshot.value(key) < spec.resource_set[rt] {
            return Err(ContractError::SellerShort);
        }
    }
    let mut rw = SimulatedRw {
        moved: spec.resource_set.clone(),
        ..Default::default()
    };
    for (rt, &amount) in spec.resource_set.iter().enumerate() {
        if amount == 0 {
            continue;
        }
        let sk = seller_keys[rt];
        let wk = StateKey::Holding {
            tenant: winner.peer,
            rtype: rt as u8,
        };
        let s_entry = snapshot.get(&sk).expect("seller key checked above");
        rw.read_set.push((sk, s_entry.version));
        rw.write_set.push((sk, s_entry.value - amount));
        let w_version = snapshot.version_of(&wk).unwrap_or(Version::GENESIS);
        rw.read_set.push((wk, w_version));
        rw.write_set.push((wk, snapshot.value(&wk) + amount));
    }
    Ok(AuctionOutcome::Won {
        winner: winner.peer,
        rw,
    })
}

// -- payload encodings ------------------------------------------------------

/// Encodes transfer arguments for a transaction payload.
pub fn encode_transfer_args(
    giver: Counterparty,
    receiver: Counterparty,
    amounts: &[u64],
) -> Vec<u8> {
    let mut e = Encoder::new();
    encode_party(&mut e, giver);
    encode_party(&mut e, receiver);
    e.put_count(amounts.len());
    for a in amounts {
        e.put_u64(*a);
    }
    e.finish()
}

pub fn encode_grant_args(tenant: TenantId, amounts: &[u64]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.put_u32(tenant);
    e.put_count(amounts.len());
    for a in amounts {
        e.put_u64(*a);
    }
    e.finish()
}

pub fn encode_init_args(capacities: &[u64]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.put_count(capacities.len());
    for c in capacities {
        e.put_u64(*c);
    }
    e.finish()
}

fn encode_party(e: &mut Encoder, party: Counterparty) {
    match party {
        Counterparty::Open => e.put_u8(0),
        Counterparty::Tenant(t) => {
            e.put_u8(1);
            e.put_u32(t);
        }
        Counterparty::Pool => e.put_u8(2),
    }
}
