//! Optimistic concurrency validation and the committed chain.
//!
//! Contracts simulate against a committed snapshot and record the version of
//! every key they read. Validation replays a block's transactions in order
//! against live state: a transaction commits only if its signature verifies
//! and every recorded read version still equals the key's current version *at
//! the moment the transaction is processed* — including the effect of earlier
//! transactions in the same block, so a later transaction reading a key
//! written earlier in the block is stale. Committed writes are applied with
//! version `(block_height, tx_index)`; everything else applies nothing.

use crate::codec::Digest;
use crate::ledger::block::{hash_block, Block, Transaction, TxValidity};
use crate::ledger::keys::KeyStore;
use crate::ledger::state::{Version, WorldState};
use crate::ledger::LedgerError;
use crate::sim::SimTime;

/// Validates one block's worth of transactions against `state`, applying the
/// writes of the ones that commit.
///
/// `pre_flagged[i]` marks a transaction the contract layer already rejected
/// as a slice-request collision; it keeps that flag and applies nothing.
/// Precedence for the rest: bad signature, then stale read, then committed.
pub fn validate_and_commit(
    state: &mut WorldState,
    height: u64,
    transactions: &[Transaction],
    pre_flagged: &[bool],
    keys: &KeyStore,
) -> Vec<TxValidity> {
    debug_assert_eq!(transactions.len(), pre_flagged.len());
    let mut flags = Vec::with_capacity(transactions.len());
    for (index, tx) in transactions.iter().enumerate() {
        if pre_flagged.get(index).copied().unwrap_or(false) {
            flags.push(TxValidity::SrCollision);
            continue;
        }
        if !keys.verify(&tx.sender, &tx.signing_bytes(), &tx.signature) {
            flags.push(TxValidity::BadSignature);
            continue;
        }
        let stale = tx
            .read_set
            .iter()
            .any(|(key, version)| state.version_of(key) != Some(*version));
        if stale {
            flags.push(TxValidity::RwConflict);
            continue;
        }
        let version = Version::new(height, index as u32);
        for (key, value) in &tx.write_set {
            state.set(*key, *value, version);
        }
        flags.push(TxValidity::Committed);
    }
    flags
}

/// Summary of one committed block, for metrics.
#[derive(Clone, Debug)]
pub struct CommitSummary {
    pub height: u64,
    pub flags: Vec<TxValidity>,
    /// Canonical serialized size of the block.
    pub block_bytes: u64,
}

/// The single source of truth for one channel: hash-chained blocks plus the
/// world state they produce. All mutation flows through [`Ledger::commit`] on
/// one logical thread; snapshots of the state may be shared read-only.
#[derive(Clone, Debug)]
pub struct Ledger {
    channel: String,
    blocks: Vec<Block>,
    state: WorldState,
    total_bytes: u64,
}

impl Ledger {
    /// Builds and commits the genesis block from an already-signed registry
    /// initialization transaction. Its write set must create the registry
    /// pool entries; `capacities[i]` is the full capacity of type `i`.
    pub fn genesis(
        channel: &str,
        init_tx: Transaction,
        capacities: Vec<u64>,
        keys: &KeyStore,
    ) -> Result<Self, LedgerError> {
        let mut state = WorldState::new();
        let flags = validate_and_commit(
            &mut state,
            0,
            std::slice::from_ref(&init_tx),
            &[false],
            keys,
        );
        if flags != [TxValidity::Committed] {
            return Err(LedgerError::GenesisRejected);
        }
        state.set_capacity(capacities);
        let mut block = Block {
            height: 0,
            prev_hash: Digest::ZERO,
            transactions: vec![init_tx],
            validity: flags,
            cut_time: SimTime::ZERO,
            hash: Digest::ZERO,
        };
        block.hash = hash_block(&block);
        let total_bytes = block.canonical_len();
        Ok(Ledger {
            channel: channel.to_string(),
            blocks: vec![block],
            state,
            total_bytes,
        })
    }

    /// Validates and appends the next block. `cut_time` is when the ordering
    /// service cut the batch.
    pub fn commit(
        &mut self,
        transactions: Vec<Transaction>,
        pre_flagged: Vec<bool>,
        cut_time: SimTime,
        keys: &KeyStore,
    ) -> CommitSummary {
        let height = self.blocks.len() as u64;
        let flags = validate_and_commit(&mut self.state, height, &transactions, &pre_flagged, keys);
        let mut block = Block {
            height,
            prev_hash: self.blocks.last().map(|b| b.hash).unwrap_or(Digest::ZERO),
            transactions,
            validity: flags.clone(),
            cut_time,
            hash: Digest::ZERO,
        };
        block.hash = hash_block(&block);
        let block_bytes = block.canonical_len();
        self.total_bytes += block_bytes;
        self.blocks.push(block);
        CommitSummary {
            height,
            flags,
            block_bytes,
        }
    }

    pub fn channel(&self) -> &str {
        &self.channel
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn height(&self) -> u64 {
        self.blocks.len().saturating_sub(1) as u64
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Cumulative canonical serialized size of the whole chain.
    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }

    pub fn verify(&self) -> bool {
        super::block::verify_chain(&self.blocks)
    }
}

/// Replays a block stream from scratch, re-validating every transaction, and
/// returns the resulting world state. Used for idempotent-replay checks and
/// by chain-dump verification.
pub fn replay_chain(chain: &[Block], keys: &KeyStore) -> Result<WorldState, LedgerError> {
    let mut state = WorldState::new();
    for (position, block) in chain.iter().enumerate() {
        if block.height != position as u64 {
            return Err(LedgerError::HeightMismatch {
                expected: position as u64,
                got: block.height,
            });
        }
        let pre_flagged: Vec<bool> = block
            .validity
            .iter()
            .map(|v| *v == TxValidity::SrCollision)
            .collect();
        let flags = validate_and_commit(
            &mut state,
            block.height,
            &block.transactions,
            &pre_flagged,
            keys,
        );
        if flags != block.validity {
            return Err(LedgerError::ReplayDiverged {
                height: block.height,
            });
        }
        if block.height == 0 {
            // Capacities are whatever the genesis registry entries hold.
            let mut caps = Vec::new();
            for tx in &block.transactions {
                for (key, value) in &tx.write_set {
                    if let crate::ledger::state::StateKey::Registry { rtype } = key {
                        let rt = *rtype as usize;
                        if caps.len() <= rt {
                            caps.resize(rt + 1, 0);
                        }
                        caps[rt] = *value;
                    }
                }
            }
            state.set_capacity(caps);
        }
    }
    Ok(state)
}
