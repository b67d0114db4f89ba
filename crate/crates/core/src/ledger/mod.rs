//! Hash-chained block store with a versioned world state.
//!
//! This module is the committed side of the pipeline: blocks arrive from the
//! ordering layer already cut, are validated transaction-by-transaction under
//! optimistic concurrency control (see [`validate_and_commit`]), and extend
//! an append-only hash chain whose prev-hash links make any post-hoc mutation
//! detectable.

mod block;
mod dump;
mod keys;
mod state;
mod validate;

pub use block::{
    hash_block, verify_chain, verify_chain_detailed, Block, ChainDefect, Payload, Transaction,
    TxValidity,
};
pub use dump::{
    read_chain_dump, verify_dumped_chain, write_chain_dump, ChainVerifyError, DumpError,
    VerifySummary,
};
pub use keys::{KeyPair, KeyStore, Signature};
pub use state::{
    ConservationViolation, ResourceType, StateEntry, StateKey, TenantId, Version, WorldState,
};
pub use validate::{replay_chain, validate_and_commit, CommitSummary, Ledger};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("transaction sender {sender:?} does not match signing key {key:?}")]
    SenderKeyMismatch { sender: String, key: String },
    #[error("genesis transaction failed validation")]
    GenesisRejected,
    #[error("block height {got} does not extend chain at height {expected}")]
    HeightMismatch { expected: u64, got: u64 },
    #[error("replay diverged from recorded validity at height {height}")]
    ReplayDiverged { height: u64 },
}

/// Signs `tx` with `key`, filling in the signature field. Fails if the
/// transaction claims a different sender than the key's identity.
pub fn sign_transaction(mut tx: Transaction, key: &KeyPair) -> Result<Transaction, LedgerError> {
    if tx.sender != key.public_id {
        return Err(LedgerError::SenderKeyMismatch {
            sender: tx.sender,
            key: key.public_id.clone(),
        });
    }
    tx.signature = key.sign(&tx.signing_bytes());
    Ok(tx)
}

/// Verifies `tx`'s signature against the membership directory.
pub fn verify_signature(tx: &Transaction, keys: &KeyStore) -> bool {
    keys.verify(&tx.sender, &tx.signing_bytes(), &tx.signature)
}
