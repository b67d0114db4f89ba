//! Signing identities for consortium members.
//!
//! Peers admitted to a channel are assumed rational and non-malicious, so the
//! default scheme is a deterministic keyed digest: `sig = SHA256(secret ||
//! message)`, with a membership directory mapping each public id to its
//! verification secret. Swapping in a real asymmetric primitive only requires
//! replacing [`KeyStore::sign`] / [`KeyStore::verify`]; nothing else in the
//! ledger inspects signature internals.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{sha256, Encoder, DIGEST_LEN};
use crate::ledger::LedgerError;

/// Detached signature over the canonical encoding of a message.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; DIGEST_LEN]);

impl Signature {
    pub const ZERO: Signature = Signature([0u8; DIGEST_LEN]);

    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let bytes = hex::decode(s)?;
        let arr: [u8; DIGEST_LEN] = bytes
            .try_into()
            .map_err(|_| hex::FromHexError::InvalidStringLength)?;
        Ok(Signature(arr))
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Signature::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A member's credential: public identifier plus signing secret.
#[derive(Clone)]
pub struct KeyPair {
    pub public_id: String,
    secret: [u8; DIGEST_LEN],
}

impl KeyPair {
    pub fn sign(&self, message: &[u8]) -> Signature {
        let mut e = Encoder::new();
        e.put_bytes(&self.secret);
        e.put_bytes(message);
        Signature(sha256(&e.finish()).0)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Never print the secret.
        write!(f, "KeyPair({})", self.public_id)
    }
}

/// Membership directory for one deployment: every onboarded identity and its
/// verification material.
#[derive(Default, Clone)]
pub struct KeyStore {
    keys: BTreeMap<String, [u8; DIGEST_LEN]>,
}

impl KeyStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Onboards `name`, deriving its secret from the deployment seed.
    /// Distinct names yield distinct secrets and thus distinct identities.
    pub fn generate(&mut self, name: &str, deployment_seed: u64) -> KeyPair {
        let mut e = Encoder::new();
        e.put_str("member-secret");
        e.put_u64(deployment_seed);
        e.put_str(name);
        let secret = sha256(&e.finish()).0;
        self.keys.insert(name.to_string(), secret);
        KeyPair {
            public_id: name.to_string(),
            secret,
        }
    }

    pub fn contains(&self, public_id: &str) -> bool {
        self.keys.contains_key(public_id)
    }

    /// True iff `sig` was produced over `message` by the key registered under
    /// `public_id`. Unknown identities never verify.
    pub fn verify(&self, public_id: &str, message: &[u8], sig: &Signature) -> bool {
        match self.keys.get(public_id) {
            Some(secret) => {
                let mut e = Encoder::new();
                e.put_bytes(secret);
                e.put_bytes(message);
                Signature(sha256(&e.finish()).0) == *sig
            }
            None => false,
        }
    }

    /// Signs on behalf of `key`, refusing a sender/key mismatch.
    pub fn sign_as(
        &self,
        key: &KeyPair,
        claimed_sender: &str,
        message: &[u8],
    ) -> Result<Signature, LedgerError> {
        if key.public_id != claimed_sender {
            return Err(LedgerError::SenderKeyMismatch {
                sender: claimed_sender.to_string(),
                key: key.public_id.clone(),
            });
        }
        Ok(key.sign(message))
    }
}
