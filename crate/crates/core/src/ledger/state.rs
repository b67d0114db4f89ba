//! Versioned world state: the committed view of who holds what.
//!
//! Keys are either a tenant's holding of one resource type or the channel
//! registry's unassigned pool for that type. Values are integer micro-units
//! (one micro-unit = 10^-4 percent of the registry capacity), so conservation
//! can be checked with exact integer arithmetic. Every entry carries the
//! version `(block_height, tx_index)` of the transaction that last wrote it;
//! that version is what optimistic concurrency control validates against.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec::Encoder;

/// Identifier of a tenant within one channel.
pub type TenantId = u32;

/// Index of a resource type (0 = radio access, 1 = transport, 2 = core cloud
/// in the three-type slice model; general instances may use more).
pub type ResourceType = u8;

/// Addressable cell of the world state.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum StateKey {
    /// The channel registry's unassigned pool for one resource type.
    Registry { rtype: ResourceType },
    /// One tenant's holding of one resource type.
    Holding {
        tenant: TenantId,
        rtype: ResourceType,
    },
}

impl StateKey {
    pub fn encode(&self, e: &mut Encoder) {
        match self {
            StateKey::Registry { rtype } => {
                e.put_u8(0);
                e.put_u8(*rtype);
            }
            StateKey::Holding { tenant, rtype } => {
                e.put_u8(1);
                e.put_u32(*tenant);
                e.put_u8(*rtype);
            }
        }
    }

    pub fn rtype(&self) -> ResourceType {
        match self {
            StateKey::Registry { rtype } => *rtype,
            StateKey::Holding { rtype, .. } => *rtype,
        }
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateKey::Registry { rtype } => write!(f, "registry/{rtype}"),
            StateKey::Holding { tenant, rtype } => write!(f, "tenant/{tenant}/{rtype}"),
        }
    }
}

impl FromStr for StateKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        match parts.as_slice() {
            ["registry", rt] => Ok(StateKey::Registry {
                rtype: rt.parse().map_err(|e| format!("bad rtype: {e}"))?,
            }),
            ["tenant", t, rt] => Ok(StateKey::Holding {
                tenant: t.parse().map_err(|e| format!("bad tenant: {e}"))?,
                rtype: rt.parse().map_err(|e| format!("bad rtype: {e}"))?,
            }),
            _ => Err(format!("unrecognized state key {s:?}")),
        }
    }
}

impl Serialize for StateKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StateKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Write version of a state entry. Totally ordered lexicographically;
/// `(0, 0)` is reserved for genesis-initialized keys.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize,
)]
pub struct Version {
    pub height: u64,
    pub index: u32,
}

impl Version {
    pub const GENESIS: Version = Version {
        height: 0,
        index: 0,
    };

    pub fn new(height: u64, index: u32) -> Self {
        Version { height, index }
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.put_u64(self.height);
        e.put_u32(self.index);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateEntry {
    pub value: u64,
    pub version: Version,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error(
    "conservation violated for resource type {rtype}: tenants {tenant_total} + pool {pool} != capacity {capacity}"
)]
pub struct ConservationViolation {
    pub rtype: ResourceType,
    pub tenant_total: u64,
    pub pool: u64,
    pub capacity: u64,
}

/// The committed key-value view of one channel.
#[derive(Clone, Debug, Default)]
pub struct WorldState {
    entries: BTreeMap<StateKey, StateEntry>,
    /// Per-type total capacity, fixed at registry initialization. Empty until
    /// genesis commits.
    capacity: Vec<u64>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &StateKey) -> Option<StateEntry> {
        self.entries.get(key).copied()
    }

    pub fn value(&self, key: &StateKey) -> u64 {
        self.entries.get(key).map(|e| e.value).unwrap_or(0)
    }

    pub fn version_of(&self, key: &StateKey) -> Option<Version> {
        self.entries.get(key).map(|e| e.version)
    }

    pub fn set(&mut self, key: StateKey, value: u64, version: Version) {
        self.entries.insert(key, StateEntry { value, version });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateKey, &StateEntry)> {
        self.entries.iter()
    }

    /// Registers the per-type capacities. Called once when the registry
    /// initialization commits.
    pub fn set_capacity(&mut self, capacity: Vec<u64>) {
        self.capacity = capacity;
    }

    pub fn capacity(&self) -> &[u64] {
        &self.capacity
    }

    /// Exact conservation check: for every resource type, tenant holdings
    /// plus the unassigned pool must equal the registered capacity. Vacuously
    /// true before the registry is initialized.
    pub fn check_conservation(&self) -> Result<(), ConservationViolation> {
        if self.capacity.is_empty() {
            return Ok(());
        }
        let types = self.capacity.len();
        let mut tenant_total = vec![0u64; types];
        let mut pool = vec![0u64; types];
        for (key, entry) in &self.entries {
            let rt = key.rtype() as usize;
            if rt >= types {
                continue;
            }
            match key {
                StateKey::Registry { .. } => pool[rt] += entry.value,
                StateKey::Holding { .. } => tenant_total[rt] += entry.value,
            }
        }
        for rt in 0..types {
            if tenant_total[rt] + pool[rt] != self.capacity[rt] {
                return Err(ConservationViolation {
                    rtype: rt as ResourceType,
                    tenant_total: tenant_total[rt],
                    pool: pool[rt],
                    capacity: self.capacity[rt],
                });
            }
        }
        Ok(())
    }

    /// Snapshot of `(key, value, version)` triples, for oracle comparisons.
    pub fn dump_entries(&self) -> Vec<(StateKey, u64, Version)> {
        self.entries
            .iter()
            .map(|(k, e)| (*k, e.value, e.version))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_order_is_lexicographic() {
        assert!(Version::new(1, 5) < Version::new(2, 0));
        assert!(Version::new(2, 0) < Version::new(2, 1));
        assert_eq!(Version::GENESIS, Version::new(0, 0));
    }

    #[test]
    fn state_key_string_round_trip() {
        for key in [
            StateKey::Registry { rtype: 2 },
            StateKey::Holding {
                tenant: 17,
                rtype: 0,
            },
        ] {
            let s = key.to_string();
            assert_eq!(s.parse::<StateKey>().unwrap(), key);
        }
        assert!("pool/1".parse::<StateKey>().is_err());
    }

    #[test]
    fn conservation_detects_leak() {
        let mut st = WorldState::new();
        st.set_capacity(vec![100]);
        st.set(StateKey::Registry { rtype: 0 }, 60, Version::GENESIS);
        st.set(
            StateKey::Holding {
                tenant: 0,
                rtype: 0,
            },
            40,
            Version::GENESIS,
        );
        assert!(st.check_conservation().is_ok());
        st.set(
            StateKey::Holding {
                tenant: 0,
                rtype: 0,
            },
            41,
            Version::new(1, 0),
        );
        assert!(st.check_conservation().is_err());
    }
}
