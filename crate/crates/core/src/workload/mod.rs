//! Benchmark workload: the two-phase scenario driving the whole pipeline.
//!
//! The opening phase allocates the registry equally across tenants and draws
//! each tenant's intent to free or seek resources. The transfer phase then
//! issues slice requests at a fixed rate, routing each through matchmaking,
//! contract simulation, ordering, and validation, while metrics record every
//! outcome.

pub mod config;
mod matchmaker;
mod scenario;

pub use config::{
    AdmissionPolicy, ConfigError, DemandConfig, ScenarioConfig, SolverKind, ENV_PREFIX,
};
pub use matchmaker::Matchmaker;
pub use scenario::{run_opening, run_scenario, OpenedChannel, RunOutput, ScenarioError};

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::contracts::{Counterparty, Direction, IntentSide, SliceRequest, TenantAccount};

/// Right-skewed demand law over a positive percentage interval: a
/// Beta(alpha, beta) draw scaled onto `[low_pct, high_pct]`.
#[derive(Clone, Debug)]
pub struct DemandDistribution {
    low_pct: f64,
    high_pct: f64,
    beta: Beta<f64>,
}

impl DemandDistribution {
    pub fn new(cfg: &DemandConfig) -> Self {
        DemandDistribution {
            low_pct: cfg.low_pct,
            high_pct: cfg.high_pct,
            beta: Beta::new(cfg.alpha, cfg.beta).expect("validated shape parameters"),
        }
    }

    /// One demand percentage in `[low_pct, high_pct]`.
    pub fn sample_pct<R: Rng>(&self, rng: &mut R) -> f64 {
        self.low_pct + self.beta.sample(rng) * (self.high_pct - self.low_pct)
    }
}

/// Draws one slice request for `account`: each resource share sampled
/// independently from the demand law, direction matching the tenant's intent
/// side, counterparty left open for the matchmaker.
pub fn generate_sr<R: Rng>(
    account: &TenantAccount,
    dist: &DemandDistribution,
    rng: &mut R,
) -> SliceRequest {
    SliceRequest {
        requester: account.tenant,
        counterparty: Counterparty::Open,
        radio_pct: dist.sample_pct(rng),
        transport_pct: dist.sample_pct(rng),
        cloud_pct: dist.sample_pct(rng),
        direction: match account.side {
            IntentSide::Free => Direction::Release,
            IntentSide::Seek => Direction::Acquire,
        },
    }
}

/// Equal allocation with exact remainders: tenant `t` receives
/// `floor(pool / n)` plus one extra unit when `t < pool % n`, so the shares
/// sum to the pool exactly.
pub fn equal_allocation(pool: u64, tenants: usize) -> Vec<u64> {
    let n = tenants as u64;
    let base = pool / n;
    let remainder = pool % n;
    (0..n).map(|t| base + u64::from(t < remainder)).collect()
}
