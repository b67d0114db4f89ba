//! Intra-cluster network model: sampled message latency plus lossy delivery.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Triangular};
use serde::{Deserialize, Serialize};

use crate::sim::{derive_rng, SimTime};

/// Link parameters. Latencies follow a triangular distribution, bounded and
/// right-skewed with the defaults; drops are independent per message.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub latency_min_ms: f64,
    pub latency_mode_ms: f64,
    pub latency_max_ms: f64,
    pub drop_probability: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            latency_min_ms: 1.0,
            latency_mode_ms: 3.0,
            latency_max_ms: 10.0,
            drop_probability: 0.0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.latency_min_ms < 0.0 {
            return Err("latency_min_ms must be >= 0".into());
        }
        if !(self.latency_min_ms <= self.latency_mode_ms
            && self.latency_mode_ms <= self.latency_max_ms)
        {
            return Err("latency parameters must satisfy min <= mode <= max".into());
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err("drop_probability must be within [0, 1]".into());
        }
        Ok(())
    }

    /// Smallest possible round trip under this model: two one-way minima.
    pub fn min_round_trip(&self) -> SimTime {
        SimTime::from_ms(2.0 * self.latency_min_ms)
    }
}

/// Seeded sampler over a [`NetworkConfig`].
pub struct NetworkModel {
    cfg: NetworkConfig,
    latency: Option<Triangular<f64>>,
    rng: ChaCha20Rng,
}

impl NetworkModel {
    pub fn new(cfg: NetworkConfig, seed: u64) -> Self {
        let latency = if cfg.latency_max_ms > cfg.latency_min_ms {
            Some(
                Triangular::new(cfg.latency_min_ms, cfg.latency_max_ms, cfg.latency_mode_ms)
                    .expect("validated triangular parameters"),
            )
        } else {
            None // degenerate: constant latency
        };
        NetworkModel {
            cfg,
            latency,
            rng: derive_rng(seed, "network"),
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    /// One-way delay for the next message.
    pub fn sample_latency(&mut self) -> SimTime {
        match &self.latency {
            Some(tri) => SimTime::from_ms(tri.sample(&mut self.rng)),
            None => SimTime::from_ms(self.cfg.latency_min_ms),
        }
    }

    /// Whether the next message is lost in transit. Lost messages are gone;
    /// recovery is up to the protocol.
    pub fn dropped(&mut self) -> bool {
        self.cfg.drop_probability > 0.0 && self.rng.gen::<f64>() < self.cfg.drop_probability
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_stays_in_bounds_and_is_seed_deterministic() {
        let cfg = NetworkConfig::default();
        let mut a = NetworkModel::new(cfg, 5);
        let mut b = NetworkModel::new(cfg, 5);
        for _ in 0..1000 {
            let la = a.sample_latency();
            assert_eq!(la, b.sample_latency());
            assert!(la >= SimTime::from_ms(cfg.latency_min_ms));
            assert!(la <= SimTime::from_ms(cfg.latency_max_ms));
        }
    }

    #[test]
    fn degenerate_distribution_is_constant() {
        let cfg = NetworkConfig {
            latency_min_ms: 2.0,
            latency_mode_ms: 2.0,
            latency_max_ms: 2.0,
            drop_probability: 0.0,
        };
        let mut m = NetworkModel::new(cfg, 1);
        assert_eq!(m.sample_latency(), SimTime::from_ms(2.0));
        assert!(!m.dropped());
    }

    #[test]
    fn drop_rate_matches_probability_roughly() {
        let cfg = NetworkConfig {
            drop_probability: 0.2,
            ..NetworkConfig::default()
        };
        let mut m = NetworkModel::new(cfg, 9);
        let drops = (0..10_000).filter(|_| m.dropped()).count();
        assert!((1_500..2_500).contains(&drops), "drops={drops}");
    }
}
