//! Run metrics: outcome counters, latency distribution, chain growth, and
//! the exported report.
//!
//! Counters are bucketed per second of the transfer phase. Every outcome is
//! attributed to the bucket its request was *submitted* in, so bucket sums
//! never exceed submissions and the partition
//! `submitted = committed + rw_conflict + sr_collision + bad_signature + in_flight`
//! holds exactly at the end of a run.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("transfer phase has zero duration")]
    ZeroDuration,
    #[error("need at least two growth samples in the transfer window")]
    NotEnoughSamples,
}

/// Final fate of a submitted slice request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Committed,
    RwConflict,
    SrCollision,
    BadSignature,
}

/// Per-second outcome counts, attributed to the submission bucket.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub submitted: u64,
    pub committed: u64,
    pub rw_conflict: u64,
    pub sr_collision: u64,
    pub bad_signature: u64,
}

impl BucketCounts {
    pub fn resolved(&self) -> u64 {
        self.committed + self.rw_conflict + self.sr_collision + self.bad_signature
    }
}

/// Outcome counters over the whole transfer phase.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OutcomeCounters {
    pub buckets: Vec<BucketCounts>,
}

impl OutcomeCounters {
    pub fn new(duration_secs: usize) -> Self {
        OutcomeCounters {
            buckets: vec![BucketCounts::default(); duration_secs.max(1)],
        }
    }

    fn bucket_mut(&mut self, bucket: usize) -> &mut BucketCounts {
        let idx = bucket.min(self.buckets.len() - 1);
        &mut self.buckets[idx]
    }

    pub fn record_submitted(&mut self, bucket: usize) {
        self.bucket_mut(bucket).submitted += 1;
    }

    pub fn record_outcome(&mut self, bucket: usize, outcome: Outcome) {
        let b = self.bucket_mut(bucket);
        match outcome {
            Outcome::Committed => b.committed += 1,
            Outcome::RwConflict => b.rw_conflict += 1,
            Outcome::SrCollision => b.sr_collision += 1,
            Outcome::BadSignature => b.bad_signature += 1,
        }
    }

    pub fn total(&self) -> BucketCounts {
        let mut total = BucketCounts::default();
        for b in &self.buckets {
            total.submitted += b.submitted;
            total.committed += b.committed;
            total.rw_conflict += b.rw_conflict;
            total.sr_collision += b.sr_collision;
            total.bad_signature += b.bad_signature;
        }
        total
    }

    /// Requests submitted but unresolved when the run ended.
    pub fn in_flight(&self) -> u64 {
        let t = self.total();
        t.submitted - t.resolved()
    }

    /// First second at which the cumulative collision share of submissions
    /// exceeds `threshold`, if it ever does.
    pub fn collision_rate_crossing(&self, threshold: f64) -> Option<u64> {
        let mut submitted = 0u64;
        let mut collided = 0u64;
        for (sec, b) in self.buckets.iter().enumerate() {
            submitted += b.submitted;
            collided += b.sr_collision;
            if submitted > 0 && collided as f64 / submitted as f64 > threshold {
                return Some(sec as u64);
            }
        }
        None
    }
}

/// End-to-end latency of one committed request.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LatencySample {
    pub tx_id: u64,
    pub submit_ms: f64,
    pub commit_ms: f64,
}

impl LatencySample {
    pub fn latency_ms(&self) -> f64 {
        self.commit_ms - self.submit_ms
    }
}

/// Cumulative chain size at one block commit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GrowthSample {
    pub time_ms: f64,
    pub cumulative_bytes: u64,
    pub cumulative_blocks: u64,
}

/// Empirical CDF points `(value, cumulative probability)`: sorted, monotone,
/// ending at probability 1.
pub fn compute_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(k, &v)| (v, (k + 1) as f64 / n))
        .collect())
}

/// Percentile with linear interpolation between closest ranks: rank
/// `h = (n - 1) p` interpolated between the surrounding order statistics.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Per-second committed counts plus the run average over the transfer phase.
pub fn throughput_series(
    counters: &OutcomeCounters,
    duration_secs: f64,
) -> Result<(Vec<(u64, u64)>, f64), MetricsError> {
    if duration_secs <= 0.0 {
        return Err(MetricsError::ZeroDuration);
    }
    let series = counters
        .buckets
        .iter()
        .enumerate()
        .map(|(sec, b)| (sec as u64, b.committed))
        .collect();
    let avg = counters.total().committed as f64 / duration_secs;
    Ok((series, avg))
}

/// Least-squares slope of cumulative bytes over time, restricted to samples
/// within `[window_start, window_end]`. Returns bytes per second.
pub fn growth_rate(
    samples: &[GrowthSample],
    window_start: SimTime,
    window_end: SimTime,
) -> Result<f64, MetricsError> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.time_ms >= window_start.as_ms() && s.time_ms <= window_end.as_ms())
        .map(|s| (s.time_ms / 1_000.0, s.cumulative_bytes as f64))
        .collect();
    if pts.len() < 2 {
        return Err(MetricsError::NotEnoughSamples);
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_b = pts.iter().map(|(_, b)| b).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, b) in &pts {
        cov += (t - mean_t) * (b - mean_b);
        var += (t - mean_t) * (t - mean_t);
    }
    if var == 0.0 {
        return Err(MetricsError::NotEnoughSamples);
    }
    Ok(cov / var)
}

/// Latency distribution summary.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: u64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
}

impl LatencySummary {
    pub fn from_samples(latencies_ms: &[f64]) -> Option<Self> {
        if latencies_ms.is_empty() {
            return None;
        }
        Some(LatencySummary {
            count: latencies_ms.len() as u64,
            mean_ms: latencies_ms.iter().sum::<f64>() / latencies_ms.len() as f64,
            p50_ms: percentile(latencies_ms, 0.50).unwrap(),
            p90_ms: percentile(latencies_ms, 0.90).unwrap(),
            p99_ms: percentile(latencies_ms, 0.99).unwrap(),
        })
    }
}

/// Complete result of one scenario run. Serializes deterministically: same
/// seed and config, byte-identical report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    /// Echo of the exact configuration, including the seed.
    pub config: serde_json::Value,
    pub transfer_start_ms: f64,
    pub transfer_duration_ms: f64,
    /// Request slots scheduled by the generator.
    pub scheduled_slots: u64,
    /// Slots skipped because no eligible tenant remained.
    pub skipped_slots: u64,
    pub submitted: u64,
    pub committed: u64,
    pub rw_conflict: u64,
    pub sr_collision: u64,
    pub bad_signature: u64,
    pub in_flight_at_end: u64,
    /// Committed requests per second of transfer time.
    pub committed_throughput_per_s: f64,
    /// All ordered transactions (committed or conflicted) per second.
    pub ordered_throughput_per_s: f64,
    pub latency: Option<LatencySummary>,
    pub growth_slope_bytes_per_s: Option<f64>,
    pub opening_blocks: u64,
    pub opening_bytes: u64,
    pub total_blocks: u64,
    pub total_bytes: u64,
    pub mean_block_bytes: f64,
    /// First second the cumulative collision rate exceeded 10 percent.
    pub collision_crossing_10pct_s: Option<u64>,
    pub per_second: Vec<BucketCounts>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub latency_cdf: Vec<(f64, f64)>,
    #[serde(skip)]
    pub growth_samples: Vec<GrowthSample>,
}

/// Report export format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Writes the report artifacts into `dir`:
/// `summary.json`, `throughput.csv`, `latency_cdf.csv`, `growth.csv`.
/// Returns the paths written.
pub fn export_report(
    report: &RunReport,
    dir: &Path,
    formats: &[ExportFormat],
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    if formats.contains(&ExportFormat::Json) {
        let path = dir.join("summary.json");
        let mut f = std::fs::File::create(&path)?;
        let json = serde_json::to_string_pretty(report).expect("report serializes");
        f.write_all(json.as_bytes())?;
        f.write_all(b"\n")?;
        written.push(path);
    }

    if formats.contains(&ExportFormat::Csv) {
        let path = dir.join("throughput.csv");
        let mut f = std::fs::File::create(&path)?;
        writeln!(f, "t_s,committed,rw_conflict,sr_collision")?;
        for (sec, b) in report.per_second.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{}",
                sec, b.committed, b.rw_conflict, b.sr_collision
            )?;
        }
        written.push(path);

        let path = dir.join("latency_cdf.csv");
        let mut f = std::fs::File::create(&path)?;
        writeln!(f, "latency_ms,cum_prob")?;
        for (latency, prob) in &report.latency_cdf {
            writeln!(f, "{latency},{prob}")?;
        }
        written.push(path);

        let path = dir.join("growth.csv");
        let mut f = std::fs::File::create(&path)?;
        writeln!(f, "t_ms,bytes,blocks")?;
        for s in &report.growth_samples {
            writeln!(
                f,
                "{},{},{}",
                s.time_ms, s.cumulative_bytes, s.cumulative_blocks
            )?;
        }
        written.push(path);
    }

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_interpolated_median() {
        // Hand computation with rank interpolation: h = 3 * 0.5 = 1.5, so the
        // median of [1,2,3,4] is 2 + 0.5 * (3 - 2) = 2.5.
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
    }

    #[test]
    fn cdf_of_constant_samples_steps_to_one() {
        let cdf = compute_cdf(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(cdf.last().unwrap(), &(5.0, 1.0));
        assert!(cdf.iter().all(|&(v, _)| v == 5.0));
        let probs: Vec<f64> = cdf.iter().map(|&(_, p)| p).collect();
        assert!(probs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_sample_percentiles_collapse() {
        assert_eq!(percentile(&[7.0], 0.0).unwrap(), 7.0);
        assert_eq!(percentile(&[7.0], 1.0).unwrap(), 7.0);
        assert_eq!(compute_cdf(&[7.0]).unwrap(), vec![(7.0, 1.0)]);
    }

    #[test]
    fn empty_samples_are_an_explicit_error() {
        assert_eq!(compute_cdf(&[]).unwrap_err(), MetricsError::Empty);
        assert_eq!(percentile(&[], 0.5).unwrap_err(), MetricsError::Empty);
    }

    #[test]
    fn throughput_average() {
        let mut counters = OutcomeCounters::new(10);
        for i in 0..500u64 {
            let bucket = (i % 10) as usize;
            counters.record_submitted(bucket);
            counters.record_outcome(bucket, Outcome::Committed);
        }
        let (series, avg) = throughput_series(&counters, 10.0).unwrap();
        assert_eq!(avg, 50.0);
        assert_eq!(series.iter().map(|&(_, c)| c).sum::<u64>(), 500);
        assert!(throughput_series(&counters, 0.0).is_err());
    }

    #[test]
    fn growth_slope_of_constructed_series() {
        // Perfectly linear growth: 100 bytes per block, one block every
        // 200 ms, so 500 bytes/s.
        let samples: Vec<GrowthSample> = (1..=20)
            .map(|k| GrowthSample {
                time_ms: 200.0 * k as f64,
                cumulative_bytes: 100 * k,
                cumulative_blocks: k,
            })
            .collect();
        let slope = growth_rate(&samples, SimTime::ZERO, SimTime::from_secs(10.0)).unwrap();
        assert!((slope - 500.0).abs() < 1e-9);

        // Flat series: slope 0.
        let flat: Vec<GrowthSample> = (1..=5)
            .map(|k| GrowthSample {
                time_ms: 100.0 * k as f64,
                cumulative_bytes: 777,
                cumulative_blocks: 1,
            })
            .collect();
        assert_eq!(
            growth_rate(&flat, SimTime::ZERO, SimTime::from_secs(10.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn growth_windowing_excludes_pre_transfer_samples() {
        // A large pre-transfer jump must not contaminate the slope.
        let mut samples = vec![GrowthSample {
            time_ms: 0.0,
            cumulative_bytes: 1_000_000,
            cumulative_blocks: 50,
        }];
        for k in 1..=10 {
            samples.push(GrowthSample {
                time_ms: 1_000.0 + 100.0 * k as f64,
                cumulative_bytes: 1_000_000 + 10 * k,
                cumulative_blocks: 50 + k,
            });
        }
        let slope = growth_rate(
            &samples,
            SimTime::from_ms(1_000.0),
            SimTime::from_secs(10.0),
        )
        .unwrap();
        assert!((slope - 100.0).abs() < 1e-6);
        assert!(growth_rate(&samples[..1], SimTime::ZERO, SimTime::from_secs(1.0)).is_err());
    }

    #[test]
    fn outcome_partition_is_exact() {
        let mut counters = OutcomeCounters::new(3);
        for i in 0..100u64 {
            counters.record_submitted((i % 3) as usize);
        }
        for i in 0..40u64 {
            counters.record_outcome((i % 3) as usize, Outcome::Committed);
        }
        for i in 0..25u64 {
            counters.record_outcome((i % 3) as usize, Outcome::RwConflict);
        }
        for i in 0..20u64 {
            counters.record_outcome((i % 3) as usize, Outcome::SrCollision);
        }
        let t = counters.total();
        assert_eq!(t.submitted, 100);
        assert_eq!(counters.in_flight(), 100 - 40 - 25 - 20);
    }

    #[test]
    fn collision_crossing_detection() {
        let mut counters = OutcomeCounters::new(5);
        // 10 submissions per second; collisions ramp up in second 3.
        for sec in 0..5 {
            for _ in 0..10 {
                counters.record_submitted(sec);
            }
        }
        for _ in 0..9 {
            counters.record_outcome(3, Outcome::SrCollision);
        }
        assert_eq!(counters.collision_rate_crossing(0.10), Some(3));
        assert_eq!(counters.collision_rate_crossing(0.50), None);
    }
}
