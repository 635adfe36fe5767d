//! Discrete-event model of the kernel audit backlog.
//!
//! Events enter a bounded queue at their arrival times. A consumer wakes
//! every `drain_period_ns` (plus seeded uniform jitter) and removes up to
//! `drain_burst` events. Arrivals to a full queue are lost. Each event
//! occupies one slot regardless of its size.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit_record::AuditRecord;

/// Backlog limit used in the case-study setup.
pub const DEFAULT_CAPACITY: u64 = 50_000;
/// Stock kernel backlog limit.
pub const KERNEL_DEFAULT_CAPACITY: u64 = 8192;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("drain_burst must be at least 1")]
    ZeroBurst,
    #[error("drain_period_ns must be at least 1")]
    ZeroPeriod,
}

/// Consumer side of the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrainParams {
    pub drain_period_ns: u64,
    pub drain_burst: u64,
    #[serde(default)]
    pub drain_jitter_ns: u64,
    #[serde(default)]
    pub seed: u64,
}

impl DrainParams {
    /// Events per second the consumer can remove when busy.
    pub fn throughput_per_s(&self) -> f64 {
        self.drain_burst as f64 * 1e9 / self.drain_period_ns as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferConfig {
    pub capacity: u64,
    #[serde(flatten)]
    pub drain: DrainParams,
}

impl BufferConfig {
    pub fn new(capacity: u64, drain_period_ns: u64, drain_burst: u64) -> Self {
        BufferConfig {
            capacity,
            drain: DrainParams {
                drain_period_ns,
                drain_burst,
                drain_jitter_ns: 0,
                seed: 0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.capacity == 0 {
            return Err(ConfigError::ZeroCapacity);
        }
        if self.drain.drain_burst == 0 {
            return Err(ConfigError::ZeroBurst);
        }
        if self.drain.drain_period_ns == 0 {
            return Err(ConfigError::ZeroPeriod);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimResult {
    pub offered: u64,
    pub delivered: u64,
    pub lost_events: u64,
    pub max_occupancy: u64,
    /// Drain ticks simulated up to the last arrival.
    pub drain_ticks: u64,
    #[serde(skip)]
    pub occupancy_samples: Vec<(u64, u64)>,
}

impl SimResult {
    pub fn max_utilization(&self, capacity: u64) -> f64 {
        self.max_occupancy as f64 / capacity as f64
    }
}

struct Ticks {
    rng: ChaCha8Rng,
    origin: u64,
    k: u64,
    period: u64,
    jitter: u64,
    last: u64,
}

impl Ticks {
    fn new(origin: u64, d: &DrainParams) -> Self {
        Ticks {
            rng: ChaCha8Rng::seed_from_u64(d.seed),
            origin,
            k: 0,
            period: d.drain_period_ns,
            jitter: d.drain_jitter_ns,
            last: origin,
        }
    }

    fn next(&mut self) -> u64 {
        self.k += 1;
        let j = if self.jitter == 0 {
            0
        } else {
            self.rng.gen_range(0..=self.jitter)
        };
        let t = self
            .origin
            .saturating_add(self.k.saturating_mul(self.period))
            .saturating_add(j)
            .max(self.last);
        self.last = t;
        t
    }
}

/// Run the queue over time-sorted arrival times. Occupancy is sampled
/// every `sample_period_ns` from the first arrival up to the last one
/// (0 disables sampling). At equal times a drain runs before arrivals and
/// a sample is taken after both.
pub fn simulate(arrivals: &[u64], cfg: &BufferConfig, sample_period_ns: u64) -> SimResult {
    let mut res = SimResult {
        offered: arrivals.len() as u64,
        delivered: 0,
        lost_events: 0,
        max_occupancy: 0,
        drain_ticks: 0,
        occupancy_samples: Vec::new(),
    };
    let (Some(&first), Some(&last)) = (arrivals.first(), arrivals.last()) else {
        return res;
    };
    debug_assert!(arrivals.windows(2).all(|w| w[0] <= w[1]));
    let mut ticks = Ticks::new(first, &cfg.drain);
    let mut next_tick = ticks.next();
    let mut next_sample = (sample_period_ns > 0).then_some(first);
    let mut occ: u64 = 0;

    let mut drain_until = |t: u64, occ: &mut u64, res: &mut SimResult, next_tick: &mut u64| {
        while *next_tick <= t {
            let out = (*occ).min(cfg.drain.drain_burst);
            *occ -= out;
            res.delivered += out;
            res.drain_ticks += 1;
            *next_tick = ticks.next();
        }
    };

    let mut i = 0;
    while i < arrivals.len() {
        let t = arrivals[i];
        // samples strictly before this arrival time
        while let Some(s) = next_sample.filter(|&s| s < t) {
            drain_until(s, &mut occ, &mut res, &mut next_tick);
            res.occupancy_samples.push((s, occ));
            next_sample = Some(s + sample_period_ns);
        }
        drain_until(t, &mut occ, &mut res, &mut next_tick);
        while i < arrivals.len() && arrivals[i] == t {
            if occ >= cfg.capacity {
                res.lost_events += 1;
            } else {
                occ += 1;
                res.max_occupancy = res.max_occupancy.max(occ);
            }
            i += 1;
        }
    }
    while let Some(s) = next_sample.filter(|&s| s <= last) {
        drain_until(s, &mut occ, &mut res, &mut next_tick);
        res.occupancy_samples.push((s, occ));
        next_sample = Some(s + sample_period_ns);
    }
    // whatever is still queued is delivered eventually
    res.delivered += occ;
    res
}

/// Smallest capacity with no loss under the given consumer. Empty input
/// needs 1.
pub fn min_capacity_for_lossless(arrivals: &[u64], drain: &DrainParams) -> u64 {
    let lossless = |cap: u64| {
        let cfg = BufferConfig {
            capacity: cap,
            drain: *drain,
        };
        simulate(arrivals, &cfg, 0).lost_events == 0
    };
    if lossless(1) {
        return 1;
    }
    // capacity = offered count can never lose
    let upper = (arrivals.len() as u64).max(1);
    let mut lo = 1; // known lossy
    let mut hi = 2.min(upper);
    while hi < upper && !lossless(hi) {
        lo = hi;
        hi = (hi * 2).min(upper);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if lossless(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Arrival times of a record stream (emission time for template records).
pub fn arrivals_from_records<'a>(records: impl IntoIterator<Item = &'a AuditRecord>) -> Vec<u64> {
    let mut v: Vec<u64> = records.into_iter().map(AuditRecord::time_ns).collect();
    v.sort_unstable();
    v
}

/// Occupancy samples as `t_ns,occupancy` lines with a header.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[(u64, u64)]) -> io::Result<()> {
    writeln!(w, "t_ns,occupancy")?;
    for (t, o) in samples {
        writeln!(w, "{t},{o}")?;
    }
    Ok(())
}
