use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::EngineBundle;
use crate::error::{CliError, Result};

/// Nearest-rank percentile of an ascending sample: the value at rank
/// `ceil(p / 100 * n)`.
pub fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Percentiles in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
}

impl Percentiles {
    /// From raw nanosecond samples in any order.
    pub fn from_nanos(samples: &[u64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_unstable();
        let us = |p| nearest_rank(&s, p) as f64 / 1000.0;
        Percentiles {
            p50_us: us(50.0),
            p95_us: us(95.0),
            p99_us: us(99.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hardware {
    pub logical_cpus: usize,
    pub os: String,
    pub arch: String,
    pub cpu_model: Option<String>,
}

impl Hardware {
    pub fn detect() -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        });
        Hardware {
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpu_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub retrieval: Percentiles,
    pub rerank: Percentiles,
    pub end_to_end: Percentiles,
    pub throughput_qps: f64,
    /// Queries issued, warmup included.
    pub queries: usize,
    pub warmup: usize,
    pub concurrency: usize,
    pub hardware: Hardware,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sample {
    pub retrieval_ns: u64,
    pub rerank_ns: u64,
    pub total_ns: u64,
}

/// One query through both stages, timed.
pub fn timed_query(bundle: &EngineBundle, author: &str, k: usize, alpha: f64) -> Result<Sample> {
    let t0 = Instant::now();
    let pool = bundle.candidates(author)?;
    let t1 = Instant::now();
    let recs = bundle.recommender().rerank(author, &pool, alpha, k)?;
    let t2 = Instant::now();
    std::hint::black_box(recs);
    Ok(Sample {
        retrieval_ns: (t1 - t0).as_nanos() as u64,
        rerank_ns: (t2 - t1).as_nanos() as u64,
        total_ns: (t2 - t0).as_nanos() as u64,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchOptions {
    pub queries: usize,
    pub warmup: usize,
    pub concurrency: usize,
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
}

pub fn summarize(samples: &[Sample], wall: Duration, opts: &BenchOptions) -> LatencyReport {
    let col = |f: fn(&Sample) -> u64| samples.iter().map(f).collect::<Vec<_>>();
    LatencyReport {
        retrieval: Percentiles::from_nanos(&col(|s| s.retrieval_ns)),
        rerank: Percentiles::from_nanos(&col(|s| s.rerank_ns)),
        end_to_end: Percentiles::from_nanos(&col(|s| s.total_ns)),
        throughput_qps: samples.len() as f64 / wall.as_secs_f64().max(1e-9),
        queries: opts.queries,
        warmup: opts.warmup,
        concurrency: opts.concurrency,
        hardware: Hardware::detect(),
    }
}

/// Replays cold queries (sampled with replacement) through the in-process
/// recommend path. The first `warmup` queries run but are not measured.
pub fn bench(bundle: &EngineBundle, opts: &BenchOptions) -> Result<LatencyReport> {
    if opts.queries <= opts.warmup {
        return Err(CliError::Usage(format!(
            "queries ({}) must exceed warmup ({})",
            opts.queries, opts.warmup
        )));
    }
    if opts.concurrency == 0 {
        return Err(CliError::Usage("concurrency must be at least 1".into()));
    }
    let pool: Vec<&str> = bundle.split().cold_queries().iter().map(String::as_str).collect();
    if pool.is_empty() {
        return Err(coldrec::Error::Empty("cold query set".into()).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let seq: Vec<&str> = (0..opts.queries).map(|_| pool[rng.random_range(0..pool.len())]).collect();
    let (warm, measured) = seq.split_at(opts.warmup);
    for q in warm {
        timed_query(bundle, q, opts.k, opts.alpha)?;
    }

    let start = Instant::now();
    let chunk = measured.len().div_ceil(opts.concurrency);
    let parts: Vec<Result<Vec<Sample>>> = std::thread::scope(|s| {
        let handles: Vec<_> = measured
            .chunks(chunk)
            .map(|qs| s.spawn(move || qs.iter().map(|q| timed_query(bundle, q, opts.k, opts.alpha)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
    });
    let wall = start.elapsed();
    let mut samples = Vec::with_capacity(measured.len());
    for p in parts {
        samples.extend(p?);
    }
    Ok(summarize(&samples, wall, opts))
}

const SUB: u64 = 64;
const BUCKETS: usize = 64 + 58 * 64;

/// Log-linear histogram of nanosecond values, 64 sub-buckets per power of
/// two (under 1.6% relative error). Updates and reads are atomic and never
/// block.
pub struct Histogram {
    counts: Box<[AtomicU64]>,
}

impl Default for Histogram {
    fn default() -> Self {
        Histogram {
            counts: (0..BUCKETS).map(|_| AtomicU64::new(0)).collect(),
        }
    }
}

fn bucket_of(v: u64) -> usize {
    if v < SUB {
        return v as usize;
    }
    let e = 63 - v.leading_zeros() as u64;
    let shift = e - 6;
    (SUB + shift * SUB + ((v >> shift) - SUB)) as usize
}

fn bucket_floor(b: usize) -> u64 {
    let b = b as u64;
    if b < SUB {
        return b;
    }
    let shift = (b - SUB) / SUB;
    (SUB + (b - SUB) % SUB) << shift
}

impl Histogram {
    pub fn record(&self, nanos: u64) {
        self.counts[bucket_of(nanos)].fetch_add(1, Ordering::Relaxed);
    }

    fn snapshot(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c.load(Ordering::Relaxed)).collect()
    }

    pub fn percentiles(&self) -> (u64, Percentiles) {
        let counts = self.snapshot();
        let n: u64 = counts.iter().sum();
        let at = |p: f64| -> f64 {
            if n == 0 {
                return 0.0;
            }
            let rank = ((p / 100.0) * n as f64).ceil().max(1.0) as u64;
            let mut seen = 0;
            for (b, &c) in counts.iter().enumerate() {
                seen += c;
                if seen >= rank {
                    return bucket_floor(b) as f64 / 1000.0;
                }
            }
            unreachable!("rank within total")
        };
        (
            n,
            Percentiles {
                p50_us: at(50.0),
                p95_us: at(95.0),
                p99_us: at(99.0),
            },
        )
    }
}

/// Live per-stage latency for the service.
pub struct LiveStats {
    retrieval: Histogram,
    rerank: Histogram,
    total: Histogram,
    started: Instant,
}

impl Default for LiveStats {
    fn default() -> Self {
        LiveStats {
            retrieval: Histogram::default(),
            rerank: Histogram::default(),
            total: Histogram::default(),
            started: Instant::now(),
        }
    }
}

impl LiveStats {
    pub fn record(&self, s: &Sample) {
        self.retrieval.record(s.retrieval_ns);
        self.rerank.record(s.rerank_ns);
        self.total.record(s.total_ns);
    }

    pub fn report(&self) -> LatencyReport {
        let (n, end_to_end) = self.total.percentiles();
        LatencyReport {
            retrieval: self.retrieval.percentiles().1,
            rerank: self.rerank.percentiles().1,
            end_to_end,
            throughput_qps: n as f64 / self.started.elapsed().as_secs_f64().max(1e-9),
            queries: n as usize,
            warmup: 0,
            concurrency: 0,
            hardware: Hardware::detect(),
        }
    }
}
