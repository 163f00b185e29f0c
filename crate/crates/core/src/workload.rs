//! Workload generation and benchmark runners.
//!
//! Keys are random 128-bit values drawn from a seeded ChaCha8 stream (two
//! 64-bit draws per key). Lookup streams mix present keys and keys known to
//! be absent; each lookup is independently negative with probability
//! `negative_rate`, so both the number and the position of negative keys
//! vary from batch to batch.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counters::InstrumentationCounters;
use crate::error::{ConfigError, InsertError};
use crate::expiration::{Timestamp16, Timing};
use crate::hashing::{Key, Value};
use crate::horton::HortonTable;
use crate::prefetch::{HardwarePrefetch, Prefetch};
use crate::table::{MemoryReport, Strategy, Table, TimedTable};
use crate::DefaultKeyHasher;

pub const DEFAULT_BATCH: usize = 32;
pub const QUICK_CAPACITY: usize = 1 << 16;
pub const LARGE_CAPACITY: usize = 1 << 20;
pub const INSERT_MILESTONES: [f64; 3] = [0.6, 0.8, 0.95];

/// Clock used by timed-variant benchmarks: every entry lives for `BENCH_TTL`
/// units from `BENCH_NOW` and lookups run at `BENCH_NOW`.
pub const BENCH_NOW: Timestamp16 = Timestamp16(0);
pub const BENCH_TTL: u16 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Pessimistic,
    Optimistic,
    Cuckoopp,
    CuckooppTimer,
    Horton,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Pessimistic, Variant::Optimistic, Variant::Cuckoopp, Variant::CuckooppTimer, Variant::Horton];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pessimistic => "pessimistic",
            Variant::Optimistic => "optimistic",
            Variant::Cuckoopp => "cuckoopp",
            Variant::CuckooppTimer => "cuckoopp_timer",
            Variant::Horton => "horton",
        }
    }

    /// The cuckoo lookup strategy, or `None` for the Horton baseline.
    pub fn strategy(self) -> Option<Strategy> {
        match self {
            Variant::Pessimistic => Some(Strategy::Pessimistic),
            Variant::Optimistic => Some(Strategy::Optimistic),
            Variant::Cuckoopp | Variant::CuckooppTimer => Some(Strategy::BloomGuided),
            Variant::Horton => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| WorkloadError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("{field} must lie in [0, 1], got {value}")]
    OutOfUnitRange { field: &'static str, value: f64 },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    /// The table could not be filled to the requested load factor.
    #[error("fill phase failed after {inserted} inserts (load {load_factor:.4}): {source}")]
    FillFailed { inserted: usize, load_factor: f64, source: InsertError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub capacity: usize,
    pub load_factor: f64,
    pub negative_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Number of lookups in the lookup stream.
    pub ops: usize,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            capacity: QUICK_CAPACITY,
            load_factor: 0.8,
            negative_rate: 0.2,
            batch_size: DEFAULT_BATCH,
            seed: 1,
            variant: Variant::Cuckoopp,
            ops: 1 << 20,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        crate::table::check_capacity(self.capacity)?;
        for (field, value) in [("load_factor", self.load_factor), ("negative_rate", self.negative_rate)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(WorkloadError::OutOfUnitRange { field, value });
            }
        }
        if self.batch_size == 0 {
            return Err(WorkloadError::EmptyBatch);
        }
        Ok(())
    }

    pub fn insert_count(&self) -> usize {
        (self.capacity as f64 * self.load_factor).round() as usize
    }
}

/// The keys a benchmark inserts and the lookup stream it replays.
#[derive(Debug, Clone)]
pub struct Workload {
    pub inserts: Vec<(Key, Value)>,
    pub lookups: Vec<Key>,
    /// `negative[i]` is true when `lookups[i]` was never inserted.
    pub negative: Vec<bool>,
}

fn random_key(rng: &mut ChaCha8Rng) -> Key {
    Key::from_words(rng.random(), rng.random())
}

/// Random keys from `stream` of `seed`, skipping any in `exclude`.
pub fn random_keys(seed: u64, stream: u64, count: usize, exclude: &HashSet<Key>) -> Vec<Key> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let k = random_key(&mut rng);
        if !exclude.contains(&k) && seen.insert(k) {
            out.push(k);
        }
    }
    out
}

pub fn generate(spec: &WorkloadSpec) -> Result<Workload, WorkloadError> {
    spec.validate()?;
    let n = spec.insert_count();
    let keys = random_keys(spec.seed, 0, n, &HashSet::new());
    let mut values = ChaCha8Rng::seed_from_u64(spec.seed);
    values.set_stream(1);
    let inserts: Vec<(Key, Value)> =
        keys.into_iter().map(|k| (k, Value::from_words(values.random(), values.random()))).collect();

    let mut mix = ChaCha8Rng::seed_from_u64(spec.seed);
    mix.set_stream(2);
    let negative: Vec<bool> =
        (0..spec.ops).map(|_| inserts.is_empty() || mix.random_bool(spec.negative_rate)).collect();
    let absent_needed = negative.iter().filter(|&&b| b).count();
    let present: HashSet<Key> = inserts.iter().map(|&(k, _)| k).collect();
    let mut absent = random_keys(spec.seed, 3, absent_needed, &present).into_iter();
    let lookups = negative
        .iter()
        .map(|&neg| {
            if neg {
                absent.next().expect("enough absent keys")
            } else {
                inserts[mix.random_range(0..inserts.len())].0
            }
        })
        .collect();
    Ok(Workload { inserts, lookups, negative })
}

/// Any benchmarked table variant behind one interface.
pub enum AnyTable<P: Prefetch = HardwarePrefetch> {
    Cuckoo(Table<DefaultKeyHasher, P>),
    Timed(TimedTable<DefaultKeyHasher, P>),
    Horton(HortonTable<DefaultKeyHasher, P>),
}

impl<P: Prefetch + Default> AnyTable<P> {
    pub fn new(variant: Variant, capacity: usize) -> Result<Self, ConfigError> {
        Ok(match (variant, variant.strategy()) {
            (Variant::CuckooppTimer, Some(s)) => {
                AnyTable::Timed(TimedTable::with_parts(capacity, s, DefaultKeyHasher, P::default())?)
            }
            (_, Some(s)) => AnyTable::Cuckoo(Table::with_parts(capacity, s, DefaultKeyHasher, P::default())?),
            (_, None) => AnyTable::Horton(HortonTable::with_parts(capacity, DefaultKeyHasher, P::default())?),
        })
    }
}

impl<P: Prefetch> AnyTable<P> {
    pub fn insert(&mut self, key: Key, value: Value) -> Result<(), InsertError> {
        match self {
            AnyTable::Cuckoo(t) => t.insert(key, value, None).map(drop),
            AnyTable::Timed(t) => t.insert(key, value, Some(Timing::after(BENCH_NOW, BENCH_TTL))).map(drop),
            AnyTable::Horton(t) => t.insert(key, value).map(drop),
        }
    }

    pub fn lookup_batch_into(&self, keys: &[Key], out: &mut [Option<Value>]) {
        match self {
            AnyTable::Cuckoo(t) => t.lookup_batch_into(keys, None, out),
            AnyTable::Timed(t) => t.lookup_batch_into(keys, Some(BENCH_NOW), out),
            AnyTable::Horton(t) => t.lookup_batch_into(keys, out),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyTable::Cuckoo(t) => t.len(),
            AnyTable::Timed(t) => t.len(),
            AnyTable::Horton(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        match self {
            AnyTable::Cuckoo(t) => t.capacity(),
            AnyTable::Timed(t) => t.capacity(),
            AnyTable::Horton(t) => t.capacity(),
        }
    }

    pub fn counters(&self) -> InstrumentationCounters {
        match self {
            AnyTable::Cuckoo(t) => t.counters(),
            AnyTable::Timed(t) => t.counters(),
            AnyTable::Horton(t) => t.counters(),
        }
    }

    pub fn reset_counters(&self) {
        match self {
            AnyTable::Cuckoo(t) => t.reset_counters(),
            AnyTable::Timed(t) => t.reset_counters(),
            AnyTable::Horton(t) => t.reset_counters(),
        }
    }

    pub fn memory_report(&self) -> MemoryReport {
        match self {
            AnyTable::Cuckoo(t) => t.memory_report(),
            AnyTable::Timed(t) => t.memory_report(),
            AnyTable::Horton(t) => t.memory_report(),
        }
    }

    pub fn ratio_in_secondary(&self) -> f64 {
        match self {
            AnyTable::Cuckoo(t) => t.stats(None).ratio_in_secondary,
            AnyTable::Timed(t) => t.stats(Some(BENCH_NOW)).ratio_in_secondary,
            AnyTable::Horton(t) => t.stats().ratio_in_secondary,
        }
    }

    /// Fraction of buckets whose moved counter is zero; cuckoo variants only.
    pub fn moved_zero_fraction(&self) -> Option<f64> {
        match self {
            AnyTable::Cuckoo(t) => Some(t.stats(None).moved_zero_fraction()),
            AnyTable::Timed(t) => Some(t.stats(Some(BENCH_NOW)).moved_zero_fraction()),
            AnyTable::Horton(_) => None,
        }
    }

    pub fn prefetcher(&self) -> &P {
        match self {
            AnyTable::Cuckoo(t) => t.prefetcher(),
            AnyTable::Timed(t) => t.prefetcher(),
            AnyTable::Horton(t) => t.prefetcher(),
        }
    }

    /// Inserts `entries` in order, stopping at the first failure.
    pub fn fill(&mut self, entries: &[(Key, Value)]) -> Result<(), BenchError> {
        for (i, &(k, v)) in entries.iter().enumerate() {
            self.insert(k, v).map_err(|source| BenchError::FillFailed {
                inserted: i,
                load_factor: self.len() as f64 / self.capacity() as f64,
                source,
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub variant: Variant,
    pub spec: WorkloadSpec,
    pub wall_time_secs: f64,
    pub ops_per_sec: f64,
    pub lookups: u64,
    pub hits: u64,
    pub misses: u64,
    /// Lookup-phase counters (fill-phase activity is excluded).
    pub counters: InstrumentationCounters,
    pub ratio_in_secondary: f64,
    pub moved_zero_fraction: Option<f64>,
    pub memory: MemoryReport,
}

/// A finished lookup benchmark with the table and per-lookup hit vector.
pub struct LookupRun<P: Prefetch = HardwarePrefetch> {
    pub report: BenchReport,
    pub hits: Vec<bool>,
    pub table: AnyTable<P>,
}

pub fn run_lookup_bench(spec: &WorkloadSpec) -> Result<BenchReport, BenchError> {
    run_lookup_bench_with::<HardwarePrefetch>(spec).map(|r| r.report)
}

pub fn run_lookup_bench_with<P: Prefetch + Default>(spec: &WorkloadSpec) -> Result<LookupRun<P>, BenchError> {
    let workload = generate(spec)?;
    let mut table = AnyTable::<P>::new(spec.variant, spec.capacity).map_err(WorkloadError::from)?;
    table.fill(&workload.inserts)?;
    Ok(replay_lookups(spec, &workload, table))
}

/// Runs the lookup stream of `workload` against an already-filled table.
pub fn replay_lookups<P: Prefetch>(spec: &WorkloadSpec, workload: &Workload, table: AnyTable<P>) -> LookupRun<P> {
    table.reset_counters();
    let mut out = vec![None; spec.batch_size];
    let mut hits = Vec::with_capacity(workload.lookups.len());
    let start = Instant::now();
    for batch in workload.lookups.chunks(spec.batch_size) {
        let out = &mut out[..batch.len()];
        table.lookup_batch_into(batch, out);
        hits.extend(out.iter().map(Option::is_some));
    }
    let wall = start.elapsed().as_secs_f64();
    let hit_count = hits.iter().filter(|&&h| h).count() as u64;
    let lookups = hits.len() as u64;
    let report = BenchReport {
        variant: spec.variant,
        spec: *spec,
        wall_time_secs: wall,
        ops_per_sec: if wall > 0.0 { lookups as f64 / wall } else { 0.0 },
        lookups,
        hits: hit_count,
        misses: lookups - hit_count,
        counters: table.counters(),
        ratio_in_secondary: table.ratio_in_secondary(),
        moved_zero_fraction: table.moved_zero_fraction(),
        memory: table.memory_report(),
    };
    LookupRun { report, hits, table }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertMilestone {
    pub load_factor: f64,
    pub inserts: usize,
    pub elapsed_secs: f64,
    pub inserts_per_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertReport {
    pub variant: Variant,
    pub capacity: usize,
    pub seed: u64,
    pub milestones: Vec<InsertMilestone>,
    /// Load factor at the first insert failure, if any.
    pub failure_load_factor: Option<f64>,
    pub counters: InstrumentationCounters,
}

impl InsertReport {
    pub fn milestone(&self, load: f64) -> Option<&InsertMilestone> {
        self.milestones.iter().find(|m| (m.load_factor - load).abs() < 1e-9)
    }
}

/// Inserts random keys into an empty table, timing each milestone.
pub fn run_insert_bench(spec: &WorkloadSpec) -> Result<InsertReport, WorkloadError> {
    run_insert_bench_to(spec, &INSERT_MILESTONES)
}

pub fn run_insert_bench_to(spec: &WorkloadSpec, milestones: &[f64]) -> Result<InsertReport, WorkloadError> {
    spec.validate()?;
    let top = milestones.iter().copied().fold(0.0, f64::max);
    let count = (spec.capacity as f64 * top).round() as usize;
    let keys = random_keys(spec.seed, 0, count, &HashSet::new());
    let mut table = AnyTable::<HardwarePrefetch>::new(spec.variant, spec.capacity)?;
    let mut sorted = milestones.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut failure = None;
    let mut next = sorted.iter().copied().peekable();
    let start = Instant::now();
    for (i, k) in keys.into_iter().enumerate() {
        if table.insert(k, Value::from_words(i as u64, 0)).is_err() {
            failure = Some(table.len() as f64 / spec.capacity as f64);
            break;
        }
        while let Some(&m) = next.peek() {
            let target = (spec.capacity as f64 * m).round() as usize;
            if table.len() < target {
                break;
            }
            let elapsed = start.elapsed().as_secs_f64();
            out.push(InsertMilestone {
                load_factor: m,
                inserts: table.len(),
                elapsed_secs: elapsed,
                inserts_per_sec: table.len() as f64 / elapsed.max(f64::MIN_POSITIVE),
            });
            next.next();
        }
    }
    Ok(InsertReport {
        variant: spec.variant,
        capacity: spec.capacity,
        seed: spec.seed,
        milestones: out,
        failure_load_factor: failure,
        counters: table.counters(),
    })
}

/// Aggregate of share-nothing workers, each owning its own table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelReport {
    pub workers: usize,
    pub aggregate_ops_per_sec: f64,
    pub reports: Vec<BenchReport>,
}

/// Runs `workers` independent lookup benchmarks concurrently; worker `i`
/// uses seed `spec.seed + i`.
pub fn run_lookup_bench_parallel(spec: &WorkloadSpec, workers: usize) -> Result<ParallelReport, BenchError> {
    let workers = workers.max(1);
    let reports: Vec<Result<BenchReport, BenchError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|i| {
                let spec = WorkloadSpec { seed: spec.seed.wrapping_add(i as u64), ..*spec };
                scope.spawn(move || run_lookup_bench(&spec))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ParallelReport { workers, aggregate_ops_per_sec: reports.iter().map(|r| r.ops_per_sec).sum(), reports })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub load: f64,
    pub ratio_in_secondary: f64,
    pub moved_zero_fraction: f64,
    pub nonzero_filter_fraction: f64,
}

/// Fills one bloom-guided table through increasing `loads`, recording
/// placement statistics at each.
pub fn stats_sweep(capacity: usize, loads: &[f64], seed: u64) -> Result<Vec<StatsRow>, BenchError> {
    let mut loads = loads.to_vec();
    loads.sort_by(f64::total_cmp);
    let top = loads.last().copied().unwrap_or(0.0);
    let keys = random_keys(seed, 0, (capacity as f64 * top).round() as usize, &HashSet::new());
    let mut table = Table::<DefaultKeyHasher>::new(capacity, Strategy::BloomGuided).map_err(WorkloadError::from)?;
    let mut rows = Vec::with_capacity(loads.len());
    let mut inserted = 0;
    for load in loads {
        let target = (capacity as f64 * load).round() as usize;
        for &k in &keys[inserted..target] {
            table.insert(k, Value::default(), None).map_err(|source| BenchError::FillFailed {
                inserted,
                load_factor: table.load_factor(),
                source,
            })?;
            inserted += 1;
        }
        let st = table.stats(None);
        rows.push(StatsRow {
            load,
            ratio_in_secondary: st.ratio_in_secondary,
            moved_zero_fraction: st.moved_zero_fraction(),
            nonzero_filter_fraction: st.nonzero_filters as f64 / st.num_buckets as f64,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FprRow {
    pub load: f64,
    pub probes: u64,
    pub fpr_cuckoopp: f64,
    pub fpr_horton: f64,
}

/// Measures the absent-key false-positive rate of the bloom filter and of
/// the Horton remap array, filling both tables with the same keys.
pub fn fpr_sweep(capacity: usize, loads: &[f64], probes: usize, seed: u64) -> Result<Vec<FprRow>, BenchError> {
    let mut loads = loads.to_vec();
    loads.sort_by(f64::total_cmp);
    let top = loads.last().copied().unwrap_or(0.0);
    let keys = random_keys(seed, 0, (capacity as f64 * top).round() as usize, &HashSet::new());
    let present: HashSet<Key> = keys.iter().copied().collect();
    let absent = random_keys(seed, 3, probes, &present);
    let mut cuckoo = AnyTable::<HardwarePrefetch>::new(Variant::Cuckoopp, capacity).map_err(WorkloadError::from)?;
    let mut horton = AnyTable::<HardwarePrefetch>::new(Variant::Horton, capacity).map_err(WorkloadError::from)?;
    let mut inserted = 0;
    let mut out = vec![None; DEFAULT_BATCH];
    let mut rows = Vec::new();
    for load in loads {
        let target = (capacity as f64 * load).round() as usize;
        let batch: Vec<_> = keys[inserted..target].iter().map(|&k| (k, Value::default())).collect();
        cuckoo.fill(&batch)?;
        horton.fill(&batch)?;
        inserted = target;
        let mut fpr = [0.0; 2];
        for (t, f) in [&cuckoo, &horton].into_iter().zip(&mut fpr) {
            t.reset_counters();
            for chunk in absent.chunks(DEFAULT_BATCH) {
                t.lookup_batch_into(chunk, &mut out[..chunk.len()]);
            }
            *f = t.counters().false_positive_rate(absent.len() as u64);
        }
        rows.push(FprRow { load, probes: absent.len() as u64, fpr_cuckoopp: fpr[0], fpr_horton: fpr[1] });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistRow {
    pub load: f64,
    pub moved_counter: u16,
    pub buckets: u64,
    pub fraction: f64,
}

/// Moved-counter distribution at each load.
pub fn counter_hist(capacity: usize, loads: &[f64], seed: u64) -> Result<Vec<HistRow>, BenchError> {
    let mut loads = loads.to_vec();
    loads.sort_by(f64::total_cmp);
    let top = loads.last().copied().unwrap_or(0.0);
    let keys = random_keys(seed, 0, (capacity as f64 * top).round() as usize, &HashSet::new());
    let mut table = Table::<DefaultKeyHasher>::new(capacity, Strategy::BloomGuided).map_err(WorkloadError::from)?;
    let mut inserted = 0;
    let mut rows = Vec::new();
    for load in loads {
        let target = (capacity as f64 * load).round() as usize;
        for &k in &keys[inserted..target] {
            table.insert(k, Value::default(), None).map_err(|source| BenchError::FillFailed {
                inserted,
                load_factor: table.load_factor(),
                source,
            })?;
            inserted += 1;
        }
        let st = table.stats(None);
        for (v, &n) in st.moved_counter_histogram.iter().enumerate() {
            rows.push(HistRow {
                load,
                moved_counter: v as u16,
                buckets: n,
                fraction: n as f64 / st.num_buckets as f64,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(negative_rate: f64, ops: usize) -> WorkloadSpec {
        WorkloadSpec { capacity: 1 << 12, load_factor: 0.5, negative_rate, ops, ..Default::default() }
    }

    #[test]
    fn all_positive_stream() {
        let w = generate(&spec(0.0, 5000)).unwrap();
        let present: HashSet<Key> = w.inserts.iter().map(|e| e.0).collect();
        assert!(w.lookups.iter().all(|k| present.contains(k)));
        assert_eq!(w.inserts.len(), 2048);
    }

    #[test]
    fn all_negative_stream() {
        let w = generate(&spec(1.0, 5000)).unwrap();
        let present: HashSet<Key> = w.inserts.iter().map(|e| e.0).collect();
        assert!(w.lookups.iter().all(|k| !present.contains(k)));
    }

    #[test]
    fn negative_fraction_concentrates() {
        let w = generate(&spec(0.2, 1_000_000)).unwrap();
        let frac = w.negative.iter().filter(|&&n| n).count() as f64 / 1e6;
        assert!((frac - 0.2).abs() < 0.01, "{frac}");
        // Positions vary: not every 32-lookup batch has the same count.
        let counts: HashSet<usize> = w.negative.chunks(32).map(|c| c.iter().filter(|&&n| n).count()).collect();
        assert!(counts.len() > 3);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&spec(0.3, 1000)).unwrap();
        let b = generate(&spec(0.3, 1000)).unwrap();
        assert_eq!(a.inserts, b.inserts);
        assert_eq!(a.lookups, b.lookups);
        let c = generate(&WorkloadSpec { seed: 2, ..spec(0.3, 1000) }).unwrap();
        assert_ne!(a.inserts, c.inserts);
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            generate(&WorkloadSpec { load_factor: 1.5, ..spec(0.0, 1) }),
            Err(WorkloadError::OutOfUnitRange { field: "load_factor", .. })
        ));
        assert!(matches!(generate(&WorkloadSpec { batch_size: 0, ..spec(0.0, 1) }), Err(WorkloadError::EmptyBatch)));
        assert!(matches!(
            generate(&WorkloadSpec { capacity: 1000, ..spec(0.0, 1) }),
            Err(WorkloadError::Config(ConfigError::InvalidCapacity(1000)))
        ));
        assert_eq!("horton".parse::<Variant>(), Ok(Variant::Horton));
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn fill_failure_is_distinct() {
        let s = WorkloadSpec { capacity: 1024, load_factor: 1.0, variant: Variant::Horton, ..spec(0.0, 10) };
        match run_lookup_bench(&s) {
            Err(BenchError::FillFailed { source: InsertError::TableFull, .. }) => {}
            other => panic!("expected fill failure, got {other:?}"),
        }
    }

    #[test]
    fn lookup_counter_accounting() {
        for variant in Variant::ALL {
            let r = run_lookup_bench(&WorkloadSpec { variant, ..spec(0.3, 20_000) }).unwrap();
            assert_eq!(r.hits + r.misses, r.lookups);
            assert!(r.counters.bloom_positive >= r.counters.bloom_true_positive);
            assert_eq!(r.counters.primary_bucket_reads, r.lookups);
        }
    }
}
