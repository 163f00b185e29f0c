//! Command-line benchmark driver: argument model, flat output rows and
//! CSV/JSON emission.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use cuckoopp::workload::{
    self, BenchError, BenchReport, FprRow, HistRow, InsertReport, StatsRow, Variant, WorkloadError, WorkloadSpec,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("--timers is only available for the cuckoopp variant, not {0}")]
    TimersUnsupported(Variant),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "cuckoopp", version, about = "Cuckoo hash table benchmarks and statistics sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fill a table, then time a batched lookup stream.
    BenchLookup(LookupArgs),
    /// Time inserts into an empty table up to load 0.6, 0.8 and 0.95.
    BenchInsert(InsertArgs),
    /// Fraction of entries in their secondary bucket across load factors.
    StatsSweep(SweepArgs),
    /// Absent-key false-positive rate of the bloom filter and remap array.
    FprSweep(FprArgs),
    /// Distribution of moved-counter values.
    CounterHist(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long, default_value_t = workload::QUICK_CAPACITY)]
    pub capacity: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = Variant::Cuckoopp)]
    pub variant: Variant,
    /// Enable per-entry expiration timers (cuckoopp only).
    #[arg(long)]
    pub timers: bool,
}

impl TableArgs {
    pub fn variant(&self) -> Result<Variant, CliError> {
        match (self.variant, self.timers) {
            (v, false) => Ok(v),
            (Variant::Cuckoopp | Variant::CuckooppTimer, true) => Ok(Variant::CuckooppTimer),
            (v, true) => Err(CliError::TimersUnsupported(v)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LookupArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value_t = 0.8)]
    pub load_factor: f64,
    #[arg(long, default_value_t = 0.0)]
    pub neg_rate: f64,
    #[arg(long, default_value_t = workload::DEFAULT_BATCH)]
    pub batch: usize,
    /// Lookups per worker.
    #[arg(long, default_value_t = 1 << 22)]
    pub ops: usize,
    /// Independent tables, one per thread.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct InsertArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = workload::QUICK_CAPACITY)]
    pub capacity: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated load factors; a default series when absent.
    #[arg(long = "load-factor", value_delimiter = ',')]
    pub loads: Vec<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct FprArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Absent keys probed at each load.
    #[arg(long, default_value_t = 1_000_000)]
    pub probes: usize,
}

pub const STATS_LOADS: [f64; 18] =
    [0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
pub const FPR_LOADS: [f64; 3] = [0.6, 0.8, 0.95];
pub const HIST_LOADS: [f64; 3] = [0.5, 0.8, 0.95];

/// A flat output record with a fixed column order.
pub trait Row: Serialize {
    const HEADER: &'static [&'static str];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LookupRow {
    pub variant: Variant,
    pub capacity: usize,
    pub load_factor: f64,
    pub negative_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub worker: usize,
    pub lookups: u64,
    pub hits: u64,
    pub misses: u64,
    pub wall_time_secs: f64,
    pub ops_per_sec: f64,
    pub primary_bucket_reads: u64,
    pub secondary_bucket_reads: u64,
    pub kv_reads: u64,
    pub bloom_positive: u64,
    pub bloom_true_positive: u64,
    pub bloom_false_positive: u64,
    pub ratio_in_secondary: f64,
    pub bytes_per_entry: f64,
}

impl Row for LookupRow {
    const HEADER: &'static [&'static str] = &[
        "variant",
        "capacity",
        "load_factor",
        "negative_rate",
        "batch_size",
        "seed",
        "worker",
        "lookups",
        "hits",
        "misses",
        "wall_time_secs",
        "ops_per_sec",
        "primary_bucket_reads",
        "secondary_bucket_reads",
        "kv_reads",
        "bloom_positive",
        "bloom_true_positive",
        "bloom_false_positive",
        "ratio_in_secondary",
        "bytes_per_entry",
    ];
}

impl LookupRow {
    pub fn new(worker: usize, r: &BenchReport) -> Self {
        let c = &r.counters;
        LookupRow {
            variant: r.variant,
            capacity: r.spec.capacity,
            load_factor: r.spec.load_factor,
            negative_rate: r.spec.negative_rate,
            batch_size: r.spec.batch_size,
            seed: r.spec.seed,
            worker,
            lookups: r.lookups,
            hits: r.hits,
            misses: r.misses,
            wall_time_secs: r.wall_time_secs,
            ops_per_sec: r.ops_per_sec,
            primary_bucket_reads: c.primary_bucket_reads,
            secondary_bucket_reads: c.secondary_bucket_reads,
            kv_reads: c.kv_reads,
            bloom_positive: c.bloom_positive,
            bloom_true_positive: c.bloom_true_positive,
            bloom_false_positive: c.bloom_false_positive,
            ratio_in_secondary: r.ratio_in_secondary,
            bytes_per_entry: r.memory.bytes_per_entry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InsertRow {
    pub variant: Variant,
    pub capacity: usize,
    pub seed: u64,
    pub load_factor: f64,
    pub inserts: usize,
    pub elapsed_secs: f64,
    pub inserts_per_sec: f64,
    /// Empty when no insert failed.
    pub failure_load_factor: Option<f64>,
}

impl Row for InsertRow {
    const HEADER: &'static [&'static str] = &[
        "variant",
        "capacity",
        "seed",
        "load_factor",
        "inserts",
        "elapsed_secs",
        "inserts_per_sec",
        "failure_load_factor",
    ];
}

impl InsertRow {
    pub fn rows(r: &InsertReport) -> Vec<Self> {
        r.milestones
            .iter()
            .map(|m| InsertRow {
                variant: r.variant,
                capacity: r.capacity,
                seed: r.seed,
                load_factor: m.load_factor,
                inserts: m.inserts,
                elapsed_secs: m.elapsed_secs,
                inserts_per_sec: m.inserts_per_sec,
                failure_load_factor: r.failure_load_factor,
            })
            .collect()
    }
}

impl Row for StatsRow {
    const HEADER: &'static [&'static str] =
        &["load", "ratio_in_secondary", "moved_zero_fraction", "nonzero_filter_fraction"];
}

impl Row for FprRow {
    const HEADER: &'static [&'static str] = &["load", "probes", "fpr_cuckoopp", "fpr_horton"];
}

impl Row for HistRow {
    const HEADER: &'static [&'static str] = &["load", "moved_counter", "buckets", "fraction"];
}

/// Writes `rows` as CSV (header row first, even when empty) or as a JSON
/// array.
pub fn write_rows<T: Row, W: Write>(rows: &[T], format: Format, out: W) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(T::HEADER)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn emit<T: Row>(rows: &[T], format: Format, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => write_rows(rows, format, BufWriter::new(File::create(p)?)),
        None => write_rows(rows, format, io::stdout().lock()),
    }
}

fn loads_or(loads: &[f64], default: &[f64]) -> Vec<f64> {
    if loads.is_empty() {
        default.to_vec()
    } else {
        loads.to_vec()
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BenchLookup(a) => {
            let spec = WorkloadSpec {
                capacity: a.table.capacity,
                load_factor: a.load_factor,
                negative_rate: a.neg_rate,
                batch_size: a.batch,
                seed: a.table.seed,
                variant: a.table.variant()?,
                ops: a.ops,
            };
            let rows: Vec<LookupRow> = if a.workers > 1 {
                let p = workload::run_lookup_bench_parallel(&spec, a.workers)?;
                log::info!("{} workers: {:.0} lookups/s aggregate", p.workers, p.aggregate_ops_per_sec);
                p.reports.iter().enumerate().map(|(i, r)| LookupRow::new(i, r)).collect()
            } else {
                vec![LookupRow::new(0, &workload::run_lookup_bench(&spec)?)]
            };
            emit(&rows, a.output.format, a.output.out.as_deref())
        }
        Command::BenchInsert(a) => {
            let spec = WorkloadSpec {
                capacity: a.table.capacity,
                seed: a.table.seed,
                variant: a.table.variant()?,
                ..Default::default()
            };
            let report = workload::run_insert_bench(&spec)?;
            if let Some(l) = report.failure_load_factor {
                log::warn!("insert failed at load {l:.4}");
            }
            emit(&InsertRow::rows(&report), a.output.format, a.output.out.as_deref())
        }
        Command::StatsSweep(a) => {
            let rows = workload::stats_sweep(a.capacity, &loads_or(&a.loads, &STATS_LOADS), a.seed)?;
            emit(&rows, a.output.format, a.output.out.as_deref())
        }
        Command::FprSweep(a) => {
            let s = a.sweep;
            let rows = workload::fpr_sweep(s.capacity, &loads_or(&s.loads, &FPR_LOADS), a.probes, s.seed)?;
            emit(&rows, s.output.format, s.output.out.as_deref())
        }
        Command::CounterHist(a) => {
            let rows = workload::counter_hist(a.capacity, &loads_or(&a.loads, &HIST_LOADS), a.seed)?;
            emit(&rows, a.output.format, a.output.out.as_deref())
        }
    }
}
