//! Fixtures shared by the criterion benchmarks in `benches/`.

use cuckoopp::workload::{generate, AnyTable, Variant, Workload, WorkloadSpec};

pub const CAPACITY: usize = 1 << 20;

/// A table of `variant` filled to `load_factor` and its lookup stream.
pub fn filled(variant: Variant, load_factor: f64, negative_rate: f64) -> (AnyTable, Workload) {
    let spec =
        WorkloadSpec { capacity: CAPACITY, load_factor, negative_rate, variant, ops: 1 << 16, ..Default::default() };
    let work = generate(&spec).expect("valid spec");
    let mut table = AnyTable::new(variant, CAPACITY).expect("valid capacity");
    table.fill(&work.inserts).expect("fill succeeds");
    (table, work)
}
