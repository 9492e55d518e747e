#![no_main]

//! First byte selects the table; the rest is the CSV body. Parsed tables
//! are pushed through cohort construction and one strict dataset build.

use leap_core::dataset::tables::{read_table_into, TableKind};
use leap_core::{build_cohort, build_cutoff_dataset, LeakagePolicy, RawTables};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, body)) = data.split_first() else {
        return;
    };
    let kind = TableKind::ALL[usize::from(selector) % TableKind::ALL.len()];
    let mut tables = RawTables::default();
    if read_table_into(&mut tables, kind, body).is_err() {
        return;
    }
    if let Ok(cohort) = build_cohort(&tables) {
        let _ = build_cutoff_dataset(&cohort, 7, LeakagePolicy::Strict);
    }
});
