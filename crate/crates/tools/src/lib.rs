//! File formats, workload generators, reports and the clock used by the
//! `igpm` command line.

pub mod clock;
pub mod formats;
pub mod generate;
pub mod ingest;
pub mod report;
