//! Benchmark-only crate; see `benches/rhg.rs`.
