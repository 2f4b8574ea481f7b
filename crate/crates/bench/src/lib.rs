//! Benchmark-only crate; see `benches/gauge.rs`.
