//! Benchmark-only crate; see `benches/forecasting.rs`.
