//! Criterion benchmarks for the solver kernels; see `benches/kernels.rs`.
//!
//! ```text
//! cargo bench -p nls-bench
//! ```
