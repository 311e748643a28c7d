//! Criterion benchmarks for the convspec kernels; see `benches/kernels.rs`.
