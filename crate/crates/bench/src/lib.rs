//! Criterion benchmarks for the `qlab` kernels live in `benches/`.
