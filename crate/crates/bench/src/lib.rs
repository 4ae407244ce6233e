//! Criterion benchmarks for the simulator kernels live under `benches/`.
