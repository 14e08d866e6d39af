//! Criterion benchmarks for skf-core live in `benches/`.
