//! Criterion benchmarks for the planners live in `benches/`.
