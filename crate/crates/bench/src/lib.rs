//! Criterion benchmarks for the estimator; see `benches/`.
