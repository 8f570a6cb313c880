//! Criterion benchmarks for the stepsize rules and the SGD runner; see `benches/`.
