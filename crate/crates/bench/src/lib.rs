//! Criterion benchmarks for the cryptographic primitives; see `benches/`.
