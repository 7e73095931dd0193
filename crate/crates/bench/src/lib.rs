//! Criterion benchmarks for the search and sampling kernels live in `benches/`.
