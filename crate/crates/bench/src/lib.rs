//! Benchmarks for enumeration, LP solves and point location; see `benches/`.
