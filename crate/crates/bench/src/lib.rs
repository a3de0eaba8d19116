//! Benchmarks live in `benches/`; run `cargo bench -p cbert-bench`.
