// Benchmarks live under benches/; see that directory.
