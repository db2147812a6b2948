"""Benchmark harness: configs, synthetic and LIBSVM data, runs and outputs."""
