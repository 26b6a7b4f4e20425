//! Benchmark fixtures for the calibration crates.
