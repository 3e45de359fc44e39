//! Closed-form oracles.
