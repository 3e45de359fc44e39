//! Monte Carlo scenario lab.
