//! Named end-to-end estimators.
