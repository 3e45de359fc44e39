//! File formats and commands.
