//! Comparison agents.
