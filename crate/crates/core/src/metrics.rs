//! Performance metrics (placeholder).
