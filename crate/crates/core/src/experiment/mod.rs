//! Experiment orchestration (placeholder).
