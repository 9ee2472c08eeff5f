//! Simulated hemispherical received-power scanning.
//!
//! This crate reproduces, fully in software, an automated measurement
//! pipeline for angular received-power characterization of an embedded
//! millimeter-wave transmitter: geometry-calibrated pose generation over
//! hemispherical grids, collision-aware 7-DoF motion planning, a
//! SCPI-over-TCP spectrum-analyzer emulator backed by a free-space link
//! model, crash-safe pose-indexed acquisition, and power-domain analysis
//! against reference patterns.
//!
//! Start with the `examples/` directory: each example exercises one major
//! capability end to end. The `hemiscan` binary exposes the same pipeline
//! behind `plan`, `scan`, `analyze`, `benchmark`, `verify`, and `serve`
//! subcommands.

pub mod collision;
pub mod config;
pub mod grid;
pub mod kinematics;
pub mod planner;
pub mod rf;
pub mod scpi;
pub mod se3;
