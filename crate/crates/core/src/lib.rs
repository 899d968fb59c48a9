//! Synchronization of weakly damped oscillator arrays at high frequency:
//! coupling graphs, rotating-frame dynamics, period averaging, geometric
//! sync metrics, simulation and an experiment harness.

pub mod averaging;
pub mod coupling_graph;
pub mod dynamics;
pub mod geometry;
pub mod harness;
pub mod quadrature;
pub mod simulate;
