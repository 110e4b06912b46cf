//! Simulation workbench for a fully planar monopulse receiver chain.
//!
//! The crate models the receive path entirely in software: ideal TEM
//! transmission-line networks (rat-race couplers, a full-wavelength-delay
//! crossover, the 8-port comparator), 2x2 sum/difference pattern synthesis,
//! monopulse-ratio direction-of-arrival estimation under injected channel
//! impairments, and a small fully connected network that learns to undo the
//! systematic part of the estimation error.
//!
//! Modules map onto the pipeline stages:
//!
//! * [`netkernel`] - element ABCD matrices, ABCD/S conversion, multiport
//!   interconnection and frequency sweeps.
//! * [`netlist`] - the line-oriented `.net` network description language.
//! * [`components`] - parametric circuit generators, analytic even/odd and
//!   four-mode oracles, the crossover design-condition solver, S-parameter
//!   metrics and bandwidth reports.
//! * [`array`] - steering vectors, channel combining and pattern cuts.
//! * [`doa`] - ratio-based angle estimation, impairment models, dataset
//!   generation.
//! * [`dnn`] - the 3-20-50-10-2 regression network with Adam training.
//! * [`touchstone`] - Touchstone file output/input for sweep results.

pub mod array;
pub mod components;
pub mod dnn;
pub mod doa;
pub mod netkernel;
pub mod netlist;
pub mod touchstone;

pub use num_complex::Complex64;
