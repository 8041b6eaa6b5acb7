//! Transistor-level transient simulation and measurement for clocked
//! dynamic-latch comparators.
//!
//! The crate is layered bottom-up:
//!
//! - [`netlist`]: SPICE-subset text format and typed circuit.
//! - [`device`]: smooth charge-based FinFET drain-current model.
//! - [`engine`]: MNA assembly, Newton-Raphson, DC and transient analysis.
//! - [`measure`]: delay, average power, PDP and Monte-Carlo offset.
//! - [`circuits`]: the four built-in comparators, testbenches, sweeps and
//!   the comparison report.

pub mod circuits;
pub mod device;
pub mod engine;
pub mod measure;
pub mod netlist;
pub mod units;
