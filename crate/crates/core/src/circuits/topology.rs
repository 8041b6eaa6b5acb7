//! Device tables of the four built-in comparators.
//!
//! Node names are shared across topologies: `vdd`, `0`, `vin`, `vref`, and
//! `clk` (single-clock designs) or `clk1`/`clk2` (two-phase designs, `clk2`
//! being the complement of `clk1`). Evaluation happens while `clk`/`clk1`
//! is high. The three reference designs are reconstructions from their
//! operating descriptions; see `docs/topologies.md`.

use crate::netlist::Polarity::{self, N, P};

/// One transistor: name, polarity, drain, gate, source.
pub type DeviceRow = (&'static str, Polarity, &'static str, &'static str, &'static str);

/// Proposed two-clock design: precharged cross-coupled first stage with
/// P keepers, clock-gated second-stage latch coupled through F13/F14.
pub const PROPOSED: &[DeviceRow] = &[
    ("MFtail1", N, "tail", "clk1", "0"),
    ("MF1", N, "x1", "vin", "tail"),
    ("MF2", N, "x2", "vref", "tail"),
    ("MF3", N, "fa", "fb", "x1"),
    ("MF4", N, "fb", "fa", "x2"),
    ("MF5", P, "x1", "clk1", "vdd"),
    ("MF6", P, "x2", "clk1", "vdd"),
    ("MF7", P, "fa", "clk1", "vdd"),
    ("MF8", P, "fb", "clk1", "vdd"),
    ("MF9", P, "fa", "fb", "vdd"),
    ("MF10", P, "fb", "fa", "vdd"),
    ("MFtail2", P, "t2", "clk2", "vdd"),
    ("MF11", P, "outn", "outp", "t2"),
    ("MF12", P, "outp", "outn", "t2"),
    ("MF13", N, "outn", "fa", "0"),
    ("MF14", N, "outp", "fb", "0"),
    ("MF15", N, "outn", "outp", "0"),
    ("MF16", N, "outp", "outn", "0"),
];

/// Single-clock design with inverter buffers between the input stage and
/// a precharged output latch.
pub const JEON2010: &[DeviceRow] = &[
    ("MF1", N, "tail", "clk", "0"),
    ("MF2", N, "di1", "vin", "tail"),
    ("MF3", N, "di2", "vref", "tail"),
    ("MF4", P, "di1", "clk", "vdd"),
    ("MF5", P, "di2", "clk", "vdd"),
    ("MF16", P, "x1", "di1", "vdd"),
    ("MF18", N, "x1", "di1", "0"),
    ("MF17", P, "x2", "di2", "vdd"),
    ("MF19", N, "x2", "di2", "0"),
    ("MF10", P, "outm", "x1", "vdd"),
    ("MF14", P, "n1", "x1", "vdd"),
    ("MF12", N, "n1", "x1", "0"),
    ("MF6", N, "outm", "outp", "n1"),
    ("MF11", P, "outp", "x2", "vdd"),
    ("MF15", P, "n2", "x2", "vdd"),
    ("MF13", N, "n2", "x2", "0"),
    ("MF7", N, "outp", "outm", "n2"),
    ("MF8", P, "outm", "outp", "vdd"),
    ("MF9", P, "outp", "outm", "vdd"),
];

/// Two-clock double-tail design with stage-1 series switches and
/// output reset devices driven by the stage-1 nodes.
pub const MASHHADI2014: &[DeviceRow] = &[
    ("MFtail1", N, "tail", "clk1", "0"),
    ("MF1", N, "sn", "vin", "tail"),
    ("MF2", N, "sp", "vref", "tail"),
    ("MFsw2", N, "fn", "fp", "sn"),
    ("MFsw1", N, "fp", "fn", "sp"),
    ("MF3", P, "fn", "clk1", "vdd"),
    ("MF4", P, "fp", "clk1", "vdd"),
    ("MFC1", P, "fp", "fn", "vdd"),
    ("MFC2", P, "fn", "fp", "vdd"),
    ("MFtail2", P, "t2", "clk2", "vdd"),
    ("MF7", P, "outn", "outp", "t2"),
    ("MF8", P, "outp", "outn", "t2"),
    ("MFR1", N, "outn", "fp", "0"),
    ("MFR2", N, "outp", "fn", "0"),
    ("MF5", N, "outn", "outp", "0"),
    ("MF6", N, "outp", "outn", "0"),
];

/// Single-clock double-tail variant: the upper tail is split into F1/F2,
/// each gated by one stage-1 node.
pub const DEEPIKA2015: &[DeviceRow] = &[
    ("MFtail", N, "tail", "clk", "0"),
    ("MF10", N, "sn", "vin", "tail"),
    ("MF11", N, "sp", "vref", "tail"),
    ("MF3", N, "fn", "fp", "sn"),
    ("MF4", N, "fp", "fn", "sp"),
    ("MF9", P, "fn", "clk", "vdd"),
    ("MF12", P, "fp", "clk", "vdd"),
    ("MFC1", P, "fn", "fp", "vdd"),
    ("MFC2", P, "fp", "fn", "vdd"),
    ("MF1", P, "y1", "fn", "vdd"),
    ("MF2", P, "y2", "fp", "vdd"),
    ("MF7", P, "outn", "outp", "y1"),
    ("MF8", P, "outp", "outn", "y2"),
    ("MF5", N, "outn", "fn", "0"),
    ("MF6", N, "outp", "fp", "0"),
];
