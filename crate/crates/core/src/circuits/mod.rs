//! Built-in comparators, their testbench, parametric sweeps and the
//! comparison report.

mod report;
mod sweep;
pub mod topology;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::DEFAULT_DT;
use crate::netlist::{
    Capacitor, DeviceInstance, Netlist, Polarity, Pulse, SourceSpec, TranDirective, VoltageSource, GROUND,
};

pub use report::{comparison_table, COMPARISON_HEADER, write_comparison_csv, ComparisonRow, PublishedFigures, PUBLISHED_FIGURES};
pub use sweep::{
    run_metrics, run_sweep, simulate, write_sweep_csv, Axis, Metric, RunError, RunFailure, SweepRow, SweepSpec,
    TestbenchRun, SUPPLY, VCM_SWEEP_DVIN,
};
pub use topology::DeviceRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparatorKind {
    Jeon2010,
    Mashhadi2014,
    Deepika2015,
    Proposed,
}

/// Node level expected at the end of the reset phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rail {
    Vdd,
    Ground,
}

impl ComparatorKind {
    /// Report order.
    pub const ALL: [ComparatorKind; 4] =
        [ComparatorKind::Jeon2010, ComparatorKind::Mashhadi2014, ComparatorKind::Deepika2015, ComparatorKind::Proposed];

    pub fn id(self) -> &'static str {
        match self {
            ComparatorKind::Jeon2010 => "jeon2010",
            ComparatorKind::Mashhadi2014 => "mashhadi2014",
            ComparatorKind::Deepika2015 => "deepika2015",
            ComparatorKind::Proposed => "proposed",
        }
    }

    pub fn devices(self) -> &'static [DeviceRow] {
        match self {
            ComparatorKind::Jeon2010 => topology::JEON2010,
            ComparatorKind::Mashhadi2014 => topology::MASHHADI2014,
            ComparatorKind::Deepika2015 => topology::DEEPIKA2015,
            ComparatorKind::Proposed => topology::PROPOSED,
        }
    }

    pub fn two_phase(self) -> bool {
        matches!(self, ComparatorKind::Mashhadi2014 | ComparatorKind::Proposed)
    }

    /// Clock node that is high during evaluation.
    pub fn eval_clock_node(self) -> &'static str {
        if self.two_phase() {
            "clk1"
        } else {
            "clk"
        }
    }

    /// Output nodes `(plus, minus)`: `plus` goes high when `vin > vref`.
    pub fn outputs(self) -> (&'static str, &'static str) {
        match self {
            ComparatorKind::Jeon2010 => ("outp", "outm"),
            ComparatorKind::Mashhadi2014 => ("outp", "outn"),
            ComparatorKind::Deepika2015 | ComparatorKind::Proposed => ("outn", "outp"),
        }
    }

    /// Input transistor whose gate is tied to `vin`.
    pub fn vin_device(self) -> &'static str {
        match self {
            ComparatorKind::Deepika2015 => "MF10",
            ComparatorKind::Jeon2010 => "MF2",
            ComparatorKind::Mashhadi2014 | ComparatorKind::Proposed => "MF1",
        }
    }

    /// Node levels that must hold at the end of every reset phase.
    pub fn reset_contract(self) -> &'static [(&'static str, Rail)] {
        match self {
            ComparatorKind::Jeon2010 => &[("outp", Rail::Vdd), ("outm", Rail::Vdd)],
            ComparatorKind::Mashhadi2014 => {
                &[("outp", Rail::Ground), ("outn", Rail::Ground), ("fn", Rail::Vdd), ("fp", Rail::Vdd)]
            }
            ComparatorKind::Deepika2015 => &[("fn", Rail::Vdd), ("fp", Rail::Vdd)],
            ComparatorKind::Proposed => {
                &[("outp", Rail::Ground), ("outn", Rail::Ground), ("fa", Rail::Vdd), ("fb", Rail::Vdd)]
            }
        }
    }
}

impl fmt::Display for ComparatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ComparatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jeon2010" | "jeon" | "ref11" => Ok(ComparatorKind::Jeon2010),
            "mashhadi2014" | "mashhadi" | "ref12" => Ok(ComparatorKind::Mashhadi2014),
            "deepika2015" | "deepika" | "ref13" => Ok(ComparatorKind::Deepika2015),
            "proposed" => Ok(ComparatorKind::Proposed),
            _ => Err(format!("unknown comparator '{s}' (expected jeon2010, mashhadi2014, deepika2015 or proposed)")),
        }
    }
}

/// Operating point and stimulus of one comparator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbenchConfig {
    pub vdd: f64,
    pub vcm: f64,
    pub dvin: f64,
    pub fclk: f64,
    pub duty: f64,
    pub edge_time: f64,
    /// Load on each output, farads.
    pub cload: f64,
    pub n_periods: u32,
    /// Shrinks the low window of `clk2` on both sides; 0 gives an exact
    /// complement of `clk1`.
    pub nonoverlap: f64,
    /// Per-device fin counts; keys match with or without the `M` prefix.
    pub sizing: BTreeMap<String, u32>,
}

pub const DEFAULT_NFIN_N: u32 = 2;
pub const DEFAULT_NFIN_P: u32 = 3;

impl Default for TestbenchConfig {
    fn default() -> Self {
        Self {
            vdd: 0.8,
            vcm: 0.4,
            dvin: 5e-3,
            fclk: 5e9,
            duty: 0.5,
            edge_time: 4e-12,
            cload: 1e-15,
            n_periods: 4,
            nonoverlap: 0.0,
            sizing: BTreeMap::new(),
        }
    }
}

impl TestbenchConfig {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [self.vdd, self.vcm, self.dvin, self.fclk, self.duty, self.edge_time, self.cload, self.nonoverlap]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err("testbench values must be finite".into());
        }
        if !(0.0 < self.vcm && self.vcm < self.vdd) {
            return Err(format!("need 0 < vcm < vdd (vcm = {}, vdd = {})", self.vcm, self.vdd));
        }
        if self.dvin.abs() >= self.vdd {
            return Err("|dvin| must be below vdd".into());
        }
        if self.fclk <= 0.0 {
            return Err("fclk must be positive".into());
        }
        if !(0.0 < self.duty && self.duty < 1.0) {
            return Err("duty must lie in (0, 1)".into());
        }
        if self.edge_time <= 0.0 {
            return Err("edge_time must be positive".into());
        }
        if self.cload < 0.0 || self.nonoverlap < 0.0 {
            return Err("cload and nonoverlap must be non-negative".into());
        }
        if self.n_periods == 0 {
            return Err("n_periods must be at least 1".into());
        }
        let t = self.period();
        let shortest = t * self.duty.min(1.0 - self.duty);
        if self.edge_time + 2.0 * self.nonoverlap >= shortest {
            return Err("clock edges (plus non-overlap) do not fit in a clock phase".into());
        }
        if self.sizing.values().any(|&n| n == 0) {
            return Err("sizing overrides need nfin >= 1".into());
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.fclk
    }

    pub fn vin(&self) -> f64 {
        self.vcm + 0.5 * self.dvin
    }

    pub fn vref(&self) -> f64 {
        self.vcm - 0.5 * self.dvin
    }

    /// 50% point of the `k`-th evaluation edge (clock rising).
    pub fn eval_edge(&self, k: u32) -> f64 {
        (f64::from(k) + 1.0 - self.duty) * self.period()
    }

    /// 50% point of the reset edge that ends evaluation phase `k`.
    pub fn reset_edge(&self, k: u32) -> f64 {
        f64::from(k + 1) * self.period()
    }

    /// Period used for measurement: the third, after two warm-up
    /// periods, or the last one for shorter runs.
    pub fn measure_period(&self) -> u32 {
        2.min(self.n_periods - 1)
    }

    pub fn tstop(&self) -> f64 {
        f64::from(self.n_periods) * self.period()
    }

    fn clock_pulse(&self, inverted: bool) -> Pulse {
        let t = self.period();
        let edge = self.edge_time;
        let delay = t * (1.0 - self.duty) - 0.5 * edge;
        let width = self.duty * t - edge;
        let (v1, v2) = if inverted { (self.vdd, 0.0) } else { (0.0, self.vdd) };
        let shrink = if inverted { self.nonoverlap } else { 0.0 };
        Pulse { v1, v2, delay: delay + shrink, rise: edge, fall: edge, width: width - 2.0 * shrink, period: t }
    }

    fn nfin_for(&self, name: &str, polarity: Polarity) -> u32 {
        let stripped = &name[1..];
        self.sizing
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name) || k.eq_ignore_ascii_case(stripped))
            .map(|(_, &n)| n)
            .unwrap_or(match polarity {
                Polarity::N => DEFAULT_NFIN_N,
                Polarity::P => DEFAULT_NFIN_P,
            })
    }
}

/// Comparator core plus testbench: supply, inputs, clock(s), output loads
/// and a `.tran` covering `tb.n_periods` clock periods.
pub fn build_netlist(kind: ComparatorKind, tb: &TestbenchConfig) -> Netlist {
    let mut net = Netlist::new(format!("{kind} comparator testbench"));
    let dc = |net: &mut Netlist, name: &str, node: &str, v: f64| {
        let plus = net.intern_node(node);
        net.add_source(VoltageSource { name: name.into(), plus, minus: GROUND, spec: SourceSpec::Dc(v) });
    };
    dc(&mut net, "Vdd", "vdd", tb.vdd);
    dc(&mut net, "Vin", "vin", tb.vin());
    dc(&mut net, "Vref", "vref", tb.vref());
    let clocks: &[(&str, &str, bool)] =
        if kind.two_phase() { &[("Vclk1", "clk1", false), ("Vclk2", "clk2", true)] } else { &[("Vclk", "clk", false)] };
    for &(name, node, inverted) in clocks {
        let plus = net.intern_node(node);
        let spec = SourceSpec::Pulse(tb.clock_pulse(inverted));
        net.add_source(VoltageSource { name: name.into(), plus, minus: GROUND, spec });
    }
    for &(name, polarity, d, g, s) in kind.devices() {
        let drain = net.intern_node(d);
        let gate = net.intern_node(g);
        let source = net.intern_node(s);
        let nfin = tb.nfin_for(name, polarity);
        net.add_device(DeviceInstance { name: name.into(), polarity, drain, gate, source, nfin, vth_delta: 0.0 });
    }
    let (plus, minus) = kind.outputs();
    for (name, node) in [("CLoadPlus", plus), ("CLoadMinus", minus)] {
        let node = net.intern_node(node);
        net.add_capacitor(Capacitor { name: name.into(), plus: node, minus: GROUND, farads: tb.cload });
    }
    net.tran = Some(TranDirective { step: DEFAULT_DT, stop: tb.tstop() });
    net
}
