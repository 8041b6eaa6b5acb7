use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_netlist, ComparatorKind, TestbenchConfig};
use crate::engine::{transient, SimConfig, SimError, WaveformSet};
use crate::measure::{average_power, propagation_delay, Decision, MeasureError, MetricsRow};
use crate::netlist::Netlist;

/// Supply source name used by every built-in testbench.
pub const SUPPLY: &str = "Vdd";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunFailure {
    #[error("invalid testbench: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{comparator}: {kind}")]
pub struct RunError {
    pub comparator: String,
    pub kind: RunFailure,
}

impl RunError {
    fn new(comparator: impl fmt::Display, kind: impl Into<RunFailure>) -> Self {
        Self { comparator: comparator.to_string(), kind: kind.into() }
    }
}

/// A simulated built-in comparator together with its stimulus.
#[derive(Debug, Clone)]
pub struct TestbenchRun {
    pub kind: ComparatorKind,
    pub tb: TestbenchConfig,
    pub netlist: Netlist,
    pub waves: WaveformSet,
}

impl TestbenchRun {
    /// Voltage trace of a named node; panics on an unknown node.
    pub fn trace(&self, node: &str) -> &[f64] {
        self.waves.node_trace(node).unwrap_or_else(|| panic!("no node '{node}' in {} testbench", self.kind))
    }

    pub fn times(&self) -> &[f64] {
        self.waves.times()
    }

    pub fn clock(&self) -> &[f64] {
        self.trace(self.kind.eval_clock_node())
    }

    pub fn plus(&self) -> &[f64] {
        self.trace(self.kind.outputs().0)
    }

    pub fn minus(&self) -> &[f64] {
        self.trace(self.kind.outputs().1)
    }

    /// Current delivered by the supply into the circuit.
    pub fn supply_current(&self) -> Vec<f64> {
        self.waves.supply_current(SUPPLY).expect("testbench has a supply source")
    }

    /// Decision and delay measured from evaluation edge `k`.
    pub fn decision(&self, k: u32) -> Result<(Decision, f64), MeasureError> {
        propagation_delay(self.clock(), self.plus(), self.minus(), self.times(), self.tb.vdd, k as usize)
    }

    /// Average supply power over clock period `k`, reset phase first.
    pub fn period_power(&self, k: u32) -> Result<f64, MeasureError> {
        let t = self.tb.period();
        let window = (f64::from(k) * t, f64::from(k + 1) * t);
        average_power(&self.supply_current(), self.times(), self.tb.vdd, window)
    }

    /// Delay from the first evaluation edge after warm-up and the power of
    /// the period containing it.
    pub fn metrics(&self) -> Result<MetricsRow, MeasureError> {
        let m = self.tb.measure_period();
        let (decision, delay) = self.decision(m)?;
        let power = self.period_power(m)?;
        Ok(MetricsRow::new(self.kind.id(), power, delay, decision.outcome, self.tb.clone()))
    }
}

/// Builds and simulates one comparator testbench.
pub fn simulate(kind: ComparatorKind, tb: &TestbenchConfig, cfg: &SimConfig) -> Result<TestbenchRun, RunError> {
    tb.validate().map_err(|e| RunError::new(kind, RunFailure::Invalid(e)))?;
    let netlist = build_netlist(kind, tb);
    let waves = transient(&netlist, cfg).map_err(|e| RunError::new(kind, e))?;
    Ok(TestbenchRun { kind, tb: tb.clone(), netlist, waves })
}

pub fn run_metrics(kind: ComparatorKind, tb: &TestbenchConfig, cfg: &SimConfig) -> Result<MetricsRow, RunError> {
    simulate(kind, tb, cfg)?.metrics().map_err(|e| RunError::new(kind, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Dvin,
    Vcm,
    Vdd,
}

/// Input difference held while the common mode is swept.
pub const VCM_SWEEP_DVIN: f64 = 10e-3;

impl Axis {
    pub fn id(self) -> &'static str {
        match self {
            Axis::Dvin => "dvin",
            Axis::Vcm => "vcm",
            Axis::Vdd => "vdd",
        }
    }

    /// Testbench for one sweep point.
    pub fn apply(self, tb: &TestbenchConfig, value: f64) -> TestbenchConfig {
        let mut tb = tb.clone();
        match self {
            Axis::Dvin => tb.dvin = value,
            Axis::Vcm => {
                tb.vcm = value;
                tb.dvin = VCM_SWEEP_DVIN;
            }
            Axis::Vdd => {
                tb.vdd = value;
                tb.vcm = 0.5 * value;
            }
        }
        tb
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dvin" => Ok(Axis::Dvin),
            "vcm" => Ok(Axis::Vcm),
            "vdd" => Ok(Axis::Vdd),
            _ => Err(format!("unknown sweep axis '{s}' (expected dvin, vcm or vdd)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Delay,
    Power,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "delay" => Ok(Metric::Delay),
            "power" => Ok(Metric::Power),
            _ => Err(format!("unknown metric '{s}' (expected delay or power)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub metrics: Vec<Metric>,
}

impl SweepSpec {
    pub fn new(axis: Axis, values: Vec<f64>) -> Self {
        Self { axis, values, metrics: vec![Metric::Delay, Metric::Power] }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err("sweep values must be finite".into());
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err("sweep values must be strictly increasing".into());
        }
        if self.metrics.is_empty() {
            return Err("sweep needs at least one metric".into());
        }
        Ok(())
    }

    fn wants(&self, metric: Metric) -> bool {
        self.metrics.contains(&metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: ComparatorKind,
    pub axis: Axis,
    pub axis_value: f64,
    pub delay: Option<f64>,
    pub power: Option<f64>,
    pub result: Result<MetricsRow, RunError>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }

    pub fn pdp(&self) -> Option<f64> {
        Some(self.power? * self.delay?)
    }
}

/// One row per sweep value, in the order of `spec.values`. Failed points
/// carry their error instead of being dropped.
pub fn run_sweep(
    kind: ComparatorKind,
    spec: &SweepSpec,
    tb: &TestbenchConfig,
    cfg: &SimConfig,
) -> Result<Vec<SweepRow>, String> {
    spec.validate()?;
    Ok(spec
        .values
        .par_iter()
        .map(|&value| {
            let result = run_metrics(kind, &spec.axis.apply(tb, value), cfg);
            let pick = |m: Metric, f: fn(&MetricsRow) -> f64| {
                result.as_ref().ok().filter(|_| spec.wants(m)).map(f)
            };
            SweepRow {
                kind,
                axis: spec.axis,
                axis_value: value,
                delay: pick(Metric::Delay, |r| r.delay_prop),
                power: pick(Metric::Power, |r| r.power_avg),
                result,
            }
        })
        .collect())
}

/// `kind,axis,axis_value,delay_s,power_w,pdp_j,status`; metrics not
/// requested or not available are left empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "kind,axis,axis_value,delay_s,power_w,pdp_j,status")?;
    let cell = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
    for row in rows {
        let status = match &row.result {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error: {}", e.kind).replace([',', '\n'], ";"),
        };
        writeln!(
            w,
            "{},{},{:e},{},{},{},{}",
            row.kind,
            row.axis,
            row.axis_value,
            cell(row.delay),
            cell(row.power),
            cell(row.pdp()),
            status
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_application() {
        let tb = TestbenchConfig::default();
        assert_eq!(Axis::Dvin.apply(&tb, 0.02).dvin, 0.02);
        let v = Axis::Vcm.apply(&tb, 0.3);
        assert_eq!((v.vcm, v.dvin), (0.3, 10e-3));
        let v = Axis::Vdd.apply(&tb, 0.9);
        assert_eq!((v.vdd, v.vcm, v.dvin), (0.9, 0.45, tb.dvin));
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(Axis::Dvin, vec![]).validate().is_err());
        assert!(SweepSpec::new(Axis::Dvin, vec![5e-3, 5e-3]).validate().is_err());
        assert!(SweepSpec::new(Axis::Dvin, vec![10e-3, 5e-3]).validate().is_err());
        assert!(SweepSpec::new(Axis::Vcm, vec![0.3, 0.4]).validate().is_ok());
    }

    #[test]
    fn invalid_point_is_embedded() {
        // vcm above vdd fails testbench validation without simulating.
        let spec = SweepSpec::new(Axis::Vcm, vec![0.9, 1.0]);
        let rows = run_sweep(ComparatorKind::Proposed, &spec, &TestbenchConfig::default(), &SimConfig::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| matches!(r.result, Err(RunError { kind: RunFailure::Invalid(_), .. }))));
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), 7, "{line}");
            assert!(line.starts_with("proposed,vcm,"));
        }
    }
}
