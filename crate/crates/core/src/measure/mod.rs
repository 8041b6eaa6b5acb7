//! Figures of merit extracted from waveforms: propagation delay, average
//! supply power, power-delay product and Monte-Carlo input offset.

mod offset;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::TestbenchConfig;

pub use offset::{
    decision_at, mc_offset, mismatch_deltas, trip_point, McOptions, OffsetResult, TripSample, TRIP_RESOLUTION, TRIP_SEARCH,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("no decision after the evaluation edge at {edge:e} s")]
    NoDecision { edge: f64 },
    #[error("clock has no evaluation edge with index {index}")]
    NoClockEdge { index: usize },
    #[error("averaging window [{t0:e}, {t1:e}] s is outside the simulated range")]
    WindowOutOfRange { t0: f64, t1: f64 },
    #[error("decision does not flip over the trip-point search interval")]
    TripNotBracketed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// The `plus` output won: the circuit judged `vin > vref`.
    Plus,
    Minus,
    Undecided,
}

impl Outcome {
    pub fn id(self) -> &'static str {
        match self {
            Outcome::Plus => "plus",
            Outcome::Minus => "minus",
            Outcome::Undecided => "undecided",
        }
    }

    /// Outcome a correct comparator produces for input difference `dvin`.
    pub fn expected(dvin: f64) -> Outcome {
        if dvin > 0.0 {
            Outcome::Plus
        } else if dvin < 0.0 {
            Outcome::Minus
        } else {
            Outcome::Undecided
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub outcome: Outcome,
    /// Set exactly when `outcome` is not `Undecided`.
    pub t_decide: Option<f64>,
}

/// Interpolated times at which `trace` crosses `level` in `direction`.
pub fn crossing_times(trace: &[f64], times: &[f64], level: f64, direction: Direction) -> Vec<f64> {
    assert_eq!(trace.len(), times.len(), "trace and time axis must align");
    let mut out = Vec::new();
    for k in 1..trace.len() {
        let (a, b) = (trace[k - 1], trace[k]);
        let hit = match direction {
            Direction::Rising => a < level && b >= level,
            Direction::Falling => a > level && b <= level,
        };
        if hit {
            out.push(interpolate(times[k - 1], times[k], a, b, level));
        }
    }
    out
}

fn interpolate(t0: f64, t1: f64, a: f64, b: f64, level: f64) -> f64 {
    t0 + (level - a) / (b - a) * (t1 - t0)
}

/// First time in `(t_from, t_until]` at which `|plus - minus|` reaches
/// `threshold`, with the outcome given by the sign at that moment.
pub fn first_separation(
    plus: &[f64],
    minus: &[f64],
    times: &[f64],
    threshold: f64,
    t_from: f64,
    t_until: f64,
) -> Decision {
    let undecided = Decision { outcome: Outcome::Undecided, t_decide: None };
    let start = times.partition_point(|&t| t <= t_from);
    for k in start..times.len() {
        if times[k] > t_until {
            break;
        }
        let d = plus[k] - minus[k];
        if d.abs() >= threshold {
            let sign = d.signum();
            let mut t = times[k];
            if k > 0 {
                let prev = sign * (plus[k - 1] - minus[k - 1]);
                if prev < threshold {
                    t = interpolate(times[k - 1], times[k], prev, d.abs(), threshold);
                }
            }
            if t > t_until {
                return undecided;
            }
            let outcome = if sign > 0.0 { Outcome::Plus } else { Outcome::Minus };
            return Decision { outcome, t_decide: Some(t.max(t_from)) };
        }
    }
    undecided
}

/// Delay from the `edge_index`-th evaluation clock edge (50% of `vdd`,
/// rising) to the moment the differential output reaches 50% of `vdd`.
/// The decision must occur before the next reset edge.
pub fn propagation_delay(
    clk: &[f64],
    plus: &[f64],
    minus: &[f64],
    times: &[f64],
    vdd: f64,
    edge_index: usize,
) -> Result<(Decision, f64), MeasureError> {
    let mid = 0.5 * vdd;
    let edge = *crossing_times(clk, times, mid, Direction::Rising)
        .get(edge_index)
        .ok_or(MeasureError::NoClockEdge { index: edge_index })?;
    let reset = crossing_times(clk, times, mid, Direction::Falling)
        .into_iter()
        .find(|&t| t > edge)
        .unwrap_or(f64::INFINITY);
    let decision = first_separation(plus, minus, times, mid, edge, reset);
    match decision.t_decide {
        Some(t) => Ok((decision, t - edge)),
        None => Err(MeasureError::NoDecision { edge }),
    }
}

/// Mean of `vdd * i_supply` over `[t0, t1]`, integrating the piecewise
/// linear current exactly (trapezoidal rule with interpolated endpoints).
/// `i_supply` is the current delivered by the supply into the circuit.
pub fn average_power(i_supply: &[f64], times: &[f64], vdd: f64, window: (f64, f64)) -> Result<f64, MeasureError> {
    let (t0, t1) = window;
    let out_of_range = MeasureError::WindowOutOfRange { t0, t1 };
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(out_of_range);
    };
    let slack = 1e-9 * (last - first).abs();
    if !(t1 > t0) || t0 < first - slack || t1 > last + slack {
        return Err(out_of_range);
    }
    let (t0, t1) = (t0.max(first), t1.min(last));
    let at = |k: usize, t: f64| -> f64 {
        // Linear value on segment [k, k+1].
        let (ta, tb) = (times[k], times[k + 1]);
        if tb == ta {
            i_supply[k]
        } else {
            i_supply[k] + (i_supply[k + 1] - i_supply[k]) * (t - ta) / (tb - ta)
        }
    };
    let mut charge = 0.0;
    for k in 0..times.len().saturating_sub(1) {
        let a = times[k].max(t0);
        let b = times[k + 1].min(t1);
        if b > a {
            charge += 0.5 * (b - a) * (at(k, a) + at(k, b));
        }
    }
    Ok(vdd * charge / (t1 - t0))
}

/// One comparator's measured figures of merit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub comparator: String,
    #[serde(rename = "power_w")]
    pub power_avg: f64,
    #[serde(rename = "delay_s")]
    pub delay_prop: f64,
    #[serde(rename = "pdp_j")]
    pub pdp: f64,
    #[serde(rename = "offset_v")]
    pub offset_sigma: Option<f64>,
    pub decision: Outcome,
    pub config: TestbenchConfig,
}

impl MetricsRow {
    pub fn new(comparator: &str, power_avg: f64, delay_prop: f64, decision: Outcome, config: TestbenchConfig) -> Self {
        Self {
            comparator: comparator.to_string(),
            power_avg,
            delay_prop,
            pdp: power_avg * delay_prop,
            offset_sigma: None,
            decision,
            config,
        }
    }
}
