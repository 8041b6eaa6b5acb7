//! Monte-Carlo input-offset characterization by trip-point bisection.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{first_separation, MeasureError, Outcome};
use crate::circuits::{build_netlist, ComparatorKind, RunError, RunFailure, TestbenchConfig};
use crate::engine::{transient_with, SimConfig};

/// Bisection interval for the trip point, volts.
pub const TRIP_SEARCH: (f64, f64) = (-50e-3, 50e-3);
/// Bisection stops once the bracket is narrower than this.
pub const TRIP_RESOLUTION: f64 = 0.05e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub sigma_vth0: f64,
    pub n_samples: u32,
    pub seed: u64,
}

impl McOptions {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_samples == 0 {
            return Err("n_samples must be at least 1".into());
        }
        if !(self.sigma_vth0 >= 0.0 && self.sigma_vth0.is_finite()) {
            return Err("sigma_vth0 must be a finite non-negative voltage".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripSample {
    pub sample: u32,
    pub trip: Result<f64, RunError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetResult {
    pub samples: Vec<TripSample>,
    /// Sample standard deviation of the bracketed trip points; zero for a
    /// single point and `None` when every sample failed.
    pub offset_sigma: Option<f64>,
}

impl OffsetResult {
    pub fn trip_points(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.trip.as_ref().ok().copied()).collect()
    }

    pub fn failures(&self) -> usize {
        self.samples.iter().filter(|s| s.trip.is_err()).count()
    }

    /// `sample,trip_v` per sample (empty `trip_v` for failed samples)
    /// followed by an `offset_sigma` summary row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "sample,trip_v")?;
        for s in &self.samples {
            match &s.trip {
                Ok(v) => writeln!(w, "{},{v:e}", s.sample)?,
                Err(_) => writeln!(w, "{},", s.sample)?,
            }
        }
        match self.offset_sigma {
            Some(v) => writeln!(w, "offset_sigma,{v:e}"),
            None => writeln!(w, "offset_sigma,"),
        }
    }
}

/// Threshold perturbations of one Monte-Carlo sample: every device gets
/// `z * sigma_vth0 / sqrt(nfin)` with `z` standard normal, drawn from the
/// stream `sample` of a generator seeded with `seed`.
pub fn mismatch_deltas(kind: ComparatorKind, tb: &TestbenchConfig, opts: &McOptions, sample: u32) -> BTreeMap<String, f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    rng.set_stream(u64::from(sample));
    build_netlist(kind, tb)
        .devices
        .iter()
        .map(|d| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (d.name.clone(), z * opts.sigma_vth0 / f64::from(d.nfin).sqrt())
        })
        .collect()
}

/// Decision of a single evaluation phase at input difference `dvin`
/// with the given threshold perturbations. The run stops as soon as the
/// outputs have separated.
pub fn decision_at(
    kind: ComparatorKind,
    tb: &TestbenchConfig,
    cfg: &SimConfig,
    deltas: &BTreeMap<String, f64>,
    dvin: f64,
) -> Result<Outcome, RunError> {
    let err = |kind_: RunFailure| RunError { comparator: kind.id().to_string(), kind: kind_ };
    let tb = TestbenchConfig { dvin, n_periods: 1, ..tb.clone() };
    tb.validate().map_err(|e| err(RunFailure::Invalid(e)))?;
    let mut net = build_netlist(kind, &tb);
    for (name, &dv) in deltas {
        match net.device_mut(name) {
            Some(d) => d.vth_delta = dv,
            None => return Err(err(RunFailure::Invalid(format!("no device named {name}")))),
        }
    }
    let (plus, minus) = kind.outputs();
    let (p, m) = (net.node(plus).expect("plus output"), net.node(minus).expect("minus output"));
    let (edge, reset) = (tb.eval_edge(0), tb.reset_edge(0));
    let threshold = 0.5 * tb.vdd;
    let waves = transient_with(&net, cfg, |t, v| {
        if t > edge && (v[p] - v[m]).abs() >= threshold {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .map_err(|e| err(e.into()))?;
    let d = first_separation(waves.voltage(p), waves.voltage(m), waves.times(), threshold, edge, reset);
    Ok(d.outcome)
}

/// Input difference at which the decision flips, by bisection over
/// [`TRIP_SEARCH`]. A threshold increase on the `vin` input device moves
/// the trip point up by about the same amount.
pub fn trip_point(
    kind: ComparatorKind,
    tb: &TestbenchConfig,
    cfg: &SimConfig,
    deltas: &BTreeMap<String, f64>,
) -> Result<f64, RunError> {
    let (mut lo, mut hi) = TRIP_SEARCH;
    let not_bracketed = || RunError { comparator: kind.id().to_string(), kind: MeasureError::TripNotBracketed.into() };
    if decision_at(kind, tb, cfg, deltas, lo)? != Outcome::Minus || decision_at(kind, tb, cfg, deltas, hi)? != Outcome::Plus {
        return Err(not_bracketed());
    }
    while hi - lo > TRIP_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        match decision_at(kind, tb, cfg, deltas, mid)? {
            Outcome::Plus => hi = mid,
            Outcome::Minus => lo = mid,
            Outcome::Undecided => return Ok(mid),
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monte-Carlo offset: one trip point per mismatch sample. Samples run in
/// parallel; each draws from its own substream, so the result does not
/// depend on scheduling.
pub fn mc_offset(
    kind: ComparatorKind,
    tb: &TestbenchConfig,
    cfg: &SimConfig,
    opts: &McOptions,
) -> Result<OffsetResult, String> {
    opts.validate()?;
    tb.validate()?;
    let samples: Vec<TripSample> = (0..opts.n_samples)
        .into_par_iter()
        .map(|sample| {
            let deltas = mismatch_deltas(kind, tb, opts, sample);
            TripSample { sample, trip: trip_point(kind, tb, cfg, &deltas) }
        })
        .collect();
    let trips: Vec<f64> = samples.iter().filter_map(|s| s.trip.as_ref().ok().copied()).collect();
    Ok(OffsetResult { offset_sigma: sample_std(&trips), samples })
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    match xs.len() {
        0 => None,
        1 => Some(0.0),
        n => {
            let mean = xs.iter().sum::<f64>() / n as f64;
            let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            Some((ss / (n - 1) as f64).sqrt())
        }
    }
}
