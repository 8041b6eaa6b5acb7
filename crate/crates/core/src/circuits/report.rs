use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use super::{run_metrics, ComparatorKind, RunError, TestbenchConfig};
use crate::engine::SimConfig;
use crate::measure::{mc_offset, McOptions, MetricsRow};

/// Published figures for one comparator, in the published units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedFigures {
    pub power_uw: f64,
    pub delay_ps: f64,
    pub offset_mv: f64,
    pub pdp_fj: f64,
}

/// Reference figures at 0.8 V, 5 mV and 5 GHz, in report order. Shown
/// next to measured values for context only.
pub const PUBLISHED_FIGURES: [(ComparatorKind, PublishedFigures); 4] = [
    (ComparatorKind::Jeon2010, PublishedFigures { power_uw: 150.11, delay_ps: 12.15, offset_mv: 1.55, pdp_fj: 1.82 }),
    (ComparatorKind::Mashhadi2014, PublishedFigures { power_uw: 114.47, delay_ps: 16.81, offset_mv: 1.82, pdp_fj: 1.92 }),
    (ComparatorKind::Deepika2015, PublishedFigures { power_uw: 222.18, delay_ps: 16.93, offset_mv: 3.34, pdp_fj: 3.76 }),
    (ComparatorKind::Proposed, PublishedFigures { power_uw: 73.36, delay_ps: 12.63, offset_mv: 1.69, pdp_fj: 0.926 }),
];

impl PublishedFigures {
    pub fn of(kind: ComparatorKind) -> PublishedFigures {
        PUBLISHED_FIGURES.iter().find(|(k, _)| *k == kind).map(|(_, r)| *r).expect("every kind has a reference")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub kind: ComparatorKind,
    pub metrics: Result<MetricsRow, RunError>,
    /// Monte-Carlo samples whose trip point could not be found.
    pub offset_failures: usize,
    pub published: PublishedFigures,
}

/// Metrics of all four comparators in report order, with the Monte-Carlo
/// offset when `mc` is given. Failures stay in their row.
pub fn comparison_table(tb: &TestbenchConfig, cfg: &SimConfig, mc: Option<&McOptions>) -> Vec<ComparisonRow> {
    ComparatorKind::ALL
        .par_iter()
        .map(|&kind| {
            let mut metrics = run_metrics(kind, tb, cfg);
            let mut offset_failures = 0;
            if let (Ok(row), Some(opts)) = (metrics.as_mut(), mc) {
                if let Ok(res) = mc_offset(kind, tb, cfg, opts) {
                    row.offset_sigma = res.offset_sigma;
                    offset_failures = res.failures();
                } else {
                    offset_failures = opts.n_samples as usize;
                }
            }
            ComparisonRow { kind, metrics, offset_failures, published: PublishedFigures::of(kind) }
        })
        .collect()
}

pub const COMPARISON_HEADER: &str = "comparator,power_w,delay_s,pdp_j,offset_v,decision,status,\
published_power_uw,published_delay_ps,published_offset_mv,published_pdp_fj";

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{COMPARISON_HEADER}")?;
    for row in rows {
        let measured = match &row.metrics {
            Ok(m) => {
                let offset = m.offset_sigma.map(|v| format!("{v:e}")).unwrap_or_default();
                format!("{:e},{:e},{:e},{offset},{},ok", m.power_avg, m.delay_prop, m.pdp, m.decision.id())
            }
            Err(e) => format!(",,,,,error: {}", e.kind.to_string().replace([',', '\n'], ";")),
        };
        let p = row.published;
        writeln!(w, "{},{measured},{},{},{},{}", row.kind, p.power_uw, p.delay_ps, p.offset_mv, p.pdp_fj)?;
    }
    Ok(())
}
