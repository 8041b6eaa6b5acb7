//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs sequentially with its own harness so that the reported runtimes
//! are not inflated by other tests sharing the CPU.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use compsim_core::circuits::{
    simulate, ComparatorKind, Rail, TestbenchConfig, TestbenchRun, COMPARISON_HEADER, PUBLISHED_FIGURES,
};
use compsim_core::device::{drain_current, FinFetParams};
use compsim_core::engine::{transient, SimConfig};
use compsim_core::measure::{decision_at, mc_offset, trip_point, McOptions, Outcome};
use compsim_core::netlist::{parse_netlist, Polarity};

type Check = fn() -> Result<String, String>;

const CRITERIA: [(u32, &str, Check, u64); 9] = [
    (1, "RC transient oracle", rc_oracle, 1),
    (2, "device partials, zero-bias current, P/N mirror", device_model, 1),
    (3, "functional decision, rails and hold", functional_decision, 30),
    (4, "reset contract", reset_contract, 10),
    (5, "delay and power trends", trends, 60),
    (6, "quasi-static power", quasi_static_power, 10),
    (7, "offset sanity", offset_sanity, 300),
    (8, "determinism of compare and mc-offset", determinism, 300),
    (9, "comparison report shape", report_shape, 60),
];

fn main() -> ExitCode {
    let mut failed = 0;
    for (id, name, check, limit) in CRITERIA {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(limit) => {
                Err(format!("{detail}; runtime {:.2} s exceeds {limit} s", elapsed.as_secs_f64()))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {id}: {name} [{detail}] ({:.2} s)", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id}: {name} [{why}] ({:.2} s)", elapsed.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(kind: ComparatorKind, tb: &TestbenchConfig) -> Result<TestbenchRun, String> {
    simulate(kind, tb, &SimConfig::default()).map_err(|e| e.to_string())
}

/// Index of the last sample at or before `t`.
fn at_or_before(times: &[f64], t: f64) -> usize {
    times.partition_point(|&x| x <= t).saturating_sub(1)
}

const DVIN_GRID: [f64; 5] = [5e-3, 10e-3, 20e-3, 50e-3, 100e-3];

fn rc_oracle() -> Result<String, String> {
    let (r, c, vdd) = (10e3, 1e-15, 0.8);
    let tau = r * c;
    let net = parse_netlist("* rc\nV1 in 0 dc 0.8\nR1 in out 10k\nC1 out 0 1f").map_err(|e| e.to_string())?;
    let exact = |t: f64| vdd * (1.0 - (-t / tau).exp());
    let sim = |dt: f64| -> Result<(Vec<f64>, Vec<f64>), String> {
        let cfg = SimConfig { dt: Some(dt), tstop: Some(3.0 * tau), ..Default::default() };
        let w = transient(&net, &cfg).map_err(|e| e.to_string())?;
        Ok((w.times().to_vec(), w.node_trace("out").ok_or("no node out")?.to_vec()))
    };
    let max_err = |(t, v): &(Vec<f64>, Vec<f64>)| t.iter().zip(v).map(|(&t, &v)| (v - exact(t)).abs()).fold(0.0, f64::max);

    let dt = tau / 100.0;
    let coarse = sim(dt)?;
    let mut worst_rel: f64 = 0.0;
    for target in [tau, 3.0 * tau] {
        let k = coarse.0.iter().position(|&x| (x - target).abs() < 1e-3 * dt).ok_or("time grid misses RC multiple")?;
        let rel = (coarse.1[k] - exact(target)).abs() / exact(target);
        ensure(rel < 1e-3, || format!("relative error {rel:e} at t = {target:e}"))?;
        worst_rel = worst_rel.max(rel);
    }
    let ratio = max_err(&coarse) / max_err(&sim(dt / 2.0)?);
    ensure((3.0..=5.0).contains(&ratio), || format!("error ratio on halving dt is {ratio:.3}"))?;
    Ok(format!("worst rel err {worst_rel:.2e}, halving ratio {ratio:.3}"))
}

fn device_model() -> Result<String, String> {
    const H: f64 = 1e-6;
    let grid: Vec<f64> = (0..=32).map(|i| -0.8 + 0.05 * f64::from(i)).collect();
    let rel = |a: f64, n: f64| {
        let scale = a.abs().max(n.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - n).abs() / scale
        }
    };
    let mut worst: f64 = 0.0;
    for (pol, card) in [(Polarity::N, FinFetParams::default_n()), (Polarity::P, FinFetParams::default_p())] {
        let id = |vg: f64, vd: f64, vs: f64| drain_current(pol, vg, vd, vs, 2, 0.0, &card).id;
        for &vgs in &grid {
            for &vds in &grid {
                let e = drain_current(pol, vgs, vds, 0.0, 2, 0.0, &card);
                let gm = (id(vgs + H, vds, 0.0) - id(vgs - H, vds, 0.0)) / (2.0 * H);
                let gds = (id(vgs, vds + H, 0.0) - id(vgs, vds - H, 0.0)) / (2.0 * H);
                let gms = (id(vgs, vds, H) - id(vgs, vds, -H)) / (2.0 * H);
                for (name, a, n) in [("gm", e.gm, gm), ("gds", e.gds, gds), ("gms", e.gms, gms)] {
                    let err = rel(a, n);
                    ensure(err < 1e-5, || format!("{pol:?} {name} at vgs={vgs:.2} vds={vds:.2}: rel err {err:e}"))?;
                    worst = worst.max(err);
                }
                let zero = drain_current(pol, vgs + 0.3, 0.3, 0.3, 2, 0.0, &card).id;
                ensure(zero == 0.0, || format!("{pol:?} id(vds=0) = {zero:e} at vgs={vgs:.2}"))?;
            }
        }
    }
    let card = FinFetParams::default_p();
    for &a in &grid {
        for &b in &grid {
            let p = drain_current(Polarity::P, a, b, 0.1, 3, 0.002, &card);
            let n = drain_current(Polarity::N, -a, -b, -0.1, 3, 0.002, &card);
            ensure(p.id == -n.id, || format!("mirror broken at ({a:.2}, {b:.2}): {:e} vs {:e}", p.id, -n.id))?;
        }
    }
    Ok(format!("worst FD rel err {worst:.2e}"))
}

fn functional_decision() -> Result<String, String> {
    let mut worst_high = f64::INFINITY;
    let mut worst_low = f64::NEG_INFINITY;
    let mut cases = 0;
    for kind in ComparatorKind::ALL {
        for dvin in DVIN_GRID.iter().flat_map(|&v| [v, -v]) {
            let tb = TestbenchConfig { dvin, ..Default::default() };
            let r = run(kind, &tb)?;
            let times = r.times();
            let (plus, minus) = (r.plus(), r.minus());
            let expected = Outcome::expected(dvin);
            for k in 0..tb.n_periods {
                let tag = || format!("{kind} dvin={:+} mV period {k}", dvin * 1e3);
                let (d, _) = r.decision(k).map_err(|e| format!("{}: {e}", tag()))?;
                ensure(d.outcome == expected, || format!("{}: decided {:?}", tag(), d.outcome))?;
                let t_decide = d.t_decide.ok_or_else(|| format!("{}: no decision time", tag()))?;
                let end = at_or_before(times, tb.reset_edge(k) - 0.5 * tb.edge_time);
                let start = at_or_before(times, t_decide) + 1;
                let sign = if expected == Outcome::Plus { 1.0 } else { -1.0 };
                let flip = (start..=end).find(|&i| (plus[i] - minus[i]) * sign <= 0.0);
                ensure(flip.is_none(), || format!("{}: outputs cross at t = {:e}", tag(), times[flip.unwrap()]))?;
                let (high, low) = if sign > 0.0 { (plus[end], minus[end]) } else { (minus[end], plus[end]) };
                ensure(high >= 0.9 * tb.vdd && low <= 0.1 * tb.vdd, || {
                    format!("{}: outputs {high:.3} V / {low:.3} V at end of evaluation", tag())
                })?;
                worst_high = worst_high.min(high);
                worst_low = worst_low.max(low);
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} evaluations, lowest high {worst_high:.3} V, highest low {worst_low:.3} V"))
}

fn reset_contract() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for kind in ComparatorKind::ALL {
        for dvin in [5e-3, -5e-3] {
            let tb = TestbenchConfig { dvin, ..Default::default() };
            let r = run(kind, &tb)?;
            for k in 0..tb.n_periods {
                let i = at_or_before(r.times(), tb.eval_edge(k) - 0.5 * tb.edge_time);
                for &(node, rail) in kind.reset_contract() {
                    let target = match rail {
                        Rail::Vdd => tb.vdd,
                        Rail::Ground => 0.0,
                    };
                    let err = (r.trace(node)[i] - target).abs();
                    ensure(err <= 5e-3, || {
                        format!("{kind} dvin={:+} mV period {k}: {node} is {:.1} mV from {rail:?}", dvin * 1e3, err * 1e3)
                    })?;
                    worst = worst.max(err);
                }
            }
        }
    }
    Ok(format!("worst deviation {:.3} mV", worst * 1e3))
}

fn trends() -> Result<String, String> {
    let mut summary = Vec::new();
    for kind in ComparatorKind::ALL {
        let mut delays = Vec::new();
        for dvin in DVIN_GRID {
            let tb = TestbenchConfig { dvin, ..Default::default() };
            let (_, delay) = run(kind, &tb)?.decision(tb.measure_period()).map_err(|e| format!("{kind}: {e}"))?;
            delays.push(delay);
        }
        ensure(delays.windows(2).all(|w| w[1] < w[0]), || {
            let ps: Vec<String> = delays.iter().map(|d| format!("{:.2}", d * 1e12)).collect();
            format!("{kind}: delay not strictly decreasing in dvin: {} ps", ps.join(", "))
        })?;
        let mut power = Vec::new();
        for vdd in [0.7, 0.9] {
            let tb = TestbenchConfig { vdd, vcm: 0.5 * vdd, ..Default::default() };
            power.push(run(kind, &tb)?.period_power(tb.measure_period()).map_err(|e| format!("{kind}: {e}"))?);
        }
        ensure(power[1] > power[0], || {
            format!("{kind}: power {:.2} uW at 0.9 V vs {:.2} uW at 0.7 V", power[1] * 1e6, power[0] * 1e6)
        })?;
        summary.push(format!(
            "{kind} {:.1}->{:.1} ps, {:.1}<{:.1} uW",
            delays[0] * 1e12,
            delays[4] * 1e12,
            power[0] * 1e6,
            power[1] * 1e6
        ));
    }
    Ok(summary.join("; "))
}

fn quasi_static_power() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for kind in ComparatorKind::ALL {
        let tb = TestbenchConfig::default();
        let r = run(kind, &tb)?;
        let times = r.times();
        let power: Vec<f64> = r.supply_current().iter().map(|i| i * tb.vdd).collect();
        for k in 0..tb.n_periods {
            let in_window = |a: f64, b: f64| (0..times.len()).filter(move |&i| times[i] >= a && times[i] <= b);
            let peak = in_window(f64::from(k) * tb.period(), f64::from(k + 1) * tb.period())
                .map(|i| power[i])
                .fold(0.0, f64::max);
            let eval_start = tb.eval_edge(k) + 0.5 * tb.edge_time;
            let eval_end = tb.reset_edge(k) - 0.5 * tb.edge_time;
            let late = in_window(eval_end - 0.2 * (eval_end - eval_start), eval_end)
                .map(|i| power[i].abs())
                .fold(0.0, f64::max);
            let share = late / peak;
            ensure(peak > 0.0 && share < 0.05, || {
                format!("{kind} period {k}: late power {:.2} uW is {:.1}% of peak", late * 1e6, share * 100.0)
            })?;
            worst = worst.max(share);
        }
    }
    Ok(format!("worst late/peak {:.3}%", worst * 100.0))
}

fn offset_sanity() -> Result<String, String> {
    let tb = TestbenchConfig::default();
    let cfg = SimConfig::default();
    let mut notes = Vec::new();

    for kind in ComparatorKind::ALL {
        let opts = McOptions { sigma_vth0: 0.0, n_samples: 2, seed: 1 };
        let res = mc_offset(kind, &tb, &cfg, &opts)?;
        ensure(res.failures() == 0, || format!("{kind}: {} samples without trip point", res.failures()))?;
        for trip in res.trip_points() {
            ensure(trip.abs() <= 0.05e-3, || format!("{kind}: trip {:.4} mV without mismatch", trip * 1e3))?;
        }
        let sigma = res.offset_sigma.unwrap_or(f64::NAN);
        ensure(sigma < 0.05e-3, || format!("{kind}: offset {:.4} mV without mismatch", sigma * 1e3))?;
    }
    notes.push("zero mismatch trips at 0".to_string());

    // A threshold increase on the vin-side input device is referred to the
    // input as a positive trip point.
    let shift = 5e-3;
    let mut trips = Vec::new();
    for kind in ComparatorKind::ALL {
        let deltas = BTreeMap::from([(kind.vin_device().to_string(), shift)]);
        let trip = trip_point(kind, &tb, &cfg, &deltas).map_err(|e| e.to_string())?;
        ensure((trip - shift).abs() <= 0.2 * shift, || format!("{kind}: trip {:.3} mV for +5 mV shift", trip * 1e3))?;
        let below = decision_at(kind, &tb, &cfg, &deltas, 0.8 * shift).map_err(|e| e.to_string())?;
        let above = decision_at(kind, &tb, &cfg, &deltas, 1.2 * shift).map_err(|e| e.to_string())?;
        ensure(below == Outcome::Minus && above == Outcome::Plus, || {
            format!("{kind}: direct sweep gives {below:?} at 4 mV and {above:?} at 6 mV")
        })?;
        trips.push(format!("{kind} {:.3}", trip * 1e3));
    }
    notes.push(format!("+5 mV shift trips at {} mV", trips.join(", ")));

    let kind = ComparatorKind::Proposed;
    let base = McOptions { sigma_vth0: 2e-3, n_samples: 200, seed: 2024 };
    let single = mc_offset(kind, &tb, &cfg, &base)?;
    let double = mc_offset(kind, &tb, &cfg, &McOptions { sigma_vth0: 4e-3, ..base })?;
    let failures = single.failures() + double.failures();
    ensure(failures == 0, || format!("{failures} Monte-Carlo samples without trip point"))?;
    let (s1, s2) = (single.offset_sigma.ok_or("no offset at 2 mV")?, double.offset_sigma.ok_or("no offset at 4 mV")?);
    let ratio = s2 / s1;
    ensure((1.8..=2.2).contains(&ratio), || {
        format!("offset {:.3} mV -> {:.3} mV, ratio {ratio:.3}", s1 * 1e3, s2 * 1e3)
    })?;
    notes.push(format!("offset {:.3} -> {:.3} mV, ratio {ratio:.3}", s1 * 1e3, s2 * 1e3));
    Ok(notes.join("; "))
}

fn compsim(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_compsim"))
        .args(args)
        .env_remove("COMPSIM_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("compsim {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let mut checked = Vec::new();
    for (name, args) in [
        ("compare", vec!["compare", "--sigma-vth", "2m", "--samples", "4", "--seed", "11"]),
        ("mc-offset", vec!["mc-offset", "--circuit", "proposed", "--sigma-vth", "2m", "--samples", "16", "--seed", "11"]),
    ] {
        let (a, b) = (path(&format!("{name}-a.csv")), path(&format!("{name}-b.csv")));
        let out_a = compsim(&[args.as_slice(), &["--out", &a]].concat())?;
        let out_b = compsim(&[args.as_slice(), &["--out", &b]].concat())?;
        let (csv_a, csv_b) = (read(Path::new(&a))?, read(Path::new(&b))?);
        ensure(csv_a == csv_b, || format!("{name}: CSVs differ between reruns"))?;
        ensure(out_a == out_b, || format!("{name}: JSON summaries differ between reruns"))?;
        checked.push(format!("{name} {} bytes", csv_a.len()));
    }
    Ok(format!("identical reruns: {}", checked.join(", ")))
}

fn report_shape() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv_path = dir.path().join("compare.csv");
    compsim(&["compare", "--out", &csv_path.to_string_lossy()])?;
    let text = String::from_utf8(read(&csv_path)?).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    ensure(lines.len() == 5, || format!("expected header plus 4 rows, got {} lines", lines.len()))?;
    ensure(lines[0] == COMPARISON_HEADER, || format!("unexpected header '{}'", lines[0]))?;
    for ((line, kind), (ref_kind, published)) in lines[1..].iter().zip(ComparatorKind::ALL).zip(PUBLISHED_FIGURES) {
        let cells: Vec<&str> = line.split(',').collect();
        ensure(cells.len() == 11, || format!("row '{line}' has {} cells", cells.len()))?;
        ensure(cells[0] == kind.id() && ref_kind == kind, || format!("row '{line}' out of order"))?;
        ensure(cells[6] == "ok", || format!("{kind}: status {}", cells[6]))?;
        let num = |i: usize| cells[i].parse::<f64>().map_err(|_| format!("{kind}: cell {i} '{}' not numeric", cells[i]));
        let (power, delay, pdp) = (num(1)?, num(2)?, num(3)?);
        ensure(power > 0.0 && delay > 0.0, || format!("{kind}: power {power:e}, delay {delay:e}"))?;
        ensure((pdp - power * delay).abs() <= 1e-12 * pdp.abs(), || {
            format!("{kind}: pdp {pdp:e} != power x delay {:e}", power * delay)
        })?;
        let expected = [published.power_uw, published.delay_ps, published.offset_mv, published.pdp_fj].map(|v| v.to_string());
        ensure(cells[7..] == expected, || format!("{kind}: reference columns {:?}", &cells[7..]))?;
    }
    ensure(lines[1].ends_with(",150.11,12.15,1.55,1.82") && lines[4].ends_with(",73.36,12.63,1.69,0.926"), || {
        "reference columns not verbatim".to_string()
    })?;
    Ok("4 rows in report order".to_string())
}
