use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn compsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compsim"))
        .args(args)
        .env_remove("COMPSIM_CONFIG")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const INVERTER: &str = "* inverter\nVdd vdd 0 dc 0.8\nVin in 0 pulse(0 0.8 5p 2p 2p 20p 50p)\n\
                        M1 out in 0 type=n nfin=2\nM2 out in vdd type=p nfin=3\nC1 out 0 1f\n.tran 0.05p 100p\n";

#[test]
fn parse_summarizes_netlist() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inv.sp");
    fs::write(&path, INVERTER).unwrap();
    let out = compsim(&["parse", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("2 devices"), "{text}");
    assert!(text.contains("2 sources"), "{text}");
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.sp");
    fs::write(&path, "* bad\nVdd vdd 0 dc 0.8\nM1 a b 0 type=n nfin=0\n").unwrap();
    let out = compsim(&["parse", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let missing = compsim(&["parse", dir.path().join("none.sp").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn run_builtin_reports_metrics() {
    let v = json(&compsim(&["run", "--circuit", "proposed"]));
    assert_eq!(v["comparator"], "proposed");
    assert_eq!(v["decision"], "plus");
    let (p, d, pdp) = (v["power_w"].as_f64().unwrap(), v["delay_s"].as_f64().unwrap(), v["pdp_j"].as_f64().unwrap());
    assert!(p > 0.0 && d > 0.0);
    assert!((pdp - p * d).abs() <= 1e-12 * pdp);
    assert_eq!(v["config"]["vdd"], 0.8);
}

#[test]
fn run_negative_input_decides_minus_and_writes_waves() {
    let dir = tempfile::tempdir().unwrap();
    let waves = dir.path().join("w.csv");
    let v = json(&compsim(&["run", "--circuit", "jeon", "--dvin", "-5m", "--waves", waves.to_str().unwrap()]));
    assert_eq!(v["decision"], "minus");
    let text = fs::read_to_string(&waves).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("time_s,"), "{header}");
    assert!(header.contains("i(Vdd)"), "{header}");
    assert!(text.lines().count() > 100);
}

#[test]
fn run_netlist_with_probes() {
    // RC driven by the clock: the probe separates from ground once the
    // capacitor reaches vdd/2, about tau*ln2 after the 50% clock point.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rc.sp");
    fs::write(
        &path,
        "* rc probe\nVclk clk 0 pulse(0 0.8 99p 2p 2p 98p 200p)\nR1 clk a 10k\nC1 a 0 1f\nR2 z 0 1k\n.tran 0.05p 200p\n",
    )
    .unwrap();
    let v = json(&compsim(&[
        "run", "--netlist", path.to_str().unwrap(), "--plus", "a", "--minus", "z", "--supply", "Vclk", "--periods", "1",
    ]));
    assert_eq!(v["comparator"], "rc");
    assert_eq!(v["decision"], "plus");
    let delay = v["delay_s"].as_f64().unwrap();
    let tau_ln2 = 10e-12 * std::f64::consts::LN_2;
    assert!((delay - tau_ln2).abs() < 1.5e-12, "delay {delay:e}");
    assert!(v["power_w"].as_f64().unwrap() > 0.0);

    let out = compsim(&["run", "--netlist", path.to_str().unwrap(), "--plus", "nope", "--minus", "z"]);
    assert_eq!(out.status.code(), Some(1));
    // The default four-period measurement finds no third clock edge.
    let out = compsim(&["run", "--netlist", path.to_str().unwrap(), "--plus", "a", "--minus", "z", "--supply", "Vclk"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(compsim(&["sweep", "--axis", "dvin", "--values", ""]).status.code(), Some(64));
    assert_eq!(compsim(&["sweep", "--axis", "dvin", "--values", "10m,5m"]).status.code(), Some(64));
    assert_eq!(compsim(&["mc-offset", "--circuit", "proposed", "--samples", "0"]).status.code(), Some(64));
    assert_eq!(compsim(&["run"]).status.code(), Some(64));
    assert_eq!(compsim(&["run", "--circuit", "nope"]).status.code(), Some(64));
    assert_eq!(compsim(&["bogus"]).status.code(), Some(64));
}

#[test]
fn invalid_testbench_exits_1() {
    let out = compsim(&["run", "--circuit", "proposed", "--vcm", "1.2"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let v = json(&compsim(&[
        "sweep", "--axis", "dvin", "--values", "-10m,10m", "--kinds", "proposed,mashhadi", "--out", csv.to_str().unwrap(),
    ]));
    assert_eq!(v["rows"], 4);
    assert_eq!(v["failed"], 0);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kind,axis,axis_value,delay_s,power_w,pdp_j,status");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn mc_offset_without_mismatch_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mc.csv");
    let v = json(&compsim(&[
        "mc-offset", "--circuit", "proposed", "--sigma-vth", "0", "--samples", "3", "--out", csv.to_str().unwrap(),
    ]));
    assert!(v["offset_v"].as_f64().unwrap() < 5e-5);
    assert_eq!(v["failed"], 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("sample,trip_v\n"));
    assert!(text.lines().last().unwrap().starts_with("offset_sigma,"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "# experiment\nvdd=0.7\nvcm=0.35\ndvin=-10m\n").unwrap();
    let v = json(&compsim(&["run", "--circuit", "mashhadi", "--config", cfg.to_str().unwrap(), "--dvin", "20m"]));
    assert_eq!(v["config"]["vdd"], 0.7);
    assert_eq!(v["config"]["dvin"], 0.02);
    assert_eq!(v["decision"], "plus");

    fs::write(&cfg, "vdd=0.7\nfoo=1\n").unwrap();
    let out = compsim(&["run", "--circuit", "mashhadi", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn compare_applies_flags_to_every_row() {
    let v = json(&compsim(&["compare", "--vdd", "0.9", "--vcm", "0.45"]));
    let rows = v["rows"].as_array().unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r["comparator"].as_str().unwrap()).collect();
    assert_eq!(ids, ["jeon2010", "mashhadi2014", "deepika2015", "proposed"]);
    for r in rows {
        assert_eq!(r["status"], "ok");
        assert_eq!(r["config"]["vdd"], 0.9);
        assert!(r["offset_v"].is_null());
        assert!(r["published"]["power_uw"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn full_dvin_sweep_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let v = json(&compsim(&["sweep", "--axis", "dvin", "--values", "5m,10m,20m,50m,100m", "--out", path.to_str().unwrap()]));
        assert_eq!(v["rows"], 20);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert_eq!(text, fs::read_to_string(&b).unwrap());
}
