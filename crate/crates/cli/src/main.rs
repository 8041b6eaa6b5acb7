mod config;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use compsim_core::circuits::{
    comparison_table, run_sweep, simulate, write_comparison_csv, write_sweep_csv, Axis, ComparatorKind, Metric,
    RunError, RunFailure, SweepSpec, TestbenchConfig,
};
use compsim_core::engine::{transient, SimError, WaveformSet};
use compsim_core::measure::{average_power, mc_offset, propagation_delay, McOptions, MeasureError, MetricsRow};
use compsim_core::netlist::parse_netlist;
use compsim_core::units::parse_eng;

use config::Settings;

const EXIT_INVALID: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_UNDECIDED: u8 = 3;
const EXIT_USAGE: u8 = 64;

const DEFAULT_SIGMA_VTH: f64 = 2e-3;
const DEFAULT_SAMPLES: u32 = 100;
const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug)]
#[command(name = "compsim", version, about = "Dynamic-latch comparator simulator")]
struct Cli {
    /// Experiment file of key=value lines, read before the flags.
    #[arg(long, global = true, env = "COMPSIM_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a netlist.
    Parse { netlist: PathBuf },
    /// Simulate one comparator and print its metrics as JSON.
    Run(RunArgs),
    /// Sweep dvin, vcm or vdd and write a CSV table.
    Sweep(SweepArgs),
    /// Monte-Carlo input offset of one comparator.
    McOffset(McArgs),
    /// Metrics of all four comparators next to the published figures.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct TbArgs {
    #[arg(long, value_parser = eng)]
    vdd: Option<f64>,
    #[arg(long, value_parser = eng)]
    vcm: Option<f64>,
    #[arg(long, value_parser = eng, allow_hyphen_values = true)]
    dvin: Option<f64>,
    #[arg(long, value_parser = eng)]
    fclk: Option<f64>,
    #[arg(long, value_parser = eng)]
    duty: Option<f64>,
    #[arg(long, value_parser = eng)]
    edge_time: Option<f64>,
    #[arg(long, value_parser = eng)]
    cload: Option<f64>,
    #[arg(long, value_parser = eng)]
    nonoverlap: Option<f64>,
    /// Number of simulated clock periods.
    #[arg(long)]
    periods: Option<u32>,
    /// Fin count override, e.g. `--size F13=4`; repeatable.
    #[arg(long = "size", value_name = "DEVICE=NFIN", value_parser = sizing)]
    sizes: Vec<(String, u32)>,
    /// Time step.
    #[arg(long, value_parser = eng)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, conflicts_with = "netlist", required_unless_present = "netlist")]
    circuit: Option<ComparatorKind>,
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Waveform CSV output.
    #[arg(long)]
    waves: Option<PathBuf>,
    /// Stop time for `--netlist` runs without a `.tran` line.
    #[arg(long, value_parser = eng)]
    tstop: Option<f64>,
    /// Evaluation clock node (`--netlist` only).
    #[arg(long, default_value = "clk")]
    clock: String,
    /// Output that goes high when vin > vref (`--netlist` only).
    #[arg(long, default_value = "outp")]
    plus: String,
    /// Complementary output (`--netlist` only).
    #[arg(long, default_value = "outn")]
    minus: String,
    /// Supply source name (`--netlist` only).
    #[arg(long, default_value = "Vdd")]
    supply: String,
    #[command(flatten)]
    tb: TbArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    axis: Axis,
    /// Comma-separated, strictly increasing values.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Comma-separated comparator names, or `all`.
    #[arg(long, default_value = "all")]
    kinds: String,
    /// Comma-separated subset of `delay,power`.
    #[arg(long, default_value = "delay,power")]
    metrics: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tb: TbArgs,
}

#[derive(Args, Debug)]
struct McOpts {
    /// Threshold mismatch sigma of a one-fin device.
    #[arg(long, value_parser = eng)]
    sigma_vth: Option<f64>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct McArgs {
    #[arg(long)]
    circuit: ComparatorKind,
    #[command(flatten)]
    mc: McOpts,
    /// Per-sample trip-point CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tb: TbArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    mc: McOpts,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tb: TbArgs,
}

fn eng(s: &str) -> Result<f64, String> {
    parse_eng(s).filter(|v| v.is_finite()).ok_or_else(|| format!("'{s}' is not a number"))
}

fn sizing(s: &str) -> Result<(String, u32), String> {
    let (dev, n) = s.split_once('=').ok_or("expected DEVICE=NFIN")?;
    let n = n.trim().parse().map_err(|_| format!("'{n}' is not a fin count"))?;
    Ok((dev.trim().to_string(), n))
}

/// A failed command: message for stderr and process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(EXIT_INVALID, message)
    }

    fn io(path: &Path, err: io::Error) -> Self {
        Self::invalid(format!("cannot access {}: {err}", path.display()))
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = match &e.kind {
            RunFailure::Invalid(_) => EXIT_INVALID,
            RunFailure::Sim(SimError::InvalidConfig(_)) => EXIT_INVALID,
            RunFailure::Sim(_) => EXIT_NUMERIC,
            RunFailure::Measure(m) => measure_code(m),
        };
        Failure::new(code, e.to_string())
    }
}

fn measure_code(e: &MeasureError) -> u8 {
    match e {
        MeasureError::NoDecision { .. } | MeasureError::NoClockEdge { .. } => EXIT_UNDECIDED,
        _ => EXIT_NUMERIC,
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn execute(cli: Cli) -> CmdResult {
    if let Command::Parse { netlist } = &cli.command {
        return cmd_parse(netlist);
    }
    let settings = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            Settings::parse(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    match cli.command {
        Command::Parse { .. } => unreachable!(),
        Command::Run(args) => cmd_run(args, settings),
        Command::Sweep(args) => cmd_sweep(args, settings),
        Command::McOffset(args) => cmd_mc_offset(args, settings),
        Command::Compare(args) => cmd_compare(args, settings),
    }
}

/// File settings with flag overrides applied.
fn resolve(settings: &Settings, tb: &TbArgs) -> Settings {
    let mut s = settings.clone();
    let t = &mut s.tb;
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut t.vdd, tb.vdd);
    set(&mut t.vcm, tb.vcm);
    set(&mut t.dvin, tb.dvin);
    set(&mut t.fclk, tb.fclk);
    set(&mut t.duty, tb.duty);
    set(&mut t.edge_time, tb.edge_time);
    set(&mut t.cload, tb.cload);
    set(&mut t.nonoverlap, tb.nonoverlap);
    if let Some(n) = tb.periods {
        t.n_periods = n;
    }
    for (dev, n) in &tb.sizes {
        t.sizing.insert(dev.clone(), *n);
    }
    if tb.dt.is_some() {
        s.sim.dt = tb.dt;
    }
    s
}

fn mc_options(settings: &Settings, mc: &McOpts) -> Result<McOptions, Failure> {
    let opts = McOptions {
        sigma_vth0: mc.sigma_vth.or(settings.mc.sigma_vth).unwrap_or(DEFAULT_SIGMA_VTH),
        n_samples: mc.samples.or(settings.mc.samples).unwrap_or(DEFAULT_SAMPLES),
        seed: mc.seed.or(settings.mc.seed).unwrap_or(DEFAULT_SEED),
    };
    opts.validate().map_err(Failure::usage)?;
    Ok(opts)
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

/// Writes a file in one go from an in-memory writer callback.
fn write_file(path: &Path, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CmdResult {
    let file = fs::File::create(path).map_err(|e| Failure::io(path, e))?;
    let mut w = BufWriter::new(file);
    fill(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::io(path, e))
}

fn cmd_parse(path: &Path) -> CmdResult {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let net = parse_netlist(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    println!(
        "{}: {} nodes, {} elements ({} devices, {} capacitors, {} resistors, {} sources)",
        path.display(),
        net.node_count(),
        net.element_count(),
        net.devices.len(),
        net.capacitors.len(),
        net.resistors.len(),
        net.sources.len()
    );
    Ok(())
}

fn cmd_run(args: RunArgs, settings: Settings) -> CmdResult {
    let s = resolve(&settings, &args.tb);
    let waves_out = args.waves.as_deref();
    let row = match (args.circuit, &args.netlist) {
        (Some(kind), _) => {
            let run = simulate(kind, &s.tb, &s.sim)?;
            if let Some(path) = waves_out {
                write_file(path, |w| run.waves.write_csv(w))?;
            }
            run.metrics().map_err(|e| Failure::from(RunError { comparator: kind.id().into(), kind: e.into() }))?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            let net = parse_netlist(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
            let mut sim = s.sim.clone();
            if args.tstop.is_some() {
                sim.tstop = args.tstop;
            }
            let waves = transient(&net, &sim).map_err(|e| Failure::new(EXIT_NUMERIC, e.to_string()))?;
            if let Some(out) = waves_out {
                write_file(out, |w| waves.write_csv(w))?;
            }
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            measure_netlist(&name, &waves, &args, &s.tb)?
        }
        (None, None) => return Err(Failure::usage("one of --circuit or --netlist is required")),
    };
    print_json(&serde_json::to_value(&row).expect("metrics serialize"));
    Ok(())
}

fn measure_netlist(name: &str, waves: &WaveformSet, args: &RunArgs, tb: &TestbenchConfig) -> Result<MetricsRow, Failure> {
    let trace = |node: &str| {
        waves.node_trace(node).ok_or_else(|| Failure::invalid(format!("netlist has no node '{node}'")))
    };
    let (clk, plus, minus) = (trace(&args.clock)?, trace(&args.plus)?, trace(&args.minus)?);
    let supply = waves
        .supply_current(&args.supply)
        .ok_or_else(|| Failure::invalid(format!("netlist has no source '{}'", args.supply)))?;
    let m = tb.measure_period();
    let fail = |e: MeasureError| Failure::new(measure_code(&e), format!("{name}: {e}"));
    let (decision, delay) = propagation_delay(clk, plus, minus, waves.times(), tb.vdd, m as usize).map_err(fail)?;
    let t = tb.period();
    let power = average_power(&supply, waves.times(), tb.vdd, (f64::from(m) * t, f64::from(m + 1) * t)).map_err(fail)?;
    Ok(MetricsRow::new(name, power, delay, decision.outcome, tb.clone()))
}

fn parse_list<T>(text: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, Failure> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| item(s).map_err(Failure::usage)).collect()
}

fn cmd_sweep(args: SweepArgs, settings: Settings) -> CmdResult {
    let s = resolve(&settings, &args.tb);
    let values = parse_list(&args.values, eng)?;
    let metrics = parse_list(&args.metrics, |m| m.parse::<Metric>())?;
    let kinds = if args.kinds.trim().eq_ignore_ascii_case("all") {
        ComparatorKind::ALL.to_vec()
    } else {
        parse_list(&args.kinds, |k| k.parse::<ComparatorKind>())?
    };
    if kinds.is_empty() {
        return Err(Failure::usage("--kinds lists no comparator"));
    }
    let spec = SweepSpec { axis: args.axis, values, metrics };
    spec.validate().map_err(Failure::usage)?;
    let mut rows = Vec::new();
    for kind in kinds {
        rows.extend(run_sweep(kind, &spec, &s.tb, &s.sim).map_err(Failure::usage)?);
    }
    write_file(&args.out, |w| write_sweep_csv(&rows, w))?;
    let failed: Vec<&RunError> = rows.iter().filter_map(|r| r.result.as_ref().err()).collect();
    for e in &failed {
        eprintln!("warning: {e}");
    }
    print_json(&json!({
        "axis": spec.axis,
        "rows": rows.len(),
        "failed": failed.len(),
        "out": args.out.display().to_string(),
    }));
    match failed.first() {
        Some(&first) if failed.len() == rows.len() => Err(Failure::from(first.clone())),
        _ => Ok(()),
    }
}

fn cmd_mc_offset(args: McArgs, settings: Settings) -> CmdResult {
    let s = resolve(&settings, &args.tb);
    let opts = mc_options(&s, &args.mc)?;
    let result = mc_offset(args.circuit, &s.tb, &s.sim, &opts).map_err(Failure::invalid)?;
    if let Some(path) = &args.out {
        write_file(path, |w| result.write_csv(w))?;
    }
    for sample in &result.samples {
        if let Err(e) = &sample.trip {
            eprintln!("warning: sample {}: {e}", sample.sample);
        }
    }
    print_json(&json!({
        "comparator": args.circuit.id(),
        "offset_v": result.offset_sigma,
        "samples": opts.n_samples,
        "failed": result.failures(),
        "sigma_vth": opts.sigma_vth0,
        "seed": opts.seed,
        "config": s.tb,
    }));
    if result.offset_sigma.is_none() {
        return Err(Failure::new(EXIT_NUMERIC, "no sample produced a trip point"));
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs, settings: Settings) -> CmdResult {
    let s = resolve(&settings, &args.tb);
    let wants_mc = args.mc.sigma_vth.is_some() || args.mc.samples.is_some() || args.mc.seed.is_some() || s.mc.any();
    let mc = if wants_mc { Some(mc_options(&s, &args.mc)?) } else { None };
    let rows = comparison_table(&s.tb, &s.sim, mc.as_ref());
    if let Some(path) = &args.out {
        write_file(path, |w| write_comparison_csv(&rows, w))?;
    }
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut v = match &r.metrics {
                Ok(m) => {
                    let mut v = serde_json::to_value(m).expect("metrics serialize");
                    v["status"] = json!("ok");
                    v
                }
                Err(e) => {
                    eprintln!("warning: {e}");
                    json!({ "comparator": r.kind.id(), "status": format!("error: {}", e.kind), "config": s.tb })
                }
            };
            if mc.is_some() {
                v["offset_failures"] = json!(r.offset_failures);
            }
            v["published"] = json!(r.published);
            v
        })
        .collect();
    print_json(&json!({ "rows": json_rows }));
    match rows.iter().find_map(|r| r.metrics.as_ref().err()) {
        Some(e) if rows.iter().all(|r| r.metrics.is_err()) => Err(Failure::from(e.clone())),
        _ => Ok(()),
    }
}
