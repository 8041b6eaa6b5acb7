//! SPICE-subset netlists: typed representation, parser and canonical emitter.
//!
//! Grammar, one element per line, keywords case-insensitive:
//!
//! ```text
//! M<name> <drain> <gate> <source> type=<n|p> nfin=<int> [dvth=<volts>]
//! C<name> <n+> <n-> <farads>
//! R<name> <n+> <n-> <ohms>
//! V<name> <n+> <n-> dc <volts>
//! V<name> <n+> <n-> pulse(<v1> <v2> <td> <tr> <tf> <pw> <per>)
//! .tran <step> <stop>
//! .ic v(<node>)=<volts> [v(<node>)=<volts> ...]
//! .end
//! ```
//!
//! `*` starts a comment line and a leading `+` continues the previous line.
//! When the first non-blank line is a comment, its text is the title.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::units::{format_exact, parse_eng};

/// Index into [`Netlist::nodes`]; ground is always [`GROUND`].
pub type NodeId = usize;

pub const GROUND: NodeId = 0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    Validation { line: usize, reason: String },
}

impl NetlistError {
    pub fn line(&self) -> usize {
        match self {
            NetlistError::Parse { line, .. } | NetlistError::Validation { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    N,
    P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceInstance {
    pub name: String,
    pub polarity: Polarity,
    pub drain: NodeId,
    pub gate: NodeId,
    pub source: NodeId,
    pub nfin: u32,
    /// Threshold perturbation in volts, used for mismatch studies.
    pub vth_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capacitor {
    pub name: String,
    pub plus: NodeId,
    pub minus: NodeId,
    pub farads: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resistor {
    pub name: String,
    pub plus: NodeId,
    pub minus: NodeId,
    pub ohms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    Dc(f64),
    Pulse(Pulse),
}

/// Periodic trapezoidal pulse, SPICE argument order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub v1: f64,
    pub v2: f64,
    pub delay: f64,
    pub rise: f64,
    pub fall: f64,
    pub width: f64,
    pub period: f64,
}

impl Pulse {
    /// Value at time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < self.delay {
            return self.v1;
        }
        let tt = (t - self.delay).rem_euclid(self.period);
        if tt < self.rise {
            self.v1 + (self.v2 - self.v1) * tt / self.rise
        } else if tt < self.rise + self.width {
            self.v2
        } else if tt < self.rise + self.width + self.fall {
            self.v2 + (self.v1 - self.v2) * (tt - self.rise - self.width) / self.fall
        } else {
            self.v1
        }
    }

    fn validate(&self) -> Result<(), String> {
        let all = [self.v1, self.v2, self.delay, self.rise, self.fall, self.width, self.period];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("pulse arguments must be finite".into());
        }
        if self.rise <= 0.0 || self.fall <= 0.0 {
            return Err("pulse rise and fall times must be positive".into());
        }
        if self.delay < 0.0 || self.width < 0.0 {
            return Err("pulse delay and width must be non-negative".into());
        }
        if self.period <= self.rise + self.fall + self.width {
            return Err("pulse period must exceed rise + fall + width".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSource {
    pub name: String,
    pub plus: NodeId,
    pub minus: NodeId,
    pub spec: SourceSpec,
}

impl VoltageSource {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.spec {
            SourceSpec::Dc(v) => v,
            SourceSpec::Pulse(p) => p.value_at(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranDirective {
    pub step: f64,
    pub stop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ElementRef {
    Device(usize),
    Capacitor(usize),
    Resistor(usize),
    Source(usize),
}

/// A resolved circuit. Elements keep their textual order so that emitting
/// and re-parsing reproduces the same node numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub title: String,
    pub devices: Vec<DeviceInstance>,
    pub capacitors: Vec<Capacitor>,
    pub resistors: Vec<Resistor>,
    pub sources: Vec<VoltageSource>,
    pub tran: Option<TranDirective>,
    pub initial_conditions: BTreeMap<NodeId, f64>,
    nodes: Vec<String>,
    order: Vec<ElementRef>,
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new("")
    }
}

impl Netlist {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            devices: Vec::new(),
            capacitors: Vec::new(),
            resistors: Vec::new(),
            sources: Vec::new(),
            tran: None,
            initial_conditions: BTreeMap::new(),
            nodes: vec!["0".to_string()],
            order: Vec::new(),
        }
    }

    /// Node names; index 0 is ground.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.order.len()
    }

    /// Case-insensitive node lookup.
    pub fn node(&self, name: &str) -> Option<NodeId> {
        if is_ground(name) {
            return Some(GROUND);
        }
        self.nodes.iter().position(|n| n.eq_ignore_ascii_case(name))
    }

    /// Returns the id for `name`, appending it to the node table if new.
    pub fn intern_node(&mut self, name: &str) -> NodeId {
        match self.node(name) {
            Some(id) => id,
            None => {
                self.nodes.push(name.to_string());
                self.nodes.len() - 1
            }
        }
    }

    pub fn source(&self, name: &str) -> Option<&VoltageSource> {
        self.sources.iter().find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn source_index(&self, name: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn device_mut(&mut self, name: &str) -> Option<&mut DeviceInstance> {
        self.devices.iter_mut().find(|d| d.name.eq_ignore_ascii_case(name))
    }

    pub fn add_device(&mut self, device: DeviceInstance) {
        self.order.push(ElementRef::Device(self.devices.len()));
        self.devices.push(device);
    }

    pub fn add_capacitor(&mut self, cap: Capacitor) {
        self.order.push(ElementRef::Capacitor(self.capacitors.len()));
        self.capacitors.push(cap);
    }

    pub fn add_resistor(&mut self, res: Resistor) {
        self.order.push(ElementRef::Resistor(self.resistors.len()));
        self.resistors.push(res);
    }

    pub fn add_source(&mut self, src: VoltageSource) {
        self.order.push(ElementRef::Source(self.sources.len()));
        self.sources.push(src);
    }

    /// Checks the structural invariants that the builder methods cannot
    /// enforce on their own.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        let mut touches_ground = false;
        for name in self.element_names() {
            if !seen.insert(name.to_ascii_lowercase()) {
                return Err(format!("duplicate element name '{name}'"));
            }
        }
        for d in &self.devices {
            if d.nfin == 0 {
                return Err(format!("device '{}' needs nfin >= 1", d.name));
            }
            if !d.vth_delta.is_finite() {
                return Err(format!("device '{}' has a non-finite dvth", d.name));
            }
            touches_ground |= [d.drain, d.gate, d.source].contains(&GROUND);
        }
        for c in &self.capacitors {
            if !(c.farads >= 0.0 && c.farads.is_finite()) {
                return Err(format!("capacitor '{}' must be non-negative", c.name));
            }
            touches_ground |= c.plus == GROUND || c.minus == GROUND;
        }
        for r in &self.resistors {
            if !(r.ohms > 0.0 && r.ohms.is_finite()) {
                return Err(format!("resistor '{}' must be positive", r.name));
            }
            touches_ground |= r.plus == GROUND || r.minus == GROUND;
        }
        for s in &self.sources {
            if let SourceSpec::Pulse(p) = &s.spec {
                p.validate().map_err(|e| format!("source '{}': {e}", s.name))?;
            }
            touches_ground |= s.plus == GROUND || s.minus == GROUND;
        }
        if !self.order.is_empty() && !touches_ground {
            return Err("no element connects to ground node '0'".into());
        }
        if let Some(t) = self.tran {
            if !(t.step > 0.0 && t.step < t.stop) {
                return Err(".tran requires 0 < step < stop".into());
            }
        }
        Ok(())
    }

    fn element_names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(move |e| match *e {
            ElementRef::Device(i) => self.devices[i].name.as_str(),
            ElementRef::Capacitor(i) => self.capacitors[i].name.as_str(),
            ElementRef::Resistor(i) => self.resistors[i].name.as_str(),
            ElementRef::Source(i) => self.sources[i].name.as_str(),
        })
    }
}

fn is_ground(name: &str) -> bool {
    name == "0" || name.eq_ignore_ascii_case("gnd")
}

/// Logical line after continuation joining, tagged with its first physical line.
struct Logical {
    line: usize,
    text: String,
}

fn logical_lines(text: &str) -> (Option<String>, Vec<Logical>) {
    let mut title = None;
    let mut first_content = true;
    let mut out: Vec<Logical> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('*') {
            if first_content {
                title = Some(comment.trim().to_string());
            }
            first_content = false;
            continue;
        }
        first_content = false;
        if let Some(cont) = trimmed.strip_prefix('+') {
            match out.last_mut() {
                Some(prev) => {
                    prev.text.push(' ');
                    prev.text.push_str(cont.trim());
                }
                None => out.push(Logical { line: line_no, text: cont.trim().to_string() }),
            }
            continue;
        }
        out.push(Logical { line: line_no, text: trimmed.to_string() });
    }
    (title, out)
}

/// Parses netlist text. Every failure carries the 1-based line it refers to.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let (title, lines) = logical_lines(text);
    let mut net = Netlist::new(title.unwrap_or_default());
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut pending_ic: Vec<(usize, String, f64)> = Vec::new();
    let mut touches_ground = false;
    let mut first_element_line = None;

    for Logical { line, text } in &lines {
        let line = *line;
        let perr = |reason: String| NetlistError::Parse { line, reason };
        let verr = |reason: String| NetlistError::Validation { line, reason };
        let tokens = tokenize(text);
        let head = tokens[0].as_str();
        let lower = head.to_ascii_lowercase();

        if lower.starts_with('.') {
            match lower.as_str() {
                ".end" => break,
                ".tran" => {
                    if tokens.len() != 3 {
                        return Err(perr(".tran expects <step> <stop>".into()));
                    }
                    let step = number(&tokens[1]).map_err(perr)?;
                    let stop = number(&tokens[2]).map_err(perr)?;
                    if !(step > 0.0 && step < stop) {
                        return Err(verr(".tran requires 0 < step < stop".into()));
                    }
                    net.tran = Some(TranDirective { step, stop });
                }
                ".ic" => {
                    if tokens.len() < 2 {
                        return Err(perr(".ic expects v(<node>)=<volts>".into()));
                    }
                    for tok in &tokens[1..] {
                        let (node, value) = parse_ic(tok).map_err(perr)?;
                        pending_ic.push((line, node, value));
                    }
                }
                other => return Err(perr(format!("unknown directive '{other}'"))),
            }
            continue;
        }

        if let Some(prev) = names.insert(lower.clone(), line) {
            return Err(verr(format!("duplicate element name '{head}' (first defined on line {prev})")));
        }
        first_element_line.get_or_insert(line);

        let kind = lower.as_bytes()[0];
        match kind {
            b'm' => {
                if tokens.len() < 6 {
                    return Err(perr("device expects <drain> <gate> <source> type=<n|p> nfin=<int>".into()));
                }
                let mut polarity = None;
                let mut nfin: Option<i64> = None;
                let mut dvth = 0.0;
                for tok in &tokens[4..] {
                    let (key, value) = tok
                        .split_once('=')
                        .ok_or_else(|| perr(format!("expected key=value, found '{tok}'")))?;
                    match key.to_ascii_lowercase().as_str() {
                        "type" => {
                            polarity = Some(match value.to_ascii_lowercase().as_str() {
                                "n" | "nmos" | "nfet" => Polarity::N,
                                "p" | "pmos" | "pfet" => Polarity::P,
                                _ => return Err(perr(format!("unknown device type '{value}'"))),
                            })
                        }
                        "nfin" => {
                            nfin = Some(
                                value
                                    .parse::<i64>()
                                    .map_err(|_| perr(format!("nfin must be an integer, found '{value}'")))?,
                            )
                        }
                        "dvth" => dvth = number(value).map_err(perr)?,
                        _ => return Err(perr(format!("unknown device parameter '{key}'"))),
                    }
                }
                let polarity = polarity.ok_or_else(|| perr("device is missing type=<n|p>".into()))?;
                let nfin = nfin.ok_or_else(|| perr("device is missing nfin=<int>".into()))?;
                if nfin <= 0 || nfin > u32::MAX as i64 {
                    return Err(verr(format!("nfin must be >= 1, found {nfin}")));
                }
                let drain = net.intern_node(&tokens[1]);
                let gate = net.intern_node(&tokens[2]);
                let source = net.intern_node(&tokens[3]);
                touches_ground |= [drain, gate, source].contains(&GROUND);
                net.add_device(DeviceInstance {
                    name: head.to_string(),
                    polarity,
                    drain,
                    gate,
                    source,
                    nfin: nfin as u32,
                    vth_delta: dvth,
                });
            }
            b'c' | b'r' => {
                if tokens.len() != 4 {
                    return Err(perr(format!("'{head}' expects <n+> <n-> <value>")));
                }
                let value = number(&tokens[3]).map_err(perr)?;
                let plus = net.intern_node(&tokens[1]);
                let minus = net.intern_node(&tokens[2]);
                touches_ground |= plus == GROUND || minus == GROUND;
                if kind == b'c' {
                    if value < 0.0 {
                        return Err(verr("capacitance must be non-negative".into()));
                    }
                    net.add_capacitor(Capacitor { name: head.to_string(), plus, minus, farads: value });
                } else {
                    if value <= 0.0 {
                        return Err(verr("resistance must be positive".into()));
                    }
                    net.add_resistor(Resistor { name: head.to_string(), plus, minus, ohms: value });
                }
            }
            b'v' => {
                if tokens.len() < 4 {
                    return Err(perr("source expects <n+> <n-> dc <v> | pulse(...)".into()));
                }
                let spec = parse_source_spec(&tokens[3..]).map_err(perr)?;
                if let SourceSpec::Pulse(p) = &spec {
                    p.validate().map_err(verr)?;
                }
                let plus = net.intern_node(&tokens[1]);
                let minus = net.intern_node(&tokens[2]);
                touches_ground |= plus == GROUND || minus == GROUND;
                net.add_source(VoltageSource { name: head.to_string(), plus, minus, spec });
            }
            _ => return Err(perr(format!("unsupported element '{head}'"))),
        }
    }

    for (_, node, value) in pending_ic {
        let id = net.intern_node(&node);
        net.initial_conditions.insert(id, value);
    }

    if let Some(line) = first_element_line {
        if !touches_ground {
            return Err(NetlistError::Validation {
                line,
                reason: "no element connects to ground node '0'".into(),
            });
        }
    }
    Ok(net)
}

/// Splits on whitespace but keeps `pulse(...)` groups and `key = value`
/// pairs intact.
fn tokenize(text: &str) -> Vec<String> {
    let spaced = text.replace('(', " ( ").replace(')', " ) ").replace('=', " = ");
    let mut out: Vec<String> = Vec::new();
    let mut raw = spaced.split_whitespace().peekable();
    while let Some(tok) = raw.next() {
        if tok == "=" {
            if let (Some(prev), Some(next)) = (out.last_mut(), raw.next()) {
                prev.push('=');
                prev.push_str(next);
                // `v(node)=x` arrives as "v", "(", "node", ")", "=", "x".
                continue;
            }
        }
        if tok == "(" || tok == ")" {
            if let Some(prev) = out.last_mut() {
                prev.push_str(tok);
                if tok == "(" {
                    // Glue the whole parenthesised group into one token.
                    let mut depth = 1;
                    for inner in raw.by_ref() {
                        match inner {
                            "(" => depth += 1,
                            ")" => depth -= 1,
                            _ => {}
                        }
                        if depth == 0 {
                            prev.push(')');
                            break;
                        }
                        if !prev.ends_with('(') && inner != ")" {
                            prev.push(' ');
                        }
                        prev.push_str(inner);
                    }
                }
                continue;
            }
        }
        out.push(tok.to_string());
    }
    out
}

fn number(tok: &str) -> Result<f64, String> {
    parse_eng(tok).ok_or_else(|| format!("invalid number '{tok}'"))
}

fn parse_ic(tok: &str) -> Result<(String, f64), String> {
    let (lhs, rhs) = tok.split_once('=').ok_or_else(|| format!("expected v(<node>)=<volts>, found '{tok}'"))?;
    let inner = lhs
        .strip_prefix("v(")
        .or_else(|| lhs.strip_prefix("V("))
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| format!("expected v(<node>), found '{lhs}'"))?
        .trim();
    if inner.is_empty() || inner.contains(char::is_whitespace) {
        return Err(format!("malformed node in '{lhs}'"));
    }
    Ok((inner.to_string(), number(rhs)?))
}

fn parse_source_spec(tokens: &[String]) -> Result<SourceSpec, String> {
    let first = tokens[0].to_ascii_lowercase();
    if first == "dc" {
        if tokens.len() != 2 {
            return Err("dc source expects exactly one value".into());
        }
        return Ok(SourceSpec::Dc(number(&tokens[1])?));
    }
    if let Some(args) = first.strip_prefix("pulse(") {
        if tokens.len() != 1 {
            return Err("unexpected tokens after pulse(...)".into());
        }
        let args = args.strip_suffix(')').ok_or("unterminated pulse(")?;
        let values: Vec<f64> = args.split_whitespace().map(number).collect::<Result<_, _>>()?;
        let [v1, v2, delay, rise, fall, width, period] = values[..] else {
            return Err(format!("pulse expects 7 arguments, found {}", values.len()));
        };
        return Ok(SourceSpec::Pulse(Pulse { v1, v2, delay, rise, fall, width, period }));
    }
    Err(format!("unknown source specification '{}'", tokens[0]))
}

/// Canonical text for `net`; [`parse_netlist`] reproduces it structurally.
pub fn emit_netlist(net: &Netlist) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "* {}", net.title);
    let name = |id: NodeId| net.nodes[id].as_str();
    for e in &net.order {
        match *e {
            ElementRef::Device(i) => {
                let d = &net.devices[i];
                let ty = match d.polarity {
                    Polarity::N => "n",
                    Polarity::P => "p",
                };
                let _ = write!(
                    out,
                    "{} {} {} {} type={} nfin={}",
                    d.name,
                    name(d.drain),
                    name(d.gate),
                    name(d.source),
                    ty,
                    d.nfin
                );
                if d.vth_delta != 0.0 {
                    let _ = write!(out, " dvth={}", format_exact(d.vth_delta));
                }
                out.push('\n');
            }
            ElementRef::Capacitor(i) => {
                let c = &net.capacitors[i];
                let _ = writeln!(out, "{} {} {} {}", c.name, name(c.plus), name(c.minus), format_exact(c.farads));
            }
            ElementRef::Resistor(i) => {
                let r = &net.resistors[i];
                let _ = writeln!(out, "{} {} {} {}", r.name, name(r.plus), name(r.minus), format_exact(r.ohms));
            }
            ElementRef::Source(i) => {
                let s = &net.sources[i];
                let _ = write!(out, "{} {} {} ", s.name, name(s.plus), name(s.minus));
                match s.spec {
                    SourceSpec::Dc(v) => {
                        let _ = writeln!(out, "dc {}", format_exact(v));
                    }
                    SourceSpec::Pulse(p) => {
                        let args = [p.v1, p.v2, p.delay, p.rise, p.fall, p.width, p.period]
                            .map(format_exact)
                            .join(" ");
                        let _ = writeln!(out, "pulse({args})");
                    }
                }
            }
        }
    }
    if let Some(t) = net.tran {
        let _ = writeln!(out, ".tran {} {}", format_exact(t.step), format_exact(t.stop));
    }
    for (&node, &v) in &net.initial_conditions {
        let _ = writeln!(out, ".ic v({})={}", name(node), format_exact(v));
    }
    if !net.order.is_empty() || net.tran.is_some() || !net.initial_conditions.is_empty() {
        out.push_str(".end\n");
    }
    out
}
