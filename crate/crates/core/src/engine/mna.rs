//! Modified nodal analysis: unknowns are the non-ground node voltages
//! followed by one branch current per voltage source.

use crate::device::{device_capacitances, drain_current, FinFetParams, ModelSet};
use crate::netlist::{NodeId, Polarity, SourceSpec, GROUND};

use super::linear::DenseMatrix;

#[derive(Debug, Clone)]
pub(crate) struct CompiledDevice {
    pub polarity: Polarity,
    pub drain: NodeId,
    pub gate: NodeId,
    pub source: NodeId,
    pub nfin: u32,
    pub vth_delta: f64,
    pub card: FinFetParams,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearCap {
    pub a: NodeId,
    pub b: NodeId,
    pub farads: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Conductance {
    pub a: NodeId,
    pub b: NodeId,
    pub siemens: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CompiledSource {
    pub plus: NodeId,
    pub minus: NodeId,
    pub spec: SourceSpec,
}

impl CompiledSource {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.spec {
            SourceSpec::Dc(v) => v,
            SourceSpec::Pulse(p) => p.value_at(t),
        }
    }
}

/// Flattened circuit ready for stamping. Device capacitances are lumped
/// into `caps` alongside the explicit capacitors, each node to ground:
/// `cgs + cgd` at the gate and `cdb` at the drain.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub node_count: usize,
    pub devices: Vec<CompiledDevice>,
    pub caps: Vec<LinearCap>,
    pub conductances: Vec<Conductance>,
    pub sources: Vec<CompiledSource>,
}

impl Compiled {
    pub fn new(net: &crate::netlist::Netlist, models: &ModelSet) -> Self {
        let mut caps: Vec<LinearCap> = net
            .capacitors
            .iter()
            .map(|c| LinearCap { a: c.plus, b: c.minus, farads: c.farads })
            .collect();
        let devices = net
            .devices
            .iter()
            .map(|d| {
                let card = *models.card(d.polarity);
                let c = device_capacitances(d.nfin, &card);
                caps.push(LinearCap { a: d.gate, b: GROUND, farads: c.cgs + c.cgd });
                caps.push(LinearCap { a: d.drain, b: GROUND, farads: c.cdb });
                CompiledDevice {
                    polarity: d.polarity,
                    drain: d.drain,
                    gate: d.gate,
                    source: d.source,
                    nfin: d.nfin,
                    vth_delta: d.vth_delta,
                    card,
                }
            })
            .collect();
        caps.retain(|c| c.farads > 0.0 && c.a != c.b);
        let conductances = net
            .resistors
            .iter()
            .map(|r| Conductance { a: r.plus, b: r.minus, siemens: 1.0 / r.ohms })
            .collect();
        let sources = net
            .sources
            .iter()
            .map(|s| CompiledSource { plus: s.plus, minus: s.minus, spec: s.spec })
            .collect();
        Self { node_count: net.node_count(), devices, caps, conductances, sources }
    }

    pub fn unknowns(&self) -> usize {
        self.node_count - 1 + self.sources.len()
    }

    /// Row/column of a node, `None` for ground.
    #[inline]
    pub fn row(node: NodeId) -> Option<usize> {
        node.checked_sub(1)
    }

    #[inline]
    pub fn voltage(x: &[f64], node: NodeId) -> f64 {
        match Self::row(node) {
            Some(r) => x[r],
            None => 0.0,
        }
    }

    pub fn branch_row(&self, source: usize) -> usize {
        self.node_count - 1 + source
    }
}

/// Companion model of every capacitor for the step being solved:
/// `i = geq * (va - vb) - ieq`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Companions {
    pub geq: Vec<f64>,
    pub ieq: Vec<f64>,
}

/// Residual `f(x)` and Jacobian for one Newton iterate.
pub(crate) struct Assembly {
    pub jac: DenseMatrix,
    pub residual: Vec<f64>,
}

impl Assembly {
    pub fn new(n: usize) -> Self {
        Self { jac: DenseMatrix::zeros(n), residual: vec![0.0; n] }
    }

    #[inline]
    fn f(&mut self, node: NodeId, value: f64) {
        if let Some(r) = Compiled::row(node) {
            self.residual[r] += value;
        }
    }

    #[inline]
    fn j(&mut self, node: NodeId, wrt: NodeId, value: f64) {
        if let (Some(r), Some(c)) = (Compiled::row(node), Compiled::row(wrt)) {
            self.jac[(r, c)] += value;
        }
    }

    /// Two-terminal conductance-like stamp: current `i` leaves `a` into `b`
    /// with `di/dva = g`, `di/dvb = -g`.
    #[inline]
    fn branch(&mut self, a: NodeId, b: NodeId, i: f64, g: f64) {
        self.f(a, i);
        self.f(b, -i);
        self.j(a, a, g);
        self.j(a, b, -g);
        self.j(b, a, -g);
        self.j(b, b, g);
    }
}

/// Rows of `residual` are KCL sums (amperes) for nodes, and source
/// constraint errors (volts) for branch rows.
pub(crate) fn assemble(
    ckt: &Compiled,
    x: &[f64],
    t: f64,
    gmin: f64,
    companions: Option<&Companions>,
    out: &mut Assembly,
) {
    out.jac.clear();
    out.residual.fill(0.0);
    let v = |n: NodeId| Compiled::voltage(x, n);

    for node in 1..ckt.node_count {
        out.branch(node, GROUND, gmin * v(node), gmin);
    }
    for c in &ckt.conductances {
        out.branch(c.a, c.b, c.siemens * (v(c.a) - v(c.b)), c.siemens);
    }
    if let Some(comp) = companions {
        for (k, c) in ckt.caps.iter().enumerate() {
            let g = comp.geq[k];
            out.branch(c.a, c.b, g * (v(c.a) - v(c.b)) - comp.ieq[k], g);
        }
    }
    for d in &ckt.devices {
        let e = drain_current(d.polarity, v(d.gate), v(d.drain), v(d.source), d.nfin, d.vth_delta, &d.card);
        out.f(d.drain, e.id);
        out.f(d.source, -e.id);
        out.j(d.drain, d.gate, e.gm);
        out.j(d.drain, d.drain, e.gds);
        out.j(d.drain, d.source, e.gms);
        out.j(d.source, d.gate, -e.gm);
        out.j(d.source, d.drain, -e.gds);
        out.j(d.source, d.source, -e.gms);
    }
    for (k, s) in ckt.sources.iter().enumerate() {
        let br = ckt.branch_row(k);
        let i = x[br];
        // Branch current flows from the circuit into `plus`, through the
        // source, and back out of `minus`.
        if let Some(p) = Compiled::row(s.plus) {
            out.residual[p] += i;
            out.jac[(p, br)] += 1.0;
            out.jac[(br, p)] += 1.0;
        }
        if let Some(m) = Compiled::row(s.minus) {
            out.residual[m] -= i;
            out.jac[(m, br)] -= 1.0;
            out.jac[(br, m)] -= 1.0;
        }
        out.residual[br] += v(s.plus) - v(s.minus) - s.value_at(t);
    }
}

/// Largest KCL residual among node rows.
pub(crate) fn kcl_norm(ckt: &Compiled, residual: &[f64]) -> f64 {
    residual[..ckt.node_count - 1].iter().fold(0.0, |m, r| m.max(r.abs()))
}

pub(crate) fn source_norm(ckt: &Compiled, residual: &[f64]) -> f64 {
    residual[ckt.node_count - 1..].iter().fold(0.0, |m, r| m.max(r.abs()))
}
