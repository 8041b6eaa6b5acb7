//! DC operating point and fixed-step transient analysis.
//!
//! Capacitors (explicit and device-intrinsic) use the trapezoidal companion
//! model, with a backward-Euler first step since no capacitor current
//! history exists at t = 0. Each time point is solved by Newton-Raphson on
//! the full MNA residual; a failed step is retried as two half steps, up to
//! [`MAX_HALVINGS`] levels deep.

pub mod linear;
pub(crate) mod mna;
mod waveform;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::ModelSet;
use crate::netlist::{Netlist, VoltageSource, GROUND};

use linear::solve_in_place;
use mna::{assemble, kcl_norm, source_norm, Assembly, Companions, Compiled};

pub use linear::{solve_linear, DenseMatrix, SingularMatrix};
pub use waveform::WaveformSet;

pub const DEFAULT_DT: f64 = 5e-14;
pub const MAX_HALVINGS: u32 = 4;
/// Largest node-voltage change applied in one Newton update.
const VOLTAGE_STEP_LIMIT: f64 = 0.5;
/// Starting shunt conductance for gmin stepping.
const GMIN_START: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("transient Newton iteration failed to converge at t = {time:e} s")]
    Convergence { time: f64 },
    #[error("DC operating point failed to converge after {gmin_steps} gmin steps")]
    DcConvergence { gmin_steps: usize },
    #[error("no stop time: the netlist has no .tran directive and none was configured")]
    MissingStopTime,
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Time step; `None` uses the netlist `.tran` step, else [`DEFAULT_DT`].
    pub dt: Option<f64>,
    /// Stop time; `None` uses the netlist `.tran` stop.
    pub tstop: Option<f64>,
    pub newton_tol_v: f64,
    pub newton_tol_i: f64,
    pub max_newton_iters: usize,
    pub gmin: f64,
    pub gmin_steps: usize,
    pub models: ModelSet,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: None,
            tstop: None,
            newton_tol_v: 1e-9,
            newton_tol_i: 1e-12,
            max_newton_iters: 60,
            gmin: 1e-12,
            gmin_steps: 10,
            models: ModelSet::default(),
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("dt must be positive");
            }
        }
        if !(self.newton_tol_v > 0.0 && self.newton_tol_i > 0.0) {
            return bad("Newton tolerances must be positive");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        if !(self.gmin >= 0.0) {
            return bad("gmin must be non-negative");
        }
        self.models.n.validate().map_err(|e| SimError::InvalidConfig(format!("N card: {e}")))?;
        self.models.p.validate().map_err(|e| SimError::InvalidConfig(format!("P card: {e}")))?;
        Ok(())
    }
}

/// A solved circuit state. `node_voltages[0]` is ground and always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub node_voltages: Vec<f64>,
    pub branch_currents: Vec<f64>,
}

pub fn evaluate_source(source: &VoltageSource, t: f64) -> f64 {
    source.value_at(t)
}

struct Newton<'a> {
    ckt: &'a Compiled,
    cfg: &'a SimConfig,
    asm: Assembly,
    rhs: Vec<f64>,
}

impl<'a> Newton<'a> {
    fn new(ckt: &'a Compiled, cfg: &'a SimConfig) -> Self {
        let n = ckt.unknowns();
        Self { ckt, cfg, asm: Assembly::new(n), rhs: vec![0.0; n] }
    }

    /// Iterates `x` to convergence; returns the KCL residual norm measured
    /// at the last assembled iterate.
    fn solve(&mut self, x: &mut [f64], t: f64, gmin: f64, companions: Option<&Companions>) -> Option<f64> {
        let nv = self.ckt.node_count - 1;
        for _ in 0..self.cfg.max_newton_iters {
            assemble(self.ckt, x, t, gmin, companions, &mut self.asm);
            let kcl = kcl_norm(self.ckt, &self.asm.residual);
            let src = source_norm(self.ckt, &self.asm.residual);
            for (r, f) in self.rhs.iter_mut().zip(&self.asm.residual) {
                *r = -f;
            }
            if solve_in_place(&mut self.asm.jac, &mut self.rhs).is_err() {
                return None;
            }
            let mut max_dv: f64 = 0.0;
            let mut limited = false;
            for (i, (xi, dx)) in x.iter_mut().zip(&self.rhs).enumerate() {
                if !dx.is_finite() {
                    return None;
                }
                let mut step = *dx;
                if i < nv {
                    if step.abs() > VOLTAGE_STEP_LIMIT {
                        step = VOLTAGE_STEP_LIMIT.copysign(step);
                        limited = true;
                    }
                    max_dv = max_dv.max(step.abs());
                }
                *xi += step;
            }
            if !limited && max_dv < self.cfg.newton_tol_v && kcl < self.cfg.newton_tol_i && src < self.cfg.newton_tol_v {
                return Some(kcl);
            }
        }
        None
    }
}

fn state_from(ckt: &Compiled, x: &[f64], time: f64) -> SystemState {
    let mut node_voltages = Vec::with_capacity(ckt.node_count);
    node_voltages.push(0.0);
    node_voltages.extend_from_slice(&x[..ckt.node_count - 1]);
    SystemState { time, node_voltages, branch_currents: x[ckt.node_count - 1..].to_vec() }
}

/// DC operating point with capacitors open. Plain Newton is tried first;
/// on failure the node shunt is stepped geometrically from 1 mS down to
/// `cfg.gmin` over `cfg.gmin_steps` stages.
pub fn dc_operating_point(net: &Netlist, cfg: &SimConfig) -> Result<SystemState, SimError> {
    cfg.validate()?;
    let ckt = Compiled::new(net, &cfg.models);
    let mut newton = Newton::new(&ckt, cfg);
    let mut x = vec![0.0; ckt.unknowns()];
    if newton.solve(&mut x, 0.0, cfg.gmin, None).is_some() {
        return Ok(state_from(&ckt, &x, 0.0));
    }
    let steps = cfg.gmin_steps.max(1);
    let floor = cfg.gmin.max(f64::MIN_POSITIVE);
    let ratio = (floor / GMIN_START).powf(1.0 / steps as f64);
    x.fill(0.0);
    for k in 0..=steps {
        let g = if k == steps { cfg.gmin } else { GMIN_START * ratio.powi(k as i32) };
        if newton.solve(&mut x, 0.0, g, None).is_none() {
            return Err(SimError::DcConvergence { gmin_steps: steps });
        }
    }
    Ok(state_from(&ckt, &x, 0.0))
}

pub fn transient(net: &Netlist, cfg: &SimConfig) -> Result<WaveformSet, SimError> {
    transient_with(net, cfg, |_, _| ControlFlow::Continue(()))
}

/// Transient analysis with a per-step observer. The observer sees the
/// time and the node-voltage vector (ground at index 0) of every accepted
/// step and may end the run early with `ControlFlow::Break`.
pub fn transient_with<F>(net: &Netlist, cfg: &SimConfig, mut observer: F) -> Result<WaveformSet, SimError>
where
    F: FnMut(f64, &[f64]) -> ControlFlow<()>,
{
    cfg.validate()?;
    let tstop = cfg.tstop.or(net.tran.map(|t| t.stop)).ok_or(SimError::MissingStopTime)?;
    let dt = cfg.dt.or(net.tran.map(|t| t.step)).unwrap_or(DEFAULT_DT);
    if !(tstop > 0.0 && tstop.is_finite()) {
        return Err(SimError::InvalidConfig("stop time must be positive".into()));
    }
    let ckt = Compiled::new(net, &cfg.models);
    let mut run = TransientRun::new(&ckt, cfg, net);
    let mut observe = |t: f64, v: &[f64]| observer(t, v);
    if observe(0.0, &run.node_v).is_break() {
        return Ok(run.waves);
    }
    // Step count is fixed up front so the time grid does not accumulate
    // rounding drift.
    let steps = (tstop / dt - 1e-9).ceil().max(1.0) as u64;
    for k in 1..=steps {
        let t_next = if k == steps { tstop } else { k as f64 * dt };
        let h = t_next - run.t;
        if run.advance(h, 0, &mut observe)?.is_break() {
            break;
        }
    }
    Ok(run.waves)
}

struct TransientRun<'a> {
    ckt: &'a Compiled,
    newton: Newton<'a>,
    t: f64,
    x: Vec<f64>,
    trial: Vec<f64>,
    node_v: Vec<f64>,
    cap_v: Vec<f64>,
    cap_i: Vec<f64>,
    have_history: bool,
    companions: Companions,
    waves: WaveformSet,
}

impl<'a> TransientRun<'a> {
    fn new(ckt: &'a Compiled, cfg: &'a SimConfig, net: &Netlist) -> Self {
        let nv = ckt.node_count - 1;
        let mut x = vec![0.0; ckt.unknowns()];
        for (&node, &v) in &net.initial_conditions {
            if node != GROUND {
                x[node - 1] = v;
            }
        }
        // Grounded sources pin their node from the first sample on.
        for s in &ckt.sources {
            let v0 = s.value_at(0.0);
            match (s.plus, s.minus) {
                (p, GROUND) if p != GROUND && !net.initial_conditions.contains_key(&p) => x[p - 1] = v0,
                (GROUND, m) if m != GROUND && !net.initial_conditions.contains_key(&m) => x[m - 1] = -v0,
                _ => {}
            }
        }
        let cap_v = ckt.caps.iter().map(|c| Compiled::voltage(&x, c.a) - Compiled::voltage(&x, c.b)).collect();
        let mut node_v = vec![0.0; ckt.node_count];
        node_v[1..].copy_from_slice(&x[..nv]);
        let mut waves = WaveformSet::empty(net);
        waves.push(0.0, &node_v, &x[nv..], 0.0);
        let n_caps = ckt.caps.len();
        Self {
            ckt,
            newton: Newton::new(ckt, cfg),
            t: 0.0,
            trial: x.clone(),
            x,
            node_v,
            cap_v,
            cap_i: vec![0.0; n_caps],
            have_history: false,
            companions: Companions { geq: vec![0.0; n_caps], ieq: vec![0.0; n_caps] },
            waves,
        }
    }

    fn try_step(&mut self, h: f64) -> Option<f64> {
        for (k, c) in self.ckt.caps.iter().enumerate() {
            if self.have_history {
                let g = 2.0 * c.farads / h;
                self.companions.geq[k] = g;
                self.companions.ieq[k] = g * self.cap_v[k] + self.cap_i[k];
            } else {
                let g = c.farads / h;
                self.companions.geq[k] = g;
                self.companions.ieq[k] = g * self.cap_v[k];
            }
        }
        self.trial.copy_from_slice(&self.x);
        let t_new = self.t + h;
        self.newton.solve(&mut self.trial, t_new, self.newton.cfg.gmin, Some(&self.companions))
    }

    fn accept(&mut self, h: f64, kcl: f64) {
        std::mem::swap(&mut self.x, &mut self.trial);
        self.t += h;
        for (k, c) in self.ckt.caps.iter().enumerate() {
            let v = Compiled::voltage(&self.x, c.a) - Compiled::voltage(&self.x, c.b);
            self.cap_i[k] = self.companions.geq[k] * v - self.companions.ieq[k];
            self.cap_v[k] = v;
        }
        self.have_history = true;
        let nv = self.ckt.node_count - 1;
        self.node_v[1..].copy_from_slice(&self.x[..nv]);
        self.waves.push(self.t, &self.node_v, &self.x[nv..], kcl);
    }

    fn advance<F>(&mut self, h: f64, depth: u32, observe: &mut F) -> Result<ControlFlow<()>, SimError>
    where
        F: FnMut(f64, &[f64]) -> ControlFlow<()>,
    {
        if let Some(kcl) = self.try_step(h) {
            self.accept(h, kcl);
            return Ok(observe(self.t, &self.node_v));
        }
        if depth >= MAX_HALVINGS {
            return Err(SimError::Convergence { time: self.t + h });
        }
        let target = self.t + h;
        if self.advance(h / 2.0, depth + 1, observe)?.is_break() {
            return Ok(ControlFlow::Break(()));
        }
        self.advance(target - self.t, depth + 1, observe)
    }
}
