//! Smooth charge-based FinFET model.
//!
//! The drain current is built from the normalized source- and drain-end
//! inversion charges, `q = softplus((vg - vt - v_end) / (n * phi_t))`, so the
//! expression is C¹ across weak, moderate and strong inversion. Channel
//! length is fixed by the technology; geometry enters only through `nfin`.

use serde::{Deserialize, Serialize};

use crate::netlist::Polarity;

/// Per-polarity model card. Currents and capacitances are per fin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinFetParams {
    pub vth0: f64,
    pub n_slope: f64,
    /// Transconductance coefficient, A/V² per fin.
    pub k_tc: f64,
    pub lambda_clm: f64,
    pub cgs_fin: f64,
    pub cgd_fin: f64,
    pub cdb_fin: f64,
    pub phi_t: f64,
}

/// Thermal voltage at 300 K.
pub const PHI_T_300K: f64 = 0.02585;

impl FinFetParams {
    pub fn default_n() -> Self {
        Self {
            vth0: 0.25,
            n_slope: 1.15,
            k_tc: 450e-6,
            lambda_clm: 0.15,
            cgs_fin: 0.05e-15,
            cgd_fin: 0.05e-15,
            cdb_fin: 0.03e-15,
            phi_t: PHI_T_300K,
        }
    }

    pub fn default_p() -> Self {
        Self { n_slope: 1.20, k_tc: 300e-6, lambda_clm: 0.20, ..Self::default_n() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.vth0,
            self.n_slope,
            self.k_tc,
            self.lambda_clm,
            self.cgs_fin,
            self.cgd_fin,
            self.cdb_fin,
            self.phi_t,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("model parameters must be finite".into());
        }
        if self.k_tc <= 0.0 {
            return Err("k_tc must be positive".into());
        }
        if self.n_slope < 1.0 {
            return Err("n_slope must be >= 1".into());
        }
        if self.lambda_clm < 0.0 {
            return Err("lambda_clm must be non-negative".into());
        }
        if self.cgs_fin < 0.0 || self.cgd_fin < 0.0 || self.cdb_fin < 0.0 {
            return Err("capacitances must be non-negative".into());
        }
        if self.phi_t <= 0.0 {
            return Err("phi_t must be positive".into());
        }
        Ok(())
    }

    /// Sets a field by its config-file name (`vth0`, `k_tc`, ...).
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), String> {
        let slot = match key {
            "vth0" => &mut self.vth0,
            "n_slope" => &mut self.n_slope,
            "k_tc" => &mut self.k_tc,
            "lambda_clm" => &mut self.lambda_clm,
            "cgs_fin" => &mut self.cgs_fin,
            "cgd_fin" => &mut self.cgd_fin,
            "cdb_fin" => &mut self.cdb_fin,
            "phi_t" => &mut self.phi_t,
            _ => return Err(format!("unknown model parameter '{key}'")),
        };
        *slot = value;
        Ok(())
    }
}

/// The N and P cards used by a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub n: FinFetParams,
    pub p: FinFetParams,
}

impl Default for ModelSet {
    fn default() -> Self {
        Self { n: FinFetParams::default_n(), p: FinFetParams::default_p() }
    }
}

impl ModelSet {
    pub fn card(&self, polarity: Polarity) -> &FinFetParams {
        match polarity {
            Polarity::N => &self.n,
            Polarity::P => &self.p,
        }
    }
}

/// Drain current and its terminal partials. `id` flows into the drain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceEval {
    pub id: f64,
    pub gm: f64,
    pub gds: f64,
    pub gms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceCaps {
    pub cgs: f64,
    pub cgd: f64,
    pub cdb: f64,
}

/// `ln(1 + e^x)` and its derivative, without overflow for large `|x|`.
#[inline]
fn softplus(x: f64) -> (f64, f64) {
    if x > 0.0 {
        let e = (-x).exp();
        (x + e.ln_1p(), 1.0 / (1.0 + e))
    } else {
        let e = x.exp();
        (e.ln_1p(), e / (1.0 + e))
    }
}

/// N-type evaluation with `vd >= vs` already arranged by the caller.
#[inline]
fn forward_n(vg: f64, vd: f64, vs: f64, nfin: f64, vth_delta: f64, p: &FinFetParams) -> DeviceEval {
    let nphi = p.n_slope * p.phi_t;
    let vt = p.vth0 + vth_delta;
    let (qs, ss) = softplus((vg - vs - vt) / nphi);
    let (qd, sd) = softplus((vg - vd - vt) / nphi);
    let scale = nfin * p.k_tc * p.n_slope * p.phi_t * p.phi_t;
    let vds = vd - vs;
    let clm = 1.0 + p.lambda_clm * vds;
    let core = scale * (qs * qs - qd * qd);
    // d(q^2)/dv_end = -2 q sigma / nphi
    let dcore_dvg = scale * 2.0 * (qs * ss - qd * sd) / nphi;
    let dcore_dvd = scale * 2.0 * qd * sd / nphi;
    let dcore_dvs = -scale * 2.0 * qs * ss / nphi;
    DeviceEval {
        id: core * clm,
        gm: dcore_dvg * clm,
        gds: dcore_dvd * clm + core * p.lambda_clm,
        gms: dcore_dvs * clm - core * p.lambda_clm,
    }
}

#[inline]
fn eval_n(vg: f64, vd: f64, vs: f64, nfin: f64, vth_delta: f64, p: &FinFetParams) -> DeviceEval {
    if vd >= vs {
        forward_n(vg, vd, vs, nfin, vth_delta, p)
    } else {
        let r = forward_n(vg, vs, vd, nfin, vth_delta, p);
        DeviceEval { id: -r.id, gm: -r.gm, gds: -r.gms, gms: -r.gds }
    }
}

/// Drain current of one device instance. P devices mirror the N equation
/// through the origin using the P card.
pub fn drain_current(
    polarity: Polarity,
    vg: f64,
    vd: f64,
    vs: f64,
    nfin: u32,
    vth_delta: f64,
    p: &FinFetParams,
) -> DeviceEval {
    let nfin = f64::from(nfin);
    match polarity {
        Polarity::N => eval_n(vg, vd, vs, nfin, vth_delta, p),
        Polarity::P => {
            let r = eval_n(-vg, -vd, -vs, nfin, vth_delta, p);
            // id_P(v) = -id_N(-v): the chain rule cancels both sign flips.
            DeviceEval { id: -r.id, gm: r.gm, gds: r.gds, gms: r.gms }
        }
    }
}

pub fn device_capacitances(nfin: u32, p: &FinFetParams) -> DeviceCaps {
    let n = f64::from(nfin);
    DeviceCaps { cgs: n * p.cgs_fin, cgd: n * p.cgd_fin, cdb: n * p.cdb_fin }
}
