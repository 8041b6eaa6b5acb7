//! Flat `key=value` experiment file.
//!
//! ```text
//! # testbench
//! vdd=0.8
//! dvin=5m
//! sizing.F13=4
//! model.n.vth0=0.25
//! sim.dt=0.05p
//! mc.seed=7
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. Numbers accept
//! the same engineering suffixes as netlists.

use std::fmt;

use compsim_core::circuits::TestbenchConfig;
use compsim_core::engine::SimConfig;
use compsim_core::units::parse_eng;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Monte-Carlo settings that may come from the file.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McDefaults {
    pub sigma_vth: Option<f64>,
    pub samples: Option<u32>,
    pub seed: Option<u64>,
}

impl McDefaults {
    pub fn any(&self) -> bool {
        self.sigma_vth.is_some() || self.samples.is_some() || self.seed.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub tb: TestbenchConfig,
    pub sim: SimConfig,
    pub mc: McDefaults,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| ConfigError { line: idx + 1, reason };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
            s.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(s)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let num = || parse_eng(value).ok_or_else(|| format!("'{value}' is not a number for {key}"));
        let int = || value.parse::<u64>().map_err(|_| format!("'{value}' is not a non-negative integer for {key}"));
        let small = || int().and_then(|v| u32::try_from(v).map_err(|_| format!("{key} is too large")));
        if let Some(device) = key.strip_prefix("sizing.") {
            self.tb.sizing.insert(device.to_string(), small()?);
            return Ok(());
        }
        if let Some(param) = key.strip_prefix("model.n.") {
            return self.sim.models.n.set(param, num()?);
        }
        if let Some(param) = key.strip_prefix("model.p.") {
            return self.sim.models.p.set(param, num()?);
        }
        let tb = &mut self.tb;
        let sim = &mut self.sim;
        match key {
            "vdd" => tb.vdd = num()?,
            "vcm" => tb.vcm = num()?,
            "dvin" => tb.dvin = num()?,
            "fclk" => tb.fclk = num()?,
            "duty" => tb.duty = num()?,
            "edge_time" => tb.edge_time = num()?,
            "cload" => tb.cload = num()?,
            "nonoverlap" => tb.nonoverlap = num()?,
            "n_periods" => tb.n_periods = small()?,
            "sim.dt" => sim.dt = Some(num()?),
            "sim.tstop" => sim.tstop = Some(num()?),
            "sim.newton_tol_v" => sim.newton_tol_v = num()?,
            "sim.newton_tol_i" => sim.newton_tol_i = num()?,
            "sim.max_newton_iters" => sim.max_newton_iters = int()? as usize,
            "sim.gmin" => sim.gmin = num()?,
            "sim.gmin_steps" => sim.gmin_steps = int()? as usize,
            "mc.sigma_vth" => self.mc.sigma_vth = Some(num()?),
            "mc.samples" => self.mc.samples = Some(small()?),
            "mc.seed" => self.mc.seed = Some(int()?),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }
}
