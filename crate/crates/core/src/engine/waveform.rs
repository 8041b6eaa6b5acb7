use std::io::{self, Write};

use crate::netlist::{Netlist, NodeId};

/// Time-aligned traces of one transient run: every node voltage (ground
/// included, always zero) and every voltage-source branch current.
///
/// Branch currents follow the SPICE sign convention: positive current
/// enters the `+` terminal, so a supply delivering power reads negative.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    times: Vec<f64>,
    node_names: Vec<String>,
    voltages: Vec<Vec<f64>>,
    source_names: Vec<String>,
    currents: Vec<Vec<f64>>,
    kcl: Vec<f64>,
}

impl WaveformSet {
    pub(crate) fn empty(net: &Netlist) -> Self {
        Self {
            times: Vec::new(),
            node_names: net.nodes().to_vec(),
            voltages: vec![Vec::new(); net.node_count()],
            source_names: net.sources.iter().map(|s| s.name.clone()).collect(),
            currents: vec![Vec::new(); net.sources.len()],
            kcl: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, t: f64, node_v: &[f64], branch_i: &[f64], kcl: f64) {
        self.times.push(t);
        for (trace, &v) in self.voltages.iter_mut().zip(node_v) {
            trace.push(v);
        }
        for (trace, &i) in self.currents.iter_mut().zip(branch_i) {
            trace.push(i);
        }
        self.kcl.push(kcl);
    }

    /// Assembles a waveform set from raw traces, e.g. for synthetic tests.
    pub fn from_traces(
        times: Vec<f64>,
        nodes: Vec<(String, Vec<f64>)>,
        sources: Vec<(String, Vec<f64>)>,
    ) -> Self {
        let len = times.len();
        assert!(nodes.iter().chain(&sources).all(|(_, t)| t.len() == len), "trace length mismatch");
        let mut node_names = vec!["0".to_string()];
        let mut voltages = vec![vec![0.0; len]];
        for (name, trace) in nodes {
            node_names.push(name);
            voltages.push(trace);
        }
        let (source_names, currents) = sources.into_iter().unzip();
        Self { times, node_names, voltages, source_names, currents, kcl: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn voltage(&self, node: NodeId) -> &[f64] {
        &self.voltages[node]
    }

    pub fn node_trace(&self, name: &str) -> Option<&[f64]> {
        let idx = self.node_names.iter().position(|n| n.eq_ignore_ascii_case(name))?;
        Some(&self.voltages[idx])
    }

    /// Branch current of a voltage source (SPICE sign convention).
    pub fn branch_current(&self, source: &str) -> Option<&[f64]> {
        let idx = self.source_names.iter().position(|n| n.eq_ignore_ascii_case(source))?;
        Some(&self.currents[idx])
    }

    /// Current delivered by `source` out of its `+` terminal into the circuit.
    pub fn supply_current(&self, source: &str) -> Option<Vec<f64>> {
        self.branch_current(source).map(|i| i.iter().map(|x| -x).collect())
    }

    /// Per-step KCL residual norm (amperes) at convergence; zero at t = 0.
    pub fn kcl_residual(&self) -> &[f64] {
        &self.kcl
    }

    /// Writes `time_s,<node>...,i(<source>)...`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["time_s".to_string()];
        header.extend(self.node_names.iter().skip(1).cloned());
        header.extend(self.source_names.iter().map(|s| format!("i({s})")));
        writeln!(w, "{}", header.join(","))?;
        let mut row = String::new();
        for k in 0..self.times.len() {
            row.clear();
            row.push_str(&format!("{:e}", self.times[k]));
            for trace in self.voltages.iter().skip(1).chain(&self.currents) {
                row.push(',');
                row.push_str(&format!("{:e}", trace[k]));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::netlist::parse_netlist;

    #[test]
    fn csv_layout() {
        let net = parse_netlist("V1 a 0 dc 1\nR1 a b 1k\nC1 b 0 1f\n.tran 1p 3p").unwrap();
        let w = crate::engine::transient(&net, &Default::default()).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "time_s,a,b,i(V1)");
        assert_eq!(lines.len(), 1 + w.len());
        let first: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 1.0, 0.0, 0.0]);
    }
}
