//! Network files (JSON), iteration traces and flow tables (CSV).
//!
//! Network file layout, units fixed by key suffix:
//!
//! ```json
//! {
//!   "fluid": {"kind": "gas", "rel_density": 0.6,
//!             "operating_pressure_pa": 400000.0, "normal_pressure_pa": 100000.0},
//!   "reference_node": 11,
//!   "nodes": [{"id": 1, "demand_m3h": -6940}, ...],
//!   "pipes": [{"id": 1, "from": 2, "to": 3, "diameter_m": 0.4064,
//!              "length_m": 100, "roughness_m": 2e-05}, ...],
//!   "loops": [[1, -2, -3, 4], ...],
//!   "initial_flows": [{"pipe": 1, "flow_m3h": 200}, ...]
//! }
//! ```
//!
//! A water network uses `{"kind": "water", "density": ..., "viscosity": ...}`.
//! `loops`, `initial_flows` and `reference_node` are optional; unknown keys
//! are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::{
    ensure_valid, FluidSpec, GasSpec, Network, NodeId, NodeSpec, Pipe, PipeId, SignedLoop,
    WaterSpec,
};
use crate::state::{FlowState, SolveReport};
use crate::units::{m3h_to_m3s, m3s_to_m3h, m3s_to_m3h_exact};
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    fluid: RawFluid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_node: Option<u32>,
    nodes: Vec<RawNode>,
    pipes: Vec<RawPipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loops: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_flows: Option<Vec<RawFlow>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawFluid {
    Gas {
        rel_density: f64,
        operating_pressure_pa: f64,
        normal_pressure_pa: f64,
    },
    Water {
        density: f64,
        viscosity: f64,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: u32,
    demand_m3h: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipe {
    id: u32,
    from: Option<u32>,
    to: Option<u32>,
    diameter_m: Option<f64>,
    length_m: Option<f64>,
    roughness_m: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    pipe: u32,
    flow_m3h: f64,
}

fn require<T>(v: Option<T>, what: &str, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::Parse(format!("{what}: missing field `{field}`")))
}

/// Parses a network document without running [`crate::network::validate`].
pub fn parse_network_unchecked(text: &str) -> Result<Network> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;

    let fluid = match raw.fluid {
        RawFluid::Gas {
            rel_density,
            operating_pressure_pa,
            normal_pressure_pa,
        } => FluidSpec::Gas(GasSpec {
            relative_density: rel_density,
            operating_pressure: operating_pressure_pa,
            normal_pressure: normal_pressure_pa,
        }),
        RawFluid::Water { density, viscosity } => FluidSpec::Water(WaterSpec { density, viscosity }),
    };

    let nodes = raw
        .nodes
        .iter()
        .map(|n| {
            let what = format!("nodes: node {}", n.id);
            Ok(NodeSpec::from_m3h(n.id, require(n.demand_m3h, &what, "demand_m3h")?))
        })
        .collect::<Result<Vec<_>>>()?;

    let pipes = raw
        .pipes
        .iter()
        .map(|p| {
            let what = format!("pipes: pipe {}", p.id);
            Ok(Pipe {
                id: PipeId(p.id),
                from: NodeId(require(p.from, &what, "from")?),
                to: NodeId(require(p.to, &what, "to")?),
                diameter: require(p.diameter_m, &what, "diameter_m")?,
                length: require(p.length_m, &what, "length_m")?,
                roughness: require(p.roughness_m, &what, "roughness_m")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut net = Network::new(pipes, nodes, fluid, raw.reference_node.map(NodeId));

    if let Some(loops) = raw.loops {
        let parsed = loops
            .iter()
            .enumerate()
            .map(|(i, lp)| {
                lp.iter()
                    .map(|&signed| {
                        if signed == 0 || signed.unsigned_abs() > u32::MAX as u64 {
                            return Err(Error::Parse(format!(
                                "loops[{i}]: `{signed}` is not a signed pipe id"
                            )));
                        }
                        Ok((PipeId(signed.unsigned_abs() as u32), signed.signum() as i8))
                    })
                    .collect::<Result<SignedLoop>>()
            })
            .collect::<Result<Vec<_>>>()?;
        net = net.with_explicit_loops(parsed);
    }

    if let Some(flows) = raw.initial_flows {
        let mut map = BTreeMap::new();
        for f in flows {
            if map.insert(PipeId(f.pipe), m3h_to_m3s(f.flow_m3h)).is_some() {
                return Err(Error::Parse(format!(
                    "initial_flows: pipe {} listed twice",
                    f.pipe
                )));
            }
        }
        net = net.with_initial_flows(map);
    }

    Ok(net)
}

/// Parses and validates a network document.
pub fn parse_network_str(text: &str) -> Result<Network> {
    let net = parse_network_unchecked(text)?;
    ensure_valid(&net)?;
    Ok(net)
}

pub fn parse_network(path: impl AsRef<Path>) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    parse_network_str(&text)
}

/// Serializes a network back into the file format.
pub fn network_to_string(net: &Network) -> String {
    let fluid = match *net.fluid() {
        FluidSpec::Gas(g) => RawFluid::Gas {
            rel_density: g.relative_density,
            operating_pressure_pa: g.operating_pressure,
            normal_pressure_pa: g.normal_pressure,
        },
        FluidSpec::Water(w) => RawFluid::Water {
            density: w.density,
            viscosity: w.viscosity,
        },
    };
    let raw = RawFile {
        fluid,
        reference_node: Some(net.reference_node().0),
        nodes: net
            .nodes()
            .iter()
            .map(|n| RawNode {
                id: n.id.0,
                demand_m3h: Some(n.demand_m3h()),
            })
            .collect(),
        pipes: net
            .pipes()
            .iter()
            .map(|p| RawPipe {
                id: p.id.0,
                from: Some(p.from.0),
                to: Some(p.to.0),
                diameter_m: Some(p.diameter),
                length_m: Some(p.length),
                roughness_m: Some(p.roughness),
            })
            .collect(),
        loops: net.explicit_loops().map(|loops| {
            loops
                .iter()
                .map(|lp| lp.iter().map(|&(p, s)| p.0 as i64 * s as i64).collect())
                .collect()
        }),
        initial_flows: net.initial_flows().map(|m| {
            m.iter()
                .map(|(p, q)| RawFlow {
                    pipe: p.0,
                    flow_m3h: m3s_to_m3h_exact(*q),
                })
                .collect()
        }),
    };
    let mut s = serde_json::to_string_pretty(&raw).expect("network serializes");
    s.push('\n');
    s
}

/// How signs are written in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceSigns {
    /// Each value is signed against the direction of the previous column,
    /// so a minus marks a direction change at that iteration. The first
    /// column is signed against the reference orientation.
    #[default]
    RelativeToPrevious,
    /// Every value is signed against the pipe's reference orientation.
    Reference,
}

/// Per-iteration flow table: one row per pipe, one column per iteration
/// (m³/h, two decimals) and a final velocity column (m/s).
pub fn trace_csv(report: &SolveReport, signs: TraceSigns) -> String {
    let mut out = String::from("pipe");
    for k in 1..=report.iterations.len() {
        write!(out, ",{k}").unwrap();
    }
    out.push_str(",velocity_m_s\n");

    let pipes = report.iterations[0].pipe_ids().to_vec();
    for (i, pipe) in pipes.iter().enumerate() {
        write!(out, "{pipe}").unwrap();
        let mut prev_sign = 1.0;
        for state in &report.iterations {
            let q = state.as_slice()[i];
            let shown = match signs {
                TraceSigns::Reference => q,
                TraceSigns::RelativeToPrevious => {
                    let v = q * prev_sign;
                    if q != 0.0 {
                        prev_sign = q.signum();
                    }
                    v
                }
            };
            write!(out, ",{:.2}", m3s_to_m3h(shown)).unwrap();
        }
        let v = report.velocities.get(pipe).copied().unwrap_or(f64::NAN);
        writeln!(out, ",{v:.2}").unwrap();
    }
    out
}

/// Reads a trace back as (pipe, per-iteration values in m³/h, velocity).
pub fn parse_trace_csv(text: &str) -> Result<Vec<(PipeId, Vec<f64>, f64)>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("trace: `{s}`: {e}")))
        };
        let pipe = rec
            .get(0)
            .unwrap_or_default()
            .trim()
            .parse::<u32>()
            .map_err(|e| Error::Parse(format!("trace: pipe id: {e}")))?;
        let n = rec.len();
        if n < 3 {
            return Err(Error::Parse("trace: row too short".into()));
        }
        let flows = (1..n - 1).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?;
        rows.push((PipeId(pipe), flows, num(&rec[n - 1])?));
    }
    Ok(rows)
}

/// `pipe,flow_m3h` table at full precision.
pub fn flows_csv(flows: &FlowState) -> String {
    let mut out = String::from("pipe,flow_m3h\n");
    for (p, q) in flows.iter() {
        writeln!(out, "{p},{}", m3s_to_m3h_exact(q)).unwrap();
    }
    out
}

/// Reads a `pipe,flow_m3h` table; every network pipe must appear once.
pub fn parse_flows_csv(net: &Network, text: &str) -> Result<FlowState> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        pipe: u32,
        flow_m3h: f64,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut map = BTreeMap::new();
    let mut dup = BTreeSet::new();
    for (line, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("flows row {}: {e}", line + 1)))?;
        if map.insert(PipeId(row.pipe), m3h_to_m3s(row.flow_m3h)).is_some() {
            dup.insert(row.pipe);
        }
    }
    if let Some(p) = dup.first() {
        return Err(Error::Parse(format!("flows: pipe {p} listed twice")));
    }
    if let Some(p) = map.keys().find(|p| net.pipe_index(**p).is_none()) {
        return Err(Error::Parse(format!("flows: unknown pipe {p}")));
    }
    FlowState::from_map(net, &map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const FIXTURE: &str = include_str!("../fixtures/gas_network.json");

    #[test]
    fn fixture_counts() {
        let net = parse_network_str(FIXTURE).unwrap();
        assert_eq!(net.pipes().len(), 15);
        assert_eq!(net.nodes().len(), 11);
        assert_eq!(net.explicit_loops().unwrap().len(), 5);
        let consumed: f64 = net.nodes().iter().map(|n| n.demand_m3h()).filter(|d| *d > 0.0).sum();
        assert!((consumed - 7000.0 + 60.0).abs() < 1e-9);
        // node I consumes 60 of its 7000 input
        let supply = m3s_to_m3h(net.total_supply());
        assert!((supply - 6940.0).abs() < 1e-9);
    }

    #[test]
    fn missing_diameter_names_pipe() {
        let text = FIXTURE.replacen("\"diameter_m\": 0.1524, ", "", 1);
        let err = parse_network_str(&text).unwrap_err().to_string();
        assert!(err.contains("pipe 3") && err.contains("diameter_m"), "{err}");
    }

    #[test]
    fn unbalanced_file_rejected() {
        let text = FIXTURE.replace("\"demand_m3h\": 2100", "\"demand_m3h\": 2101");
        match parse_network_str(&text) {
            Err(Error::Invalid(v)) => assert!(v[0].to_string().contains("unbalanced demands")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = FIXTURE.replacen("\"reference_node\"", "\"colour\": 1, \"reference_node\"", 1);
        assert!(matches!(parse_network_str(&text), Err(Error::Parse(_))));
        let text = FIXTURE.replacen("\"rel_density\"", "\"viscosity\": 1.0, \"rel_density\"", 1);
        assert!(matches!(parse_network_str(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = FIXTURE.replacen("\"nodes\": [", "\"nodes\": [,", 1);
        let err = parse_network_str(&text).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
    }

    #[test]
    fn fixture_round_trip() {
        let net = fixtures::water_network();
        let again = parse_network_str(&network_to_string(&net)).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn flows_csv_round_trip() {
        let net = fixtures::gas_network();
        let s = FlowState::from_map(&net, net.initial_flows().unwrap()).unwrap();
        let back = parse_flows_csv(&net, &flows_csv(&s)).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-15);
        let truncated: String = flows_csv(&s).lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_flows_csv(&net, &truncated), Err(Error::MissingFlow(_))));
    }
}
